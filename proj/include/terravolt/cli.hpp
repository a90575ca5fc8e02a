#pragma once

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "terravolt/config.hpp"
#include "terravolt/pipeline.hpp"

namespace terravolt {

namespace detail {

inline bool parse_pose(const std::string& text, int fields, Pose2D& out) {
  double x = 0, y = 0, h = 0;
  const int got = std::sscanf(text.c_str(), "%lf,%lf,%lf", &x, &y, &h);
  if (got < fields) return false;
  out = {x, y, wrap_angle(h)};
  return true;
}

// Persisted artifacts must be byte-identical across reruns, so wall-clock
// fields are stripped before anything reaches a file. Live timings go to
// stdout instead.
inline PlanResult strip_timing(PlanResult plan) {
  plan.wall_time = 0.0;
  return plan;
}

inline ComparisonResult strip_timing(ComparisonResult result) {
  for (auto& row : result.rows) {
    row.total_time = 0.0;
    row.avg_node_time = 0.0;
  }
  for (auto& per_estimator : result.plans)
    for (auto& plan : per_estimator) plan.wall_time = 0.0;
  return result;
}

inline RampModelParams resolve_ramp_params(const AppConfig& cfg) {
  if (cfg.ramp_overridden) return cfg.ramp;
  return fit_ramp_model_to_simulator(cfg.rover);
}

inline void write_text(const std::string& path, const std::string& text) {
  auto f = open_output(path);
  f << text;
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace detail

// Entry point behind the `terravolt` binary. Exit codes: 0 success, 1 usage
// error, 2 data error.
inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"terrain-aware driving energy prediction and minimum-energy path planning"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 1;
  std::string config_path;
  std::string out_path;
  int threads = 2;
  bool csv = false;
  auto* seed_opt = app.add_option("--seed", seed, "master seed for all randomized steps");
  app.add_option("--config", config_path, "flat key=value configuration file");
  app.add_option("--out", out_path, "output path");
  app.add_option("--threads", threads, "worker threads");
  app.add_flag("--csv", csv, "emit tables as CSV instead of aligned text");

  // terrain ---------------------------------------------------------------
  auto* terrain_cmd = app.add_subcommand("terrain", "generate a synthetic DEM");
  std::string preset = "rough";
  TerrainGenConfig gen;
  terrain_cmd->add_option("--preset", preset, "flat|ramp|rough|bumps|rough_bumps")
      ->check(CLI::IsMember({"flat", "ramp", "rough", "bumps", "rough_bumps"}));
  terrain_cmd->add_option("--pitch", gen.pitch_deg, "ramp pitch [deg]");
  terrain_cmd->add_option("--roll", gen.roll_deg, "ramp roll [deg]");
  terrain_cmd->add_option("--extent-x", gen.extent_x, "terrain size along x [m]");
  terrain_cmd->add_option("--extent-y", gen.extent_y, "terrain size along y [m]");
  terrain_cmd->add_option("--cell", gen.cell_size, "grid cell size [m]");
  terrain_cmd->add_option("--amplitude", gen.roughness_amplitude, "target RMS elevation [m]");
  terrain_cmd->add_option("--correlation", gen.correlation_length, "noise correlation length [m]");
  terrain_cmd->add_option("--bump-density", gen.bump_density, "bumps per m^2");
  terrain_cmd->add_option("--bump-radius", gen.bump_radius, "bump radius [m]");
  terrain_cmd->add_option("--bump-height", gen.bump_height, "bump height [m]");

  // dataset ---------------------------------------------------------------
  auto* dataset_cmd = app.add_subcommand("dataset", "generate labelled training data");
  std::vector<std::string> dem_paths;
  std::size_t n_samples = 10000;
  dataset_cmd->add_option("--dem", dem_paths, "DEM file(s) to sample")->required();
  dataset_cmd->add_option("--n", n_samples, "number of samples");

  // train -----------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train the energy regressor");
  std::string data_path;
  int epochs_override = -1;
  train_cmd->add_option("--data", data_path, "dataset file")->required();
  train_cmd->add_option("--epochs", epochs_override, "override epoch count");

  // eval ------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "prediction metrics on a dataset");
  std::string eval_data;
  std::string weights_path;
  eval_cmd->add_option("--data", eval_data, "dataset file")->required();
  eval_cmd->add_option("--weights", weights_path, "weights file for the learned estimator");

  // plan ------------------------------------------------------------------
  auto* plan_cmd = app.add_subcommand("plan", "search a minimum-energy path");
  std::string plan_dem;
  std::string estimator_name = "rampmodel";
  std::string plan_weights;
  std::string start_text;
  std::string goal_text;
  plan_cmd->add_option("--dem", plan_dem, "DEM file")->required();
  plan_cmd->add_option("--estimator", estimator_name, "rampmodel|conv1d|dynsim")
      ->check(CLI::IsMember({"rampmodel", "conv1d", "dynsim"}));
  plan_cmd->add_option("--weights", plan_weights, "weights file (conv1d)");
  plan_cmd->add_option("--start", start_text, "start pose x,y,heading")->required();
  plan_cmd->add_option("--goal", goal_text, "goal position x,y")->required();

  // compare ---------------------------------------------------------------
  auto* compare_cmd = app.add_subcommand("compare", "benchmark estimators inside the planner");
  std::string compare_dem;
  std::string estimators_text = "dynsim,conv1d,rampmodel";
  std::string compare_weights;
  std::size_t n_problems = 20;
  double min_dist = 4.0, max_dist = 8.0;
  compare_cmd->add_option("--dem", compare_dem, "DEM file")->required();
  compare_cmd->add_option("--estimators", estimators_text, "comma-separated estimator list");
  compare_cmd->add_option("--weights", compare_weights, "weights file (conv1d)");
  compare_cmd->add_option("--problems", n_problems, "number of start/goal pairs");
  compare_cmd->add_option("--min-dist", min_dist, "minimum start-goal distance [m]");
  compare_cmd->add_option("--max-dist", max_dist, "maximum start-goal distance [m]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    AppConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (seed_opt->count() > 0 || cfg.train.seed == 0) cfg.train.seed = seed;
    cfg.train.threads = threads;

    if (terrain_cmd->parsed()) {
      if (out_path.empty()) throw CLI::ValidationError("--out is required for terrain");
      gen.seed = seed;
      Dem dem;
      if (preset == "flat") {
        dem = make_ramp(0.0, 0.0, gen);
      } else if (preset == "ramp") {
        dem = make_ramp(gen.pitch_deg, gen.roll_deg, gen);
      } else if (preset == "rough") {
        if (gen.roughness_amplitude == 0.0) gen.roughness_amplitude = 0.05;
        dem = make_rough(gen);
      } else if (preset == "bumps") {
        if (gen.bump_density == 0.0) gen.bump_density = 0.4;
        dem = add_bumps(make_ramp(gen.pitch_deg, gen.roll_deg, gen), gen);
      } else {  // rough_bumps
        if (gen.roughness_amplitude == 0.0) gen.roughness_amplitude = 0.05;
        if (gen.bump_density == 0.0) gen.bump_density = 0.4;
        dem = add_bumps(make_rough(gen), gen);
      }
      save_dem(dem, out_path);
      std::cout << "wrote " << dem.n_cols << "x" << dem.n_rows << " DEM to " << out_path
                << "\n";
      return 0;
    }

    if (dataset_cmd->parsed()) {
      if (out_path.empty()) throw CLI::ValidationError("--out is required for dataset");
      std::vector<Dem> terrains;
      terrains.reserve(dem_paths.size());
      for (const auto& p : dem_paths) terrains.push_back(load_dem(p));
      const auto records = generate_dataset(terrains, n_samples, cfg.rover, cfg.thresholds,
                                            cfg.lattice, seed, threads);
      save_dataset(records, out_path);
      std::cout << "wrote " << records.size() << " records to " << out_path << "\n";
      return 0;
    }

    if (train_cmd->parsed()) {
      if (out_path.empty()) throw CLI::ValidationError("--out is required for train");
      const auto records = load_dataset(data_path);
      if (epochs_override > 0) cfg.train.epochs = epochs_override;
      const TrainResult result = train(dataset_to_samples(records), cfg.train);
      save_weights(result.weights, out_path);
      const auto& last = result.history.back();
      std::cout << "trained " << cfg.train.epochs << " epochs; final train mse "
                << format_double(last.train_mse) << ", validation mse "
                << format_double(last.val_mse) << "; wrote " << out_path << "\n";
      return 0;
    }

    if (eval_cmd->parsed()) {
      const auto records = load_dataset(eval_data);
      std::optional<EnergyNetWeights> weights;
      if (!weights_path.empty()) weights = load_weights(weights_path);
      const RampModelParams ramp = detail::resolve_ramp_params(cfg);
      const auto rows = evaluate(weights ? &*weights : nullptr, ramp, records,
                                 cfg.lattice.primitive_length, threads);
      const std::string text = csv ? eval_table_csv(rows) : format_eval_table(rows);
      if (out_path.empty())
        std::cout << text;
      else
        detail::write_text(out_path, text);
      return 0;
    }

    if (plan_cmd->parsed()) {
      Pose2D start, goal;
      if (!detail::parse_pose(start_text, 3, start))
        throw CLI::ValidationError("--start must be x,y,heading");
      if (!detail::parse_pose(goal_text, 2, goal))
        throw CLI::ValidationError("--goal must be x,y");
      const Dem dem = load_dem(plan_dem);
      const RampModelParams fitted = detail::resolve_ramp_params(cfg);
      const RampModelParams calibrated =
          calibrate_heuristic(fitted, cfg.rover, cfg.heuristic_margin);

      std::unique_ptr<EnergyEstimator> estimator;
      if (estimator_name == "rampmodel") {
        estimator = std::make_unique<RampModelEstimator>(fitted);
      } else if (estimator_name == "dynsim") {
        estimator = std::make_unique<DynSimEstimator>(dem, cfg.rover);
      } else {
        if (plan_weights.empty())
          throw CLI::ValidationError("--weights is required for the conv1d estimator");
        estimator = std::make_unique<Conv1dEstimator>(load_weights(plan_weights));
      }

      PlanResult plan =
          astar(start, goal, dem, *estimator, calibrated, cfg.lattice, cfg.thresholds);
      if (plan.found) execute_plan(plan, dem, cfg.rover);
      if (!out_path.empty()) save_plan(detail::strip_timing(plan), out_path);
      if (!plan.found) {
        std::cout << "no path (" << plan.nodes_expanded << " nodes, "
                  << format_double(plan.wall_time) << " s)\n";
        return 0;
      }
      std::cout << "path: " << plan.arcs.size() << " arcs, predicted "
                << format_double(plan.predicted_energy) << " J, real "
                << format_double(plan.real_energy) << " J, " << plan.nodes_expanded
                << " nodes, " << format_double(plan.wall_time) << " s\n";
      return 0;
    }

    if (compare_cmd->parsed()) {
      const Dem dem = load_dem(compare_dem);
      const RampModelParams fitted = detail::resolve_ramp_params(cfg);
      const RampModelParams calibrated =
          calibrate_heuristic(fitted, cfg.rover, cfg.heuristic_margin);

      std::optional<EnergyNetWeights> weights;
      std::vector<EstimatorSpec> specs;
      std::string token;
      std::istringstream names(estimators_text);
      while (std::getline(names, token, ',')) {
        if (token == "rampmodel") {
          specs.push_back({"RampModel", [fitted](const Dem&) {
                             return std::make_unique<RampModelEstimator>(fitted);
                           }});
        } else if (token == "dynsim") {
          const RoverParams rover = cfg.rover;
          specs.push_back({"DynSim", [rover](const Dem& d) {
                             return std::make_unique<DynSimEstimator>(d, rover);
                           }});
        } else if (token == "conv1d") {
          if (!weights) {
            if (compare_weights.empty())
              throw CLI::ValidationError("--weights is required for the conv1d estimator");
            weights = load_weights(compare_weights);
          }
          const EnergyNetWeights w = *weights;
          specs.push_back({"Conv1D", [w](const Dem&) {
                             return std::make_unique<Conv1dEstimator>(w);
                           }});
        } else {
          throw CLI::ValidationError("unknown estimator '" + token + "'");
        }
      }
      const auto problems = make_problems(dem, n_problems, seed, cfg.lattice, cfg.thresholds,
                                          min_dist, max_dist);
      const ComparisonResult result = compare_planners(problems, specs, cfg.rover, calibrated,
                                                       cfg.lattice, cfg.thresholds, threads);
      std::cout << format_comparison_table(result);
      if (!out_path.empty()) {
        const ComparisonResult stripped = detail::strip_timing(result);
        detail::write_text(out_path,
                           csv ? comparison_csv(stripped) : format_comparison_table(stripped));
      }
      return 0;
    }

    return 1;
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace terravolt
