#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "terravolt/estimators.hpp"
#include "terravolt/nn.hpp"
#include "terravolt/parallel.hpp"
#include "terravolt/planner.hpp"
#include "terravolt/powertrain.hpp"
#include "terravolt/random.hpp"
#include "terravolt/swath.hpp"
#include "terravolt/terrain.hpp"
#include "terravolt/textio.hpp"

namespace terravolt {

// One labelled training example: the preprocessed window, the simulator's
// energy label and where it came from. The start pose is kept in memory for
// diagnostics but is not part of the dataset file format.
struct DatasetRecord {
  TerrainPatch patch;
  EnergyLabel label;
  int terrain_id = 0;
  double curvature = 0.0;
  Pose2D start;
};

// ---- dataset file -------------------------------------------------------

inline void save_dataset(const std::vector<DatasetRecord>& records, const std::string& path) {
  auto f = open_output(path);
  f << "terravolt-dataset v1 n=" << records.size() << "\n";
  for (const auto& rec : records) {
    for (double v : rec.patch.values) f << format_double(v) << ' ';
    f << format_double(rec.label.e_c) << ' ' << format_double(rec.label.e_r) << ' '
      << rec.terrain_id << ' ' << format_double(rec.curvature) << "\n";
  }
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::vector<DatasetRecord> load_dataset(const std::string& path) {
  auto f = open_input(path);
  std::string line;
  if (!std::getline(f, line)) throw parse_error("empty dataset file");
  auto head = split_ws(line);
  if (head.size() != 3 || head[0] != "terravolt-dataset" || head[1] != "v1" ||
      head[2].rfind("n=", 0) != 0)
    throw parse_error("not a terravolt dataset file");
  const long n = parse_long(head[2].substr(2), 1);
  std::vector<DatasetRecord> records;
  records.reserve(static_cast<std::size_t>(n));
  int line_no = 1;
  constexpr std::size_t kPatchValues = kPatchRows * kPatchCols;
  while (std::getline(f, line)) {
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != kPatchValues + 4)
      throw parse_error("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(kPatchValues + 4) + " fields");
    DatasetRecord rec;
    for (std::size_t i = 0; i < kPatchValues; ++i)
      rec.patch.values[i] = parse_double(toks[i], line_no);
    rec.label.e_c = parse_double(toks[kPatchValues], line_no);
    rec.label.e_r = parse_double(toks[kPatchValues + 1], line_no);
    rec.terrain_id = static_cast<int>(parse_long(toks[kPatchValues + 2], line_no));
    rec.curvature = parse_double(toks[kPatchValues + 3], line_no);
    records.push_back(std::move(rec));
  }
  if (static_cast<long>(records.size()) != n)
    throw parse_error("dataset header declares " + std::to_string(n) + " records, found " +
                      std::to_string(records.size()));
  return records;
}

inline std::vector<TrainSample> dataset_to_samples(const std::vector<DatasetRecord>& records) {
  std::vector<TrainSample> out(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    out[i] = {records[i].patch, records[i].label.e_c, records[i].label.e_r};
  return out;
}

// ---- dataset generation -------------------------------------------------

// Draws random (pose, primitive) candidates over the given terrains, keeps
// the ones whose swath passes the safety gate, and labels them with the
// traverse simulator. The accepted set depends only on (terrains, seed,
// n_samples), not on thread count. Aborts when fewer than 1% of candidates
// are acceptable.
inline std::vector<DatasetRecord> generate_dataset(const std::vector<Dem>& terrains,
                                                   std::size_t n_samples,
                                                   const RoverParams& rover,
                                                   const SafetyThresholds& thresholds,
                                                   const LatticeConfig& lattice,
                                                   std::uint64_t seed, int threads = 2) {
  if (terrains.empty()) throw std::invalid_argument("no terrains given");
  if (n_samples == 0) throw std::invalid_argument("n_samples must be positive");

  const std::vector<TrajectoryArc> prims = primitives(lattice);
  const double margin = kSwathLength + kSwathWidth / 2.0 + 0.1;

  std::vector<PointCloud> clouds(terrains.size());
  std::vector<std::unique_ptr<PointIndex>> indices(terrains.size());
  for (std::size_t t = 0; t < terrains.size(); ++t) {
    if (terrains[t].extent_x() <= 2 * margin || terrains[t].extent_y() <= 2 * margin)
      throw std::invalid_argument("terrain too small for dataset sampling");
    clouds[t] = sample_point_cloud(terrains[t], lattice.cloud_density,
                                   derive_seed(seed, 0xC10D0000ULL + t));
    indices[t] = std::make_unique<PointIndex>(clouds[t]);
  }

  struct Candidate {
    bool ok = false;
    DatasetRecord record;
  };

  auto evaluate = [&](std::uint64_t k, Candidate& out) {
    Rng rng(derive_seed(seed, k));
    const std::size_t t = static_cast<std::size_t>(rng.below(terrains.size()));
    const Dem& dem = terrains[t];
    TrajectoryArc arc = prims[rng.below(prims.size())];
    arc.start.x = dem.origin_x + margin + rng.uniform() * (dem.extent_x() - 2 * margin);
    arc.start.y = dem.origin_y + margin + rng.uniform() * (dem.extent_y() - 2 * margin);
    arc.start.heading = wrap_angle(rng.uniform(-kPi, kPi));
    const PreprocessResult pre = preprocess(*indices[t], arc, thresholds);
    if (!pre.traversable()) return;
    EnergyLabel label;
    try {
      label = traverse_energy(dem, arc, rover);
    } catch (const std::domain_error&) {
      return;
    }
    out.ok = true;
    out.record = {*pre.patch, label, static_cast<int>(t), arc.curvature, arc.start};
  };

  std::vector<DatasetRecord> records;
  records.reserve(n_samples);
  std::uint64_t next_k = 0;
  std::uint64_t attempts = 0;
  while (records.size() < n_samples) {
    const std::size_t batch = std::max<std::size_t>(256, 2 * (n_samples - records.size()));
    std::vector<Candidate> candidates(batch);
    parallel_for(batch, static_cast<unsigned>(std::max(1, threads)),
                 [&](std::size_t i) { evaluate(next_k + i, candidates[i]); });
    next_k += batch;
    attempts += batch;
    for (auto& c : candidates) {
      if (!c.ok) continue;
      records.push_back(std::move(c.record));
      if (records.size() == n_samples) break;
    }
    if (attempts >= 5000 && static_cast<double>(records.size()) < 0.01 * static_cast<double>(attempts))
      throw std::runtime_error(
          "dataset generation aborted: acceptance rate below 1% (" +
          std::to_string(records.size()) + "/" + std::to_string(attempts) +
          " candidates accepted); terrain too hostile for the safety thresholds");
  }
  return records;
}

// Seeded disjoint exhaustive partition; each part keeps the original record
// order.
inline std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> split_dataset(
    const std::vector<DatasetRecord>& records, double validation_fraction, std::uint64_t seed) {
  if (records.empty()) throw std::invalid_argument("empty dataset");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw std::invalid_argument("validation_fraction must be in (0,1)");
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[rng.below(i + 1)]);
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(validation_fraction * static_cast<double>(records.size())));
  n_val = std::min(n_val, records.size());
  std::vector<bool> is_val(records.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    (is_val[i] ? out.second : out.first).push_back(records[i]);
  return out;
}

// ---- estimator evaluation (energy prediction tables) --------------------

struct EvalRow {
  std::string model;
  Metrics consumption;
  Metrics recovery;
  Metrics total;
};

// Per-estimator prediction metrics against the dataset labels, for e_c, e_r
// and net energy. DynSim predicts its own labels by construction and is the
// oracle-identity row.
inline std::vector<EvalRow> evaluate(const EnergyNetWeights* weights,
                                     const RampModelParams& ramp_params,
                                     const std::vector<DatasetRecord>& records,
                                     double arc_length, int threads = 2) {
  if (records.empty()) throw std::invalid_argument("empty dataset");
  const std::size_t n = records.size();
  std::vector<double> truth_c(n), truth_r(n), truth_net(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth_c[i] = records[i].label.e_c;
    truth_r[i] = records[i].label.e_r;
    truth_net[i] = records[i].label.net();
  }

  std::vector<EvalRow> rows;
  auto add_row = [&](const std::string& name, const std::vector<double>& pc,
                     const std::vector<double>& pr) {
    std::vector<double> pnet(n);
    for (std::size_t i = 0; i < n; ++i) pnet[i] = pc[i] - pr[i];
    rows.push_back({name, metrics(pc, truth_c), metrics(pr, truth_r), metrics(pnet, truth_net)});
  };

  if (weights) {
    std::vector<double> pc(n), pr(n);
    parallel_for(n, static_cast<unsigned>(std::max(1, threads)), [&](std::size_t i) {
      const EnergyEstimate e = conv1d_estimate(records[i].patch, *weights);
      pc[i] = e.e_c;
      pr[i] = e.e_r;
    });
    add_row("Conv1D", pc, pr);
  }
  {
    std::vector<double> pc(n), pr(n);
    parallel_for(n, static_cast<unsigned>(std::max(1, threads)), [&](std::size_t i) {
      const EnergyEstimate e = ramp_model_estimate(records[i].patch, arc_length, ramp_params);
      pc[i] = e.e_c;
      pr[i] = e.e_r;
    });
    add_row("RampModel", pc, pr);
  }
  add_row("DynSim", truth_c, truth_r);
  return rows;
}

namespace detail {

inline std::string metric_cell(double v) {
  char buf[32];
  if (std::isnan(v))
    std::snprintf(buf, sizeof(buf), "nan");
  else
    std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace detail

inline std::string format_eval_table(const std::vector<EvalRow>& rows) {
  std::string out =
      "Model       |      Consumption      |       Recovery        |        Total\n"
      "            |   MAE     MSE     R2  |   MAE     MSE     R2  |   MAE     MSE     R2\n";
  for (const auto& r : rows) {
    char line[256];
    std::snprintf(line, sizeof(line),
                  "%-11s | %7s %7s %5s | %7s %7s %5s | %7s %7s %5s\n", r.model.c_str(),
                  detail::metric_cell(r.consumption.mae).c_str(),
                  detail::metric_cell(r.consumption.mse).c_str(),
                  detail::metric_cell(r.consumption.r2).c_str(),
                  detail::metric_cell(r.recovery.mae).c_str(),
                  detail::metric_cell(r.recovery.mse).c_str(),
                  detail::metric_cell(r.recovery.r2).c_str(),
                  detail::metric_cell(r.total.mae).c_str(),
                  detail::metric_cell(r.total.mse).c_str(),
                  detail::metric_cell(r.total.r2).c_str());
    out += line;
  }
  return out;
}

inline std::string eval_table_csv(const std::vector<EvalRow>& rows) {
  std::string out =
      "model,consumption_mae,consumption_mse,consumption_r2,recovery_mae,recovery_mse,"
      "recovery_r2,total_mae,total_mse,total_r2\n";
  for (const auto& r : rows) {
    out += r.model + ',' + format_double(r.consumption.mae) + ',' +
           format_double(r.consumption.mse) + ',' + format_double(r.consumption.r2) + ',' +
           format_double(r.recovery.mae) + ',' + format_double(r.recovery.mse) + ',' +
           format_double(r.recovery.r2) + ',' + format_double(r.total.mae) + ',' +
           format_double(r.total.mse) + ',' + format_double(r.total.r2) + '\n';
  }
  return out;
}

// ---- planner comparison -------------------------------------------------

struct PlanProblem {
  const Dem* dem = nullptr;
  Pose2D start;
  Pose2D goal;
};

struct EstimatorSpec {
  std::string name;
  std::function<std::unique_ptr<EnergyEstimator>(const Dem&)> make;
};

struct ComparisonRow {
  std::string model;
  long nodes_expanded = 0;
  double avg_node_time = 0.0;  // [s]
  double total_time = 0.0;     // [s]
  Metrics per_edge;            // predicted vs re-simulated net energy per plan edge
  double predicted_total = 0.0;  // [J]
  double real_total = 0.0;       // [J]
  std::size_t problems_solved = 0;
};

struct ComparisonResult {
  std::vector<ComparisonRow> rows;
  std::vector<std::size_t> excluded_problems;  // NoPath for at least one estimator
  // plans[estimator][problem]
  std::vector<std::vector<PlanResult>> plans;
};

// Plans every problem with every estimator, scores the returned paths with
// the traverse simulator, and aggregates planning effort plus per-edge
// prediction metrics. Problems that any estimator fails to solve are
// excluded from the totals and listed separately.
inline ComparisonResult compare_planners(const std::vector<PlanProblem>& problems,
                                         const std::vector<EstimatorSpec>& estimators,
                                         const RoverParams& rover,
                                         const std::optional<RampModelParams>& heuristic_params,
                                         const LatticeConfig& lattice,
                                         const SafetyThresholds& thresholds, int threads = 2) {
  if (problems.empty()) throw std::invalid_argument("no problems given");
  if (estimators.empty()) throw std::invalid_argument("no estimators given");

  ComparisonResult result;
  result.plans.assign(estimators.size(), std::vector<PlanResult>(problems.size()));

  for (std::size_t e = 0; e < estimators.size(); ++e) {
    parallel_for(problems.size(), static_cast<unsigned>(std::max(1, threads)),
                 [&](std::size_t pi) {
                   const PlanProblem& prob = problems[pi];
                   const auto estimator = estimators[e].make(*prob.dem);
                   PlanResult plan = astar(prob.start, prob.goal, *prob.dem, *estimator,
                                           heuristic_params, lattice, thresholds);
                   if (plan.found) execute_plan(plan, *prob.dem, rover);
                   result.plans[e][pi] = std::move(plan);
                 });
  }

  std::vector<bool> excluded(problems.size(), false);
  for (std::size_t pi = 0; pi < problems.size(); ++pi) {
    for (std::size_t e = 0; e < estimators.size(); ++e)
      if (!result.plans[e][pi].found) excluded[pi] = true;
    if (excluded[pi]) result.excluded_problems.push_back(pi);
  }

  for (std::size_t e = 0; e < estimators.size(); ++e) {
    ComparisonRow row;
    row.model = estimators[e].name;
    std::vector<double> edge_pred, edge_real;
    for (std::size_t pi = 0; pi < problems.size(); ++pi) {
      const PlanResult& plan = result.plans[e][pi];
      row.nodes_expanded += plan.nodes_expanded;
      row.total_time += plan.wall_time;
      if (excluded[pi] || !plan.found) continue;
      ++row.problems_solved;
      row.predicted_total += plan.predicted_energy;
      row.real_total += plan.real_energy;
      for (std::size_t a = 0; a < plan.arcs.size(); ++a) {
        edge_pred.push_back(plan.arc_pred_net[a]);
        edge_real.push_back(traverse_energy(*problems[pi].dem, plan.arcs[a], rover).net());
      }
    }
    row.avg_node_time = row.nodes_expanded > 0 ? row.total_time / row.nodes_expanded : 0.0;
    if (!edge_pred.empty()) row.per_edge = metrics(edge_pred, edge_real);
    result.rows.push_back(std::move(row));
  }
  return result;
}

inline std::string format_comparison_table(const ComparisonResult& result) {
  std::string out =
      "Model       |  Nodes  AvgNode[s]  Total[s] |     MSE      MAE     R2 | Predicted[J]  Real[J]  Solved\n";
  for (const auto& r : result.rows) {
    char line[256];
    std::snprintf(line, sizeof(line),
                  "%-11s | %6ld %10.4f %9.2f | %8.3f %7.3f %6s | %11.2f %8.2f %6zu\n",
                  r.model.c_str(), r.nodes_expanded, r.avg_node_time, r.total_time,
                  r.per_edge.mse, r.per_edge.mae, detail::metric_cell(r.per_edge.r2).c_str(),
                  r.predicted_total, r.real_total, r.problems_solved);
    out += line;
  }
  if (!result.excluded_problems.empty()) {
    out += "excluded problems (NoPath for some estimator):";
    for (std::size_t pi : result.excluded_problems) out += ' ' + std::to_string(pi);
    out += '\n';
  }
  return out;
}

inline std::string comparison_csv(const ComparisonResult& result) {
  std::string out =
      "model,nodes,avg_node_time_s,total_time_s,edge_mse,edge_mae,edge_r2,predicted_total_j,"
      "real_total_j,problems_solved\n";
  for (const auto& r : result.rows) {
    out += r.model + ',' + std::to_string(r.nodes_expanded) + ',' +
           format_double(r.avg_node_time) + ',' + format_double(r.total_time) + ',' +
           format_double(r.per_edge.mse) + ',' + format_double(r.per_edge.mae) + ',' +
           format_double(r.per_edge.r2) + ',' + format_double(r.predicted_total) + ',' +
           format_double(r.real_total) + ',' + std::to_string(r.problems_solved) + '\n';
  }
  return out;
}

// Random start/goal pairs over one DEM with basic viability screening: the
// start pose must have at least one traversable primitive and so must some
// heading at the goal.
inline std::vector<PlanProblem> make_problems(const Dem& dem, std::size_t count,
                                              std::uint64_t seed, const LatticeConfig& lattice,
                                              const SafetyThresholds& thresholds,
                                              double min_dist, double max_dist) {
  const double margin = kSwathLength + kSwathWidth / 2.0 + 0.1;
  if (dem.extent_x() <= 2 * margin || dem.extent_y() <= 2 * margin)
    throw std::invalid_argument("terrain too small for planning problems");
  const PointCloud cloud = sample_point_cloud(dem, lattice.cloud_density, lattice.cloud_seed);
  const PointIndex index(cloud);
  const std::vector<TrajectoryArc> prims = primitives(lattice);

  auto pose_viable = [&](const Pose2D& pose) {
    for (const TrajectoryArc& prim : prims) {
      TrajectoryArc arc = prim;
      arc.start = pose;
      if (preprocess(index, arc, thresholds).traversable()) return true;
    }
    return false;
  };

  std::vector<PlanProblem> out;
  Rng rng(seed);
  std::size_t guard = 0;
  while (out.size() < count) {
    if (++guard > 10000 * (count + 1))
      throw std::runtime_error("could not sample viable planning problems");
    PlanProblem prob;
    prob.dem = &dem;
    prob.start.x = dem.origin_x + margin + rng.uniform() * (dem.extent_x() - 2 * margin);
    prob.start.y = dem.origin_y + margin + rng.uniform() * (dem.extent_y() - 2 * margin);
    prob.start.heading = wrap_angle(rng.uniform(-kPi, kPi));
    const double dist = rng.uniform(min_dist, max_dist);
    const double bearing = rng.uniform(-kPi, kPi);
    prob.goal.x = prob.start.x + dist * std::cos(bearing);
    prob.goal.y = prob.start.y + dist * std::sin(bearing);
    prob.goal.heading = 0.0;
    if (prob.goal.x < dem.origin_x + margin || prob.goal.x > dem.origin_x + dem.extent_x() - margin ||
        prob.goal.y < dem.origin_y + margin || prob.goal.y > dem.origin_y + dem.extent_y() - margin)
      continue;
    if (!pose_viable(prob.start)) continue;
    Pose2D goal_probe = prob.goal;
    goal_probe.heading = bearing;
    if (!pose_viable(goal_probe)) continue;
    out.push_back(prob);
  }
  return out;
}

}  // namespace terravolt
