#pragma once

#include <cstdint>
#include <string>

#include "terravolt/estimators.hpp"
#include "terravolt/nn.hpp"
#include "terravolt/planner.hpp"
#include "terravolt/powertrain.hpp"
#include "terravolt/swath.hpp"
#include "terravolt/textio.hpp"

namespace terravolt {

// Everything the CLI workflows need, with the library defaults. Loaded from
// a flat `key = value` text file; unknown keys are rejected.
struct AppConfig {
  RoverParams rover;
  SafetyThresholds thresholds;
  LatticeConfig lattice;
  RampModelParams ramp;
  bool ramp_overridden = false;  // set when any ramp.* key appears
  TrainConfig train;
  double heuristic_margin = 0.10;
};

inline AppConfig load_config(const std::string& path) {
  AppConfig cfg;
  auto f = open_input(path);
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 3 || toks[1] != "=")
      throw parse_error("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string& key = toks[0];
    const std::string& val = toks[2];
    auto num = [&]() { return parse_double(val, line_no); };
    auto integer = [&]() { return parse_long(val, line_no); };

    if (key == "rover.mass") cfg.rover.mass = num();
    else if (key == "rover.wheel_radius") cfg.rover.wheel_radius = num();
    else if (key == "rover.wheel_track") cfg.rover.wheel_track = num();
    else if (key == "rover.rolling_resistance") cfg.rover.rolling_resistance = num();
    else if (key == "rover.speed") cfg.rover.speed = num();
    else if (key == "rover.load_shift_gain") cfg.rover.load_shift_gain = num();
    else if (key == "motor.eta_drive") cfg.rover.motors.eta_drive = num();
    else if (key == "motor.eta_regen") cfg.rover.motors.eta_regen = num();
    else if (key == "motor.armature_resistance") cfg.rover.motors.armature_resistance = num();
    else if (key == "motor.torque_constant") cfg.rover.motors.torque_constant = num();
    else if (key == "motor.gear_ratio") cfg.rover.motors.gear_ratio = num();
    else if (key == "motor.dt") cfg.rover.motors.dt = num();
    else if (key == "safety.pitch_max_deg") cfg.thresholds.pitch_max_deg = num();
    else if (key == "safety.roll_max_deg") cfg.thresholds.roll_max_deg = num();
    else if (key == "safety.residual_max") cfg.thresholds.residual_max = num();
    else if (key == "lattice.primitive_length") cfg.lattice.primitive_length = num();
    else if (key == "lattice.curvature_min") cfg.lattice.curvature_min = num();
    else if (key == "lattice.curvature_max") cfg.lattice.curvature_max = num();
    else if (key == "lattice.primitive_count") cfg.lattice.primitive_count = static_cast<int>(integer());
    else if (key == "lattice.position_quantum") cfg.lattice.position_quantum = num();
    else if (key == "lattice.heading_sectors") cfg.lattice.heading_sectors = static_cast<int>(integer());
    else if (key == "lattice.goal_radius") cfg.lattice.goal_radius = num();
    else if (key == "lattice.max_expansions") cfg.lattice.max_expansions = integer();
    else if (key == "lattice.cloud_density") cfg.lattice.cloud_density = num();
    else if (key == "lattice.cloud_seed") cfg.lattice.cloud_seed = static_cast<std::uint64_t>(integer());
    else if (key == "ramp.g_up") { cfg.ramp.g_up = num(); cfg.ramp_overridden = true; }
    else if (key == "ramp.g_down") { cfg.ramp.g_down = num(); cfg.ramp_overridden = true; }
    else if (key == "ramp.beta") { cfg.ramp.beta = num(); cfg.ramp_overridden = true; }
    else if (key == "train.epochs") cfg.train.epochs = static_cast<int>(integer());
    else if (key == "train.batch_size") cfg.train.batch_size = static_cast<int>(integer());
    else if (key == "train.learning_rate") cfg.train.learning_rate = num();
    else if (key == "train.rmsprop_decay") cfg.train.rmsprop_decay = num();
    else if (key == "train.rmsprop_epsilon") cfg.train.rmsprop_epsilon = num();
    else if (key == "train.seed") cfg.train.seed = static_cast<std::uint64_t>(integer());
    else if (key == "train.validation_fraction") cfg.train.validation_fraction = num();
    else if (key == "train.threads") cfg.train.threads = static_cast<int>(integer());
    else if (key == "heuristic.margin") cfg.heuristic_margin = num();
    else
      throw parse_error("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  return cfg;
}

}  // namespace terravolt
