#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "terravolt/terrain.hpp"
#include "terravolt/trajectory.hpp"

namespace terravolt {

inline constexpr double kGravity = 9.81;  // [m/s^2]

struct MotorParams {
  double eta_drive = 0.83;  // efficiency when omega and tau share a sign
  double eta_regen = 3.33;  // divisor when they oppose (taken as given)
  double armature_resistance = 0.5;   // R_a [ohm]
  double torque_constant = 0.05;      // K_T [N*m/A]
  double gear_ratio = 62.0;           // g_r
  double dt = 1e-3;                   // sample interval [s]
};

struct RoverParams {
  double mass = 50.0;                // [kg]
  double wheel_radius = 0.1;         // [m]
  double wheel_track = 1.0;          // [m]
  double rolling_resistance = 0.05;  // C_rr
  double speed = 0.2;                // [m/s], constant during traverses
  double load_shift_gain = 0.5;      // fraction of load moved per unit tan(slope)
  MotorParams motors;
};

struct MotorSample {
  double omega = 0.0;  // [rad/s]
  double tau = 0.0;    // [N*m]
};

// Per-motor (speed, torque) samples at uniform dt. Wheel order:
// front-left, front-right, rear-left, rear-right.
struct MotorTrace {
  std::vector<std::array<MotorSample, 4>> samples;
  double dt = 1e-3;
};

// Consumption / recovery pair; recovery is stored as a magnitude so that
// net energy is literally e_c - e_r.
struct EnergyLabel {
  double e_c = 0.0;  // [J], >= 0
  double e_r = 0.0;  // [J], >= 0
  double net() const { return e_c - e_r; }
};

// Electrical power drawn by one motor. Mechanical term omega*tau/eta plus
// the resistive armature loss (tau / (K_T * g_r * eta))^2 * R_a, which is
// always >= 0. eta switches between drive and regen values on the sign of
// omega*tau.
inline double motor_power(double omega, double tau, const MotorParams& p) {
  const double eta = (omega * tau >= 0.0) ? p.eta_drive : p.eta_regen;
  const double current = tau / (p.torque_constant * p.gear_ratio * eta);
  return omega * tau / eta + current * current * p.armature_resistance;
}

// Splits the power integral of a trace into consumption (P >= 0) and
// recovery (P < 0, reported as a magnitude). By construction
// e_c - e_r == sum(P * dt) over all samples.
inline EnergyLabel energy_from_trace(const MotorTrace& trace, const MotorParams& p) {
  if (trace.samples.empty()) throw std::invalid_argument("empty motor trace");
  EnergyLabel label;
  for (const auto& step : trace.samples) {
    for (const auto& m : step) {
      const double power = motor_power(m.omega, m.tau, p);
      if (power >= 0.0)
        label.e_c += power * trace.dt;
      else
        label.e_r -= power * trace.dt;
    }
  }
  return label;
}

namespace detail {

// Wheel centre position when the rover's reference point is at arc length s.
// lateral is left-positive.
inline void wheel_position(const TrajectoryArc& arc, double s, double lateral,
                           double& x, double& y) {
  arc_unproject(arc, s, lateral, x, y);
}

}  // namespace detail

// Quasi-static traverse: the rover advances along the arc at constant speed;
// each wheel follows the elevation profile of its band at +-wheel_track/2.
// Wheel torque comes from the local slope and rolling resistance under a
// static load distribution shifted by tan(pitch) / tan(roll); wheel speeds
// differ across the track on curved arcs. No inertial or controller
// transients are modelled.
inline MotorTrace simulate_trace(const Dem& dem, const TrajectoryArc& arc,
                                 const RoverParams& rover) {
  validate_arc(arc, 1e9);
  const MotorParams& mp = rover.motors;
  const double ds = rover.speed * mp.dt;
  const long n_steps = std::max<long>(1, std::lround(arc.length / rover.speed / mp.dt));
  const double half_track = rover.wheel_track / 2.0;

  // lateral offsets, left-positive: left wheels +, right wheels -
  const double lat_left = half_track;
  const double lat_right = -half_track;

  MotorTrace trace;
  trace.dt = mp.dt;
  trace.samples.resize(static_cast<std::size_t>(n_steps));

  auto band_z = [&](double s, double lateral) {
    double x, y;
    detail::wheel_position(arc, s, lateral, x, y);
    if (!dem.contains(x, y)) throw std::domain_error("traverse out of bounds");
    return dem.elevation_at(x, y);
  };

  // Along-path distance increments differ per band on curved arcs.
  const double ds_left = ds * (1.0 - arc.curvature * lat_left);
  const double ds_right = ds * (1.0 - arc.curvature * lat_right);
  const double omega_left = rover.speed * (1.0 - arc.curvature * lat_left) / rover.wheel_radius;
  const double omega_right = rover.speed * (1.0 - arc.curvature * lat_right) / rover.wheel_radius;

  double z_left_prev = band_z(0.0, lat_left);
  double z_right_prev = band_z(0.0, lat_right);

  const double n_base = rover.mass * kGravity / 4.0;

  for (long j = 0; j < n_steps; ++j) {
    const double s_next = (j + 1) * ds;
    const double z_left = band_z(s_next, lat_left);
    const double z_right = band_z(s_next, lat_right);

    const double alpha_left = std::atan2(z_left - z_left_prev, ds_left);
    const double alpha_right = std::atan2(z_right - z_right_prev, ds_right);

    const double pitch = 0.5 * (alpha_left + alpha_right);
    const double z_mid_left = 0.5 * (z_left + z_left_prev);
    const double z_mid_right = 0.5 * (z_right + z_right_prev);
    const double roll = std::atan2(z_mid_left - z_mid_right, rover.wheel_track);

    // Static load distribution: uphill pitch shifts weight to the rear pair,
    // positive roll (left side high) shifts it to the right pair.
    const double shift_long = rover.load_shift_gain * std::tan(pitch);
    const double shift_lat = rover.load_shift_gain * std::tan(roll);
    const double n_front = std::max(0.0, n_base * (1.0 - shift_long));
    const double n_rear = std::max(0.0, n_base * (1.0 + shift_long));
    const double f_left = std::max(0.0, 1.0 - shift_lat);
    const double f_right = std::max(0.0, 1.0 + shift_lat);

    auto wheel = [&](double n_axle, double f_side, double alpha, double omega) {
      const double normal = n_axle * f_side;
      const double tau = rover.wheel_radius * normal *
                         (std::sin(alpha) + rover.rolling_resistance * std::cos(alpha));
      return MotorSample{omega, tau};
    };

    auto& step = trace.samples[static_cast<std::size_t>(j)];
    step[0] = wheel(n_front, f_left, alpha_left, omega_left);
    step[1] = wheel(n_front, f_right, alpha_right, omega_right);
    step[2] = wheel(n_rear, f_left, alpha_left, omega_left);
    step[3] = wheel(n_rear, f_right, alpha_right, omega_right);

    z_left_prev = z_left;
    z_right_prev = z_right;
  }
  return trace;
}

inline std::pair<MotorTrace, EnergyLabel> simulate_traverse(
    const Dem& dem, const TrajectoryArc& arc, const RoverParams& rover) {
  MotorTrace trace = simulate_trace(dem, arc, rover);
  EnergyLabel label = energy_from_trace(trace, rover.motors);
  return {std::move(trace), label};
}

inline EnergyLabel traverse_energy(const Dem& dem, const TrajectoryArc& arc,
                                   const RoverParams& rover) {
  return energy_from_trace(simulate_trace(dem, arc, rover), rover.motors);
}

inline TrajectoryArc reverse_arc(const TrajectoryArc& arc) {
  TrajectoryArc rev;
  const Pose2D end = arc_end(arc);
  rev.start = {end.x, end.y, wrap_angle(end.heading + kPi)};
  rev.curvature = -arc.curvature;
  rev.length = arc.length;
  return rev;
}

// Net energy of driving the arc and then driving back. Positive for every
// traversable arc (drive losses always exceed regenerated energy), which is
// what rules out negative cycles in the planner graph.
inline double net_round_trip(const Dem& dem, const TrajectoryArc& arc,
                             const RoverParams& rover) {
  const EnergyLabel fwd = traverse_energy(dem, arc, rover);
  const EnergyLabel back = traverse_energy(dem, reverse_arc(arc), rover);
  return fwd.net() + back.net();
}

}  // namespace terravolt
