#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "terravolt/nn.hpp"
#include "terravolt/powertrain.hpp"
#include "terravolt/swath.hpp"
#include "terravolt/terrain.hpp"

namespace terravolt {

// Coefficients of the inclination-only model (G*theta + beta)*d, theta in
// degrees. The defaults are the published constants; evaluation against the
// traverse simulator uses constants re-fit with fit_ramp_model instead.
struct RampModelParams {
  double g_up = 6.13;    // [J/(m*deg)], theta >= 0
  double g_down = 1.18;  // [J/(m*deg)], theta < 0
  double beta = 1.90;    // [J/m]
};

struct EnergyEstimate {
  double e_c = 0.0;  // [J], >= 0
  double e_r = 0.0;  // [J], >= 0
  double net = 0.0;  // e_c - e_r, exactly

  static EnergyEstimate from_components(double e_c, double e_r) {
    return {e_c, e_r, e_c - e_r};
  }
};

// Segment-wise inclination model over the patch rows: per row transition the
// mean elevations give a pitch angle, each segment contributes
// (G(theta)*theta + beta) * row_spacing, and positive/negative contributions
// split into consumption/recovery. Only the rows covering the first
// arc_length of the window are integrated.
inline EnergyEstimate ramp_model_estimate(const TerrainPatch& patch, double arc_length,
                                          const RampModelParams& p) {
  if (!(arc_length > 0.0)) throw std::invalid_argument("arc_length must be positive");
  const double spacing = patch.row_spacing;
  int n_segments = static_cast<int>(std::floor(arc_length / spacing + 1e-9));
  n_segments = std::clamp(n_segments, 1, kPatchRows - 1);

  double row_mean[kPatchRows];
  for (int r = 0; r <= n_segments; ++r) {
    double m = 0.0;
    for (int c = 0; c < kPatchCols; ++c) m += patch.at(r, c);
    row_mean[r] = m / kPatchCols;
  }

  const double rad2deg = 57.29577951308232;
  double e_c = 0.0, e_r = 0.0;
  for (int i = 0; i < n_segments; ++i) {
    const double theta = std::atan((row_mean[i + 1] - row_mean[i]) / spacing) * rad2deg;
    const double gain = theta >= 0.0 ? p.g_up : p.g_down;
    const double segment = (gain * theta + p.beta) * spacing;
    if (segment >= 0.0)
      e_c += segment;
    else
      e_r -= segment;
  }
  return EnergyEstimate::from_components(e_c, e_r);
}

// Learned estimate; the linear head can predict slightly negative energies,
// which are clamped at zero.
inline EnergyEstimate conv1d_estimate(const TerrainPatch& patch, const EnergyNetWeights& w) {
  const auto [e_c, e_r] = energynet_forward(patch, w);
  return EnergyEstimate::from_components(std::max(e_c, 0.0), std::max(e_r, 0.0));
}

// Ground-truth estimate straight from the traverse simulator.
inline EnergyEstimate dynsim_estimate(const Dem& dem, const TrajectoryArc& arc,
                                      const RoverParams& rover) {
  const EnergyLabel label = traverse_energy(dem, arc, rover);
  return EnergyEstimate::from_components(label.e_c, label.e_r);
}

struct RampSample {
  double pitch_deg = 0.0;
  double distance = 0.0;  // [m]
  EnergyLabel label;
};

// Least-squares fit of (g_up, g_down, beta) to net-energy-per-meter samples
// from planar-ramp traverses. Requires pitch spread on both signs; anything
// that makes the normal equations singular (e.g. a single pitch, or no
// negative pitches) is rejected.
inline RampModelParams fit_ramp_model(const std::vector<RampSample>& samples) {
  if (samples.size() < 3) throw std::invalid_argument("degenerate ramp dataset");
  bool has_pos = false, has_neg = false;
  for (const auto& s : samples) {
    if (s.pitch_deg > 1e-9) has_pos = true;
    if (s.pitch_deg < -1e-9) has_neg = true;
  }
  if (!has_pos || !has_neg) throw std::invalid_argument("degenerate ramp dataset");

  // Normal equations for y = g_up*t+ + g_down*t- + beta, y = net/distance.
  double m[3][4] = {};
  for (const auto& s : samples) {
    if (!(s.distance > 0.0)) throw std::invalid_argument("ramp sample distance must be positive");
    const double tp = s.pitch_deg >= 0.0 ? s.pitch_deg : 0.0;
    const double tn = s.pitch_deg < 0.0 ? s.pitch_deg : 0.0;
    const double y = s.label.net() / s.distance;
    const double row[3] = {tp, tn, 1.0};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m[r][c] += row[r] * row[c];
      m[r][3] += row[r] * y;
    }
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (std::abs(m[piv][col]) < 1e-9) throw std::invalid_argument("degenerate ramp dataset");
    std::swap(m[col], m[piv]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int k = col; k < 4; ++k) m[r][k] -= f * m[col][k];
    }
  }
  RampModelParams fitted;
  fitted.g_up = m[0][3] / m[0][0];
  fitted.g_down = m[1][3] / m[1][1];
  fitted.beta = m[2][3] / m[2][2];
  return fitted;
}

struct CalibrationSample {
  double pitch_deg = 0.0;
  double net_per_meter = 0.0;  // [J/m] from the simulator
};

// Lowers the fitted model until it sits at or below every sampled
// net-energy-per-meter value minus a margin fraction of the sample scale,
// which makes the heuristic optimistic over the sampled pitch range. The
// adjustment is a uniform offset on beta: a multiplicative rescale cannot
// stay below the truth where the truth itself is negative.
inline RampModelParams calibrate_heuristic(const RampModelParams& fitted,
                                           const std::vector<CalibrationSample>& samples,
                                           double margin) {
  if (!(margin >= 0.0 && margin < 1.0)) throw std::invalid_argument("margin must be in [0,1)");
  if (samples.empty()) throw std::invalid_argument("no calibration samples");
  double scale = 0.0;
  for (const auto& s : samples) scale = std::max(scale, std::abs(s.net_per_meter));
  const double slack = margin * scale;
  double worst = 0.0;
  for (const auto& s : samples) {
    const double gain = s.pitch_deg >= 0.0 ? fitted.g_up : fitted.g_down;
    const double model = gain * s.pitch_deg + fitted.beta;
    worst = std::max(worst, model - (s.net_per_meter - slack));
  }
  RampModelParams out = fitted;
  out.beta -= worst;
  return out;
}

// Samples the simulator on planar ramps over [-pitch_range, pitch_range]
// and calibrates against those traverses.
inline RampModelParams calibrate_heuristic(const RampModelParams& fitted,
                                           const RoverParams& rover, double margin,
                                           double pitch_range_deg = 20.0, int n_samples = 81) {
  std::vector<CalibrationSample> samples;
  samples.reserve(static_cast<std::size_t>(n_samples));
  TerrainGenConfig cfg;
  cfg.extent_x = 12.0;
  cfg.extent_y = 6.0;
  for (int i = 0; i < n_samples; ++i) {
    const double pitch = -pitch_range_deg +
                         2.0 * pitch_range_deg * i / std::max(1, n_samples - 1);
    const Dem ramp = make_ramp(pitch, 0.0, cfg);
    TrajectoryArc arc;
    arc.start = {2.0, 3.0, 0.0};
    arc.curvature = 0.0;
    arc.length = 4.0;
    const EnergyLabel label = traverse_energy(ramp, arc, rover);
    samples.push_back({pitch, label.net() / arc.length});
  }
  return calibrate_heuristic(fitted, samples, margin);
}

// Generates planar-ramp traverses with the simulator and fits the model to
// them; the standard way to obtain RampModel constants valid for a given
// rover.
inline RampModelParams fit_ramp_model_to_simulator(const RoverParams& rover,
                                                   double pitch_range_deg = 18.0,
                                                   int n_samples = 37) {
  std::vector<RampSample> samples;
  samples.reserve(static_cast<std::size_t>(n_samples));
  TerrainGenConfig cfg;
  cfg.extent_x = 12.0;
  cfg.extent_y = 6.0;
  for (int i = 0; i < n_samples; ++i) {
    const double pitch = -pitch_range_deg +
                         2.0 * pitch_range_deg * i / std::max(1, n_samples - 1);
    const Dem ramp = make_ramp(pitch, 0.0, cfg);
    TrajectoryArc arc;
    arc.start = {2.0, 3.0, 0.0};
    arc.curvature = 0.0;
    arc.length = 4.0;
    samples.push_back({pitch, arc.length, traverse_energy(ramp, arc, rover)});
  }
  return fit_ramp_model(samples);
}

// Pluggable edge-cost model for the planner: every estimator maps a
// preprocessed patch plus the arc it came from to an energy estimate.
class EnergyEstimator {
 public:
  virtual ~EnergyEstimator() = default;
  virtual EnergyEstimate estimate(const TerrainPatch& patch, const TrajectoryArc& arc) const = 0;
  virtual std::string name() const = 0;
};

class RampModelEstimator final : public EnergyEstimator {
 public:
  explicit RampModelEstimator(const RampModelParams& params) : params_(params) {}
  EnergyEstimate estimate(const TerrainPatch& patch, const TrajectoryArc& arc) const override {
    return ramp_model_estimate(patch, arc.length, params_);
  }
  std::string name() const override { return "RampModel"; }
  const RampModelParams& params() const { return params_; }

 private:
  RampModelParams params_;
};

class Conv1dEstimator final : public EnergyEstimator {
 public:
  explicit Conv1dEstimator(EnergyNetWeights weights) : weights_(std::move(weights)) {}
  EnergyEstimate estimate(const TerrainPatch& patch, const TrajectoryArc&) const override {
    return conv1d_estimate(patch, weights_);
  }
  std::string name() const override { return "Conv1D"; }
  const EnergyNetWeights& weights() const { return weights_; }

 private:
  EnergyNetWeights weights_;
};

class DynSimEstimator final : public EnergyEstimator {
 public:
  DynSimEstimator(const Dem& dem, const RoverParams& rover) : dem_(&dem), rover_(rover) {}
  EnergyEstimate estimate(const TerrainPatch&, const TrajectoryArc& arc) const override {
    return dynsim_estimate(*dem_, arc, rover_);
  }
  std::string name() const override { return "DynSim"; }

 private:
  const Dem* dem_;
  RoverParams rover_;
};

}  // namespace terravolt
