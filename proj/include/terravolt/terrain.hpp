#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "terravolt/random.hpp"
#include "terravolt/textio.hpp"

namespace terravolt {

// Regular-grid heightfield. Row-major storage, row 0 at y = origin_y, column
// 0 at x = origin_x; cell (r, c) holds the elevation of the grid node at
// (origin_x + c * cell_size, origin_y + r * cell_size).
struct Dem {
  int n_cols = 0;
  int n_rows = 0;
  double cell_size = 0.0;  // [m]
  double origin_x = 0.0;   // [m]
  double origin_y = 0.0;   // [m]
  std::vector<double> elevations;  // [m], n_rows * n_cols

  double& at(int row, int col) { return elevations[static_cast<std::size_t>(row) * n_cols + col]; }
  double at(int row, int col) const { return elevations[static_cast<std::size_t>(row) * n_cols + col]; }

  double extent_x() const { return (n_cols - 1) * cell_size; }
  double extent_y() const { return (n_rows - 1) * cell_size; }

  bool contains(double x, double y) const {
    return x >= origin_x && y >= origin_y && x <= origin_x + extent_x() &&
           y <= origin_y + extent_y();
  }

  // Bilinear interpolation between the four surrounding grid nodes.
  // Reproduces node values exactly at node coordinates.
  double elevation_at(double x, double y) const {
    const double gx = (x - origin_x) / cell_size;
    const double gy = (y - origin_y) / cell_size;
    int c0 = static_cast<int>(std::floor(gx));
    int r0 = static_cast<int>(std::floor(gy));
    c0 = std::clamp(c0, 0, n_cols - 2);
    r0 = std::clamp(r0, 0, n_rows - 2);
    const double fx = std::clamp(gx - c0, 0.0, 1.0);
    const double fy = std::clamp(gy - r0, 0.0, 1.0);
    const double z00 = at(r0, c0), z01 = at(r0, c0 + 1);
    const double z10 = at(r0 + 1, c0), z11 = at(r0 + 1, c0 + 1);
    return z00 * (1 - fx) * (1 - fy) + z01 * fx * (1 - fy) +
           z10 * (1 - fx) * fy + z11 * fx * fy;
  }
};

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

// Unordered set of surface samples; consumers assume no structure.
struct PointCloud {
  std::vector<Point3> points;
};

struct TerrainGenConfig {
  std::uint64_t seed = 0;
  double extent_x = 20.0;            // [m]
  double extent_y = 20.0;            // [m]
  double cell_size = 0.05;           // [m]
  double roughness_amplitude = 0.0;  // [m] RMS target
  double correlation_length = 0.5;   // [m]
  double bump_density = 0.0;         // [bumps/m^2]
  double bump_radius = 0.3;          // [m]
  double bump_height = 0.08;         // [m]
  double pitch_deg = 0.0;
  double roll_deg = 0.0;
};

namespace detail {

inline void validate_extents(const TerrainGenConfig& cfg) {
  if (!(cfg.extent_x > 0.0) || !(cfg.extent_y > 0.0))
    throw std::invalid_argument("terrain extents must be positive");
  if (!(cfg.cell_size > 0.0))
    throw std::invalid_argument("cell_size must be positive");
}

inline Dem empty_grid(const TerrainGenConfig& cfg) {
  validate_extents(cfg);
  Dem dem;
  dem.cell_size = cfg.cell_size;
  dem.n_cols = static_cast<int>(std::llround(cfg.extent_x / cfg.cell_size)) + 1;
  dem.n_rows = static_cast<int>(std::llround(cfg.extent_y / cfg.cell_size)) + 1;
  dem.elevations.assign(static_cast<std::size_t>(dem.n_cols) * dem.n_rows, 0.0);
  return dem;
}

}  // namespace detail

// Planar ramp: z(x, y) = x * tan(pitch) + y * tan(roll), measured from the
// grid origin.
inline Dem make_ramp(double pitch_deg, double roll_deg, const TerrainGenConfig& cfg) {
  if (!std::isfinite(pitch_deg) || !std::isfinite(roll_deg))
    throw std::invalid_argument("ramp angles must be finite");
  if (std::abs(pitch_deg) >= 90.0 || std::abs(roll_deg) >= 90.0)
    throw std::invalid_argument("ramp angles must satisfy |angle| < 90 deg");
  Dem dem = detail::empty_grid(cfg);
  const double deg = 0.017453292519943295;
  const double tp = std::tan(pitch_deg * deg);
  const double tr = std::tan(roll_deg * deg);
  for (int r = 0; r < dem.n_rows; ++r)
    for (int c = 0; c < dem.n_cols; ++c)
      dem.at(r, c) = c * dem.cell_size * tp + r * dem.cell_size * tr;
  return dem;
}

// Smoothed random heightfield: grid white noise convolved with a Gaussian
// kernel of width correlation_length, then recentred and rescaled so the RMS
// elevation equals roughness_amplitude. Pure function of (cfg, cfg.seed).
inline Dem make_rough(const TerrainGenConfig& cfg) {
  if (!(cfg.roughness_amplitude >= 0.0))
    throw std::invalid_argument("roughness_amplitude must be >= 0");
  if (!(cfg.correlation_length > 0.0))
    throw std::invalid_argument("correlation_length must be positive");
  Dem dem = detail::empty_grid(cfg);
  if (cfg.roughness_amplitude == 0.0) return dem;

  Rng rng(cfg.seed);
  std::vector<double> noise(dem.elevations.size());
  for (auto& v : noise) v = rng.normal();

  // Separable Gaussian blur, sigma in cells; kernel truncated at 3 sigma.
  const double sigma = cfg.correlation_length / cfg.cell_size;
  const int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * half + 1);
  double ksum = 0.0;
  for (int i = -half; i <= half; ++i) {
    kernel[i + half] = std::exp(-0.5 * (i / sigma) * (i / sigma));
    ksum += kernel[i + half];
  }
  for (auto& k : kernel) k /= ksum;

  std::vector<double> tmp(noise.size());
  for (int r = 0; r < dem.n_rows; ++r) {
    for (int c = 0; c < dem.n_cols; ++c) {
      double acc = 0.0;
      for (int i = -half; i <= half; ++i) {
        const int cc = std::clamp(c + i, 0, dem.n_cols - 1);
        acc += kernel[i + half] * noise[static_cast<std::size_t>(r) * dem.n_cols + cc];
      }
      tmp[static_cast<std::size_t>(r) * dem.n_cols + c] = acc;
    }
  }
  for (int r = 0; r < dem.n_rows; ++r) {
    for (int c = 0; c < dem.n_cols; ++c) {
      double acc = 0.0;
      for (int i = -half; i <= half; ++i) {
        const int rr = std::clamp(r + i, 0, dem.n_rows - 1);
        acc += kernel[i + half] * tmp[static_cast<std::size_t>(rr) * dem.n_cols + c];
      }
      dem.at(r, c) = acc;
    }
  }

  double mean = 0.0;
  for (double v : dem.elevations) mean += v;
  mean /= static_cast<double>(dem.elevations.size());
  double ms = 0.0;
  for (double v : dem.elevations) ms += (v - mean) * (v - mean);
  ms /= static_cast<double>(dem.elevations.size());
  const double scale = cfg.roughness_amplitude / std::sqrt(std::max(ms, 1e-300));
  for (auto& v : dem.elevations) v = (v - mean) * scale;
  return dem;
}

// Raises hemispherical caps centred at the given positions; overlapping
// caps resolve by pointwise maximum of the added contribution.
inline Dem add_bumps_at(const Dem& input, const std::vector<std::pair<double, double>>& centers,
                        double radius, double height) {
  if (!(radius > 0.0)) throw std::invalid_argument("bump_radius must be positive");
  Dem dem = input;
  std::vector<double> add(dem.elevations.size(), 0.0);
  for (const auto& [bx, by] : centers) {
    const int c_lo = std::max(0, static_cast<int>(std::floor((bx - radius - dem.origin_x) / dem.cell_size)));
    const int c_hi = std::min(dem.n_cols - 1, static_cast<int>(std::ceil((bx + radius - dem.origin_x) / dem.cell_size)));
    const int r_lo = std::max(0, static_cast<int>(std::floor((by - radius - dem.origin_y) / dem.cell_size)));
    const int r_hi = std::min(dem.n_rows - 1, static_cast<int>(std::ceil((by + radius - dem.origin_y) / dem.cell_size)));
    for (int r = r_lo; r <= r_hi; ++r) {
      for (int c = c_lo; c <= c_hi; ++c) {
        const double dx = dem.origin_x + c * dem.cell_size - bx;
        const double dy = dem.origin_y + r * dem.cell_size - by;
        const double d2 = (dx * dx + dy * dy) / (radius * radius);
        if (d2 >= 1.0) continue;
        const double cap = height * std::sqrt(1.0 - d2);
        auto& cell = add[static_cast<std::size_t>(r) * dem.n_cols + c];
        cell = std::max(cell, cap);
      }
    }
  }
  for (std::size_t i = 0; i < add.size(); ++i) dem.elevations[i] += add[i];
  return dem;
}

// Scatters round(bump_density * area) caps with seeded uniform placement.
// Centres snap to grid nodes so a bump's centre cell rises by exactly
// bump_height.
inline Dem add_bumps(const Dem& input, const TerrainGenConfig& cfg) {
  if (!(cfg.bump_density >= 0.0))
    throw std::invalid_argument("bump_density must be >= 0");
  if (cfg.bump_density == 0.0) return input;
  if (!(cfg.bump_radius > 0.0))
    throw std::invalid_argument("bump_radius must be positive when bumps are requested");

  const Dem& dem = input;
  const double area = dem.extent_x() * dem.extent_y();
  const std::size_t count = static_cast<std::size_t>(std::llround(cfg.bump_density * area));
  Rng rng(cfg.seed ^ 0xb1c2d3e4f5a61728ULL);
  std::vector<std::pair<double, double>> centers;
  centers.reserve(count);
  for (std::size_t b = 0; b < count; ++b) {
    const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(dem.n_cols)));
    const int r = static_cast<int>(rng.below(static_cast<std::uint64_t>(dem.n_rows)));
    centers.emplace_back(dem.origin_x + c * dem.cell_size, dem.origin_y + r * dem.cell_size);
  }
  return add_bumps_at(input, centers, cfg.bump_radius, cfg.bump_height);
}

// Uniform (x, y) scatter over the DEM extent with z sampled bilinearly.
// Count = round(density * area), deterministic in seed.
inline PointCloud sample_point_cloud(const Dem& dem, double density, std::uint64_t seed) {
  if (!(density > 0.0)) throw std::invalid_argument("point density must be positive");
  if (dem.n_cols < 2 || dem.n_rows < 2 || dem.elevations.empty())
    throw std::invalid_argument("cannot sample an empty DEM");
  const double area = dem.extent_x() * dem.extent_y();
  const std::size_t count = static_cast<std::size_t>(std::llround(density * area));
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.resize(count);
  for (auto& p : cloud.points) {
    p.x = dem.origin_x + rng.uniform() * dem.extent_x();
    p.y = dem.origin_y + rng.uniform() * dem.extent_y();
    p.z = dem.elevation_at(p.x, p.y);
  }
  return cloud;
}

// DEM text format: header lines `ncols`, `nrows`, `cellsize`, `xll`, `yll`,
// then nrows lines of ncols space-separated elevations.
inline void save_dem(const Dem& dem, const std::string& path) {
  auto f = open_output(path);
  f << "ncols " << dem.n_cols << "\n";
  f << "nrows " << dem.n_rows << "\n";
  f << "cellsize " << format_double(dem.cell_size) << "\n";
  f << "xll " << format_double(dem.origin_x) << "\n";
  f << "yll " << format_double(dem.origin_y) << "\n";
  for (int r = 0; r < dem.n_rows; ++r) {
    for (int c = 0; c < dem.n_cols; ++c) {
      if (c) f << ' ';
      f << format_double(dem.at(r, c));
    }
    f << "\n";
  }
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

inline Dem load_dem(const std::string& path) {
  auto f = open_input(path);
  Dem dem;
  std::string line;
  int line_no = 0;
  auto next_line = [&]() {
    if (!std::getline(f, line))
      throw parse_error("line " + std::to_string(line_no + 1) + ": unexpected end of file");
    ++line_no;
  };
  const char* keys[5] = {"ncols", "nrows", "cellsize", "xll", "yll"};
  double vals[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < 5; ++i) {
    next_line();
    auto toks = split_ws(line);
    if (toks.size() != 2 || toks[0] != keys[i])
      throw parse_error("line " + std::to_string(line_no) + ": expected '" +
                        keys[i] + " <value>'");
    vals[i] = (i < 2) ? static_cast<double>(parse_long(toks[1], line_no))
                      : parse_double(toks[1], line_no);
  }
  dem.n_cols = static_cast<int>(vals[0]);
  dem.n_rows = static_cast<int>(vals[1]);
  dem.cell_size = vals[2];
  dem.origin_x = vals[3];
  dem.origin_y = vals[4];
  if (dem.n_cols < 1 || dem.n_rows < 1)
    throw parse_error("header declares a non-positive grid size");
  if (!(dem.cell_size > 0.0)) throw parse_error("cellsize must be positive");
  dem.elevations.reserve(static_cast<std::size_t>(dem.n_cols) * dem.n_rows);
  for (int r = 0; r < dem.n_rows; ++r) {
    next_line();
    auto toks = split_ws(line);
    if (toks.size() != static_cast<std::size_t>(dem.n_cols))
      throw parse_error("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(dem.n_cols) + " values, got " +
                        std::to_string(toks.size()));
    for (const auto& t : toks) {
      const double z = parse_double(t, line_no);
      if (!std::isfinite(z))
        throw parse_error("line " + std::to_string(line_no) + ": non-finite elevation");
      dem.elevations.push_back(z);
    }
  }
  return dem;
}

}  // namespace terravolt
