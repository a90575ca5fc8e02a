#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "terravolt/terrain.hpp"
#include "terravolt/trajectory.hpp"

namespace terravolt {

// Fixed geometry of the elevation window handed to the estimators: 32 rows
// of 6.25 cm along the trajectory (2.0 m window), 16 columns across the
// 1.0 m wheel track of which the central 8 are discarded, keeping the two
// 25 cm lateral bands under the wheels.
inline constexpr int kPatchRows = 32;
inline constexpr int kPatchCols = 8;
inline constexpr int kFullGridCols = 16;
inline constexpr int kBandCols = 4;
inline constexpr double kCellSpacing = 0.0625;  // [m]
inline constexpr double kSwathLength = kPatchRows * kCellSpacing;  // 2.0 m
inline constexpr double kSwathWidth = kFullGridCols * kCellSpacing;  // 1.0 m

// Relative-elevation matrix fed to the estimators. Column 0..3 is the left
// band (leftmost first), 4..7 the right band; row 0 is at the start of the
// swath and its mean is zero by convention.
struct TerrainPatch {
  std::array<double, kPatchRows * kPatchCols> values{};
  double row_spacing = kCellSpacing;
  int band_width_cells = kBandCols;

  double& at(int row, int col) { return values[static_cast<std::size_t>(row) * kPatchCols + col]; }
  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * kPatchCols + col]; }
};

// Raw 32x16 voxel grid before band trimming, absolute elevations.
struct FullGrid {
  std::array<double, kPatchRows * kFullGridCols> values{};

  double& at(int row, int col) { return values[static_cast<std::size_t>(row) * kFullGridCols + col]; }
  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * kFullGridCols + col]; }
};

struct SafetyThresholds {
  double pitch_max_deg = 20.0;
  double roll_max_deg = 15.0;
  double residual_max = 0.10;  // [m]
};

enum class SafetyFailure {
  none,
  pitch,
  roll,
  residual,
  insufficient_data,
  empty_column,
};

inline const char* to_string(SafetyFailure f) {
  switch (f) {
    case SafetyFailure::none: return "none";
    case SafetyFailure::pitch: return "pitch";
    case SafetyFailure::roll: return "roll";
    case SafetyFailure::residual: return "residual";
    case SafetyFailure::insufficient_data: return "insufficient data";
    case SafetyFailure::empty_column: return "empty column";
  }
  return "?";
}

struct SafetyReport {
  double pitch_deg = 0.0;
  double roll_deg = 0.0;
  double residual = 0.0;  // [m], max |deviation| from the fitted plane
  bool traversable = false;
  SafetyFailure failure = SafetyFailure::none;
};

// Points whose perpendicular distance to the arc centerline is at most
// width/2 and whose arc-length projection lies in [0, kSwathLength].
inline PointCloud swath_extract(const PointCloud& cloud, const TrajectoryArc& arc,
                                double swath_width = kSwathWidth) {
  if (!(swath_width > 0.0)) throw std::invalid_argument("swath width must be positive");
  const double half = swath_width / 2.0;
  PointCloud out;
  for (const auto& p : cloud.points) {
    const ArcCoords c = arc_project(arc, p.x, p.y);
    if (c.s >= 0.0 && c.s <= kSwathLength && std::abs(c.lateral) <= half)
      out.points.push_back(p);
  }
  return out;
}

// Least-squares plane fit z = a*s + b*l + c over the swath points expressed
// in the arc frame. pitch is the slope along the path, roll across it,
// residual the maximum absolute deviation from the plane.
inline SafetyReport safety_check(const PointCloud& swath_points, const TrajectoryArc& arc,
                                 const SafetyThresholds& thresholds) {
  SafetyReport report;
  const std::size_t n = swath_points.points.size();
  if (n < 3) {
    report.failure = SafetyFailure::insufficient_data;
    return report;
  }

  // Accumulate normal equations for [s, l, 1].
  double sss = 0, ssl = 0, ss1 = 0, sll = 0, sl1 = 0, s11 = 0;
  double rs = 0, rl = 0, r1 = 0;
  std::vector<ArcCoords> coords(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = swath_points.points[i];
    coords[i] = arc_project(arc, p.x, p.y);
    const double s = coords[i].s, l = coords[i].lateral, z = p.z;
    sss += s * s; ssl += s * l; ss1 += s;
    sll += l * l; sl1 += l; s11 += 1.0;
    rs += s * z; rl += l * z; r1 += z;
  }
  double m[3][4] = {{sss, ssl, ss1, rs}, {ssl, sll, sl1, rl}, {ss1, sl1, s11, r1}};

  // Gaussian elimination with partial pivoting; a vanishing pivot means the
  // points are collinear (or otherwise degenerate).
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (std::abs(m[piv][col]) < 1e-12) {
      report.failure = SafetyFailure::insufficient_data;
      return report;
    }
    std::swap(m[col], m[piv]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int k = col; k < 4; ++k) m[r][k] -= f * m[col][k];
    }
  }
  const double a = m[0][3] / m[0][0];
  const double b = m[1][3] / m[1][1];
  const double c = m[2][3] / m[2][2];

  double residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z_fit = a * coords[i].s + b * coords[i].lateral + c;
    residual = std::max(residual, std::abs(swath_points.points[i].z - z_fit));
  }

  const double rad2deg = 57.29577951308232;
  report.pitch_deg = std::atan(a) * rad2deg;
  report.roll_deg = std::atan(b) * rad2deg;
  report.residual = residual;
  if (std::abs(report.pitch_deg) > thresholds.pitch_max_deg)
    report.failure = SafetyFailure::pitch;
  else if (std::abs(report.roll_deg) > thresholds.roll_max_deg)
    report.failure = SafetyFailure::roll;
  else if (report.residual > thresholds.residual_max)
    report.failure = SafetyFailure::residual;
  report.traversable = report.failure == SafetyFailure::none;
  return report;
}

// Voxel downsampling: rows bin the arc-length coordinate, columns the
// lateral coordinate (column 0 leftmost). Each cell takes the mean z of its
// points; empty cells are filled by linear interpolation along the column
// and end gaps extend the nearest filled value. Returns false when a column
// has no filled cell at all.
inline bool rasterize(const PointCloud& swath_points, const TrajectoryArc& arc,
                      FullGrid& grid) {
  std::array<double, kPatchRows * kFullGridCols> sums{};
  std::array<int, kPatchRows * kFullGridCols> counts{};
  const double half = kSwathWidth / 2.0;

  for (const auto& p : swath_points.points) {
    const ArcCoords c = arc_project(arc, p.x, p.y);
    if (c.s < 0.0 || c.s > kSwathLength || std::abs(c.lateral) > half) continue;
    int row = std::min(kPatchRows - 1, static_cast<int>(c.s / kCellSpacing));
    int col = std::min(kFullGridCols - 1, static_cast<int>((half - c.lateral) / kCellSpacing));
    sums[static_cast<std::size_t>(row) * kFullGridCols + col] += p.z;
    counts[static_cast<std::size_t>(row) * kFullGridCols + col] += 1;
  }

  for (int col = 0; col < kFullGridCols; ++col) {
    int prev_filled = -1;
    bool any = false;
    for (int row = 0; row < kPatchRows; ++row) {
      const std::size_t idx = static_cast<std::size_t>(row) * kFullGridCols + col;
      if (counts[idx] == 0) continue;
      any = true;
      grid.values[idx] = sums[idx] / counts[idx];
      if (prev_filled < 0) {
        // leading gap: extend the first filled value backwards
        for (int r = 0; r < row; ++r)
          grid.at(r, col) = grid.values[idx];
      } else if (prev_filled < row - 1) {
        const double z0 = grid.at(prev_filled, col);
        const double z1 = grid.values[idx];
        for (int r = prev_filled + 1; r < row; ++r) {
          const double t = static_cast<double>(r - prev_filled) / (row - prev_filled);
          grid.at(r, col) = z0 + t * (z1 - z0);
        }
      }
      prev_filled = row;
    }
    if (!any) return false;
    for (int r = prev_filled + 1; r < kPatchRows; ++r)
      grid.at(r, col) = grid.at(prev_filled, col);
  }
  return true;
}

// Drops the 8 central columns and rebases elevations so the mean of row 0
// is zero.
inline TerrainPatch trim_and_normalize(const FullGrid& grid) {
  TerrainPatch patch;
  for (int row = 0; row < kPatchRows; ++row) {
    for (int col = 0; col < kBandCols; ++col) {
      patch.at(row, col) = grid.at(row, col);
      patch.at(row, col + kBandCols) = grid.at(row, kFullGridCols - kBandCols + col);
    }
  }
  double row0_mean = 0.0;
  for (int col = 0; col < kPatchCols; ++col) row0_mean += patch.at(0, col);
  row0_mean /= kPatchCols;
  for (auto& v : patch.values) v -= row0_mean;
  return patch;
}

struct PreprocessResult {
  std::optional<TerrainPatch> patch;
  SafetyReport safety;

  bool traversable() const { return patch.has_value(); }
};

// Full pipeline: extract the swath, run the safety check, downsample and
// trim. The safety check short-circuits before rasterization.
inline PreprocessResult preprocess(const PointCloud& cloud, const TrajectoryArc& arc,
                                   const SafetyThresholds& thresholds,
                                   double swath_width = kSwathWidth) {
  PreprocessResult result;
  const PointCloud pts = swath_extract(cloud, arc, swath_width);
  result.safety = safety_check(pts, arc, thresholds);
  if (!result.safety.traversable) return result;
  FullGrid grid;
  if (!rasterize(pts, arc, grid)) {
    result.safety.traversable = false;
    result.safety.failure = SafetyFailure::empty_column;
    return result;
  }
  result.patch = trim_and_normalize(grid);
  return result;
}

// Uniform-bucket spatial index over a point cloud, so that per-edge swath
// queries touch only nearby points instead of the whole cloud. Queries
// return points in their original cloud order, which keeps downstream
// floating-point accumulation identical to the unindexed path.
class PointIndex {
 public:
  explicit PointIndex(const PointCloud& cloud, double bucket = 0.5)
      : cloud_(&cloud), bucket_(bucket) {
    if (cloud.points.empty()) return;
    min_x_ = cloud.points[0].x;
    min_y_ = cloud.points[0].y;
    double max_x = min_x_, max_y = min_y_;
    for (const auto& p : cloud.points) {
      min_x_ = std::min(min_x_, p.x);
      min_y_ = std::min(min_y_, p.y);
      max_x = std::max(max_x, p.x);
      max_y = std::max(max_y, p.y);
    }
    nx_ = static_cast<int>((max_x - min_x_) / bucket_) + 1;
    ny_ = static_cast<int>((max_y - min_y_) / bucket_) + 1;
    buckets_.resize(static_cast<std::size_t>(nx_) * ny_);
    for (std::size_t i = 0; i < cloud.points.size(); ++i)
      buckets_[bucket_of(cloud.points[i].x, cloud.points[i].y)].push_back(i);
  }

  // Points of all buckets overlapping the axis-aligned box, in cloud order.
  std::vector<std::size_t> query_box(double x0, double y0, double x1, double y1) const {
    std::vector<std::size_t> out;
    if (buckets_.empty()) return out;
    const int cx0 = std::clamp(static_cast<int>((x0 - min_x_) / bucket_), 0, nx_ - 1);
    const int cx1 = std::clamp(static_cast<int>((x1 - min_x_) / bucket_), 0, nx_ - 1);
    const int cy0 = std::clamp(static_cast<int>((y0 - min_y_) / bucket_), 0, ny_ - 1);
    const int cy1 = std::clamp(static_cast<int>((y1 - min_y_) / bucket_), 0, ny_ - 1);
    for (int cy = cy0; cy <= cy1; ++cy)
      for (int cx = cx0; cx <= cx1; ++cx) {
        const auto& b = buckets_[static_cast<std::size_t>(cy) * nx_ + cx];
        out.insert(out.end(), b.begin(), b.end());
      }
    std::sort(out.begin(), out.end());
    return out;
  }

  // Candidate subset of the cloud covering the swath of an arc. The margin
  // covers the sagitta of the centerline between probe points so no true
  // swath member can fall outside the box.
  PointCloud swath_candidates(const TrajectoryArc& arc, double swath_width = kSwathWidth) const {
    const double margin = swath_width / 2.0 + 0.01;
    double x0 = arc.start.x, x1 = arc.start.x, y0 = arc.start.y, y1 = arc.start.y;
    const int probes = 16;
    for (int i = 0; i <= probes; ++i) {
      const Pose2D p = pose_along(arc, kSwathLength * i / probes);
      x0 = std::min(x0, p.x); x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y); y1 = std::max(y1, p.y);
    }
    PointCloud out;
    for (std::size_t idx : query_box(x0 - margin, y0 - margin, x1 + margin, y1 + margin))
      out.points.push_back(cloud_->points[idx]);
    return out;
  }

  const PointCloud& cloud() const { return *cloud_; }

 private:
  std::size_t bucket_of(double x, double y) const {
    const int cx = std::clamp(static_cast<int>((x - min_x_) / bucket_), 0, nx_ - 1);
    const int cy = std::clamp(static_cast<int>((y - min_y_) / bucket_), 0, ny_ - 1);
    return static_cast<std::size_t>(cy) * nx_ + cx;
  }

  const PointCloud* cloud_;
  double bucket_;
  double min_x_ = 0.0, min_y_ = 0.0;
  int nx_ = 0, ny_ = 0;
  std::vector<std::vector<std::size_t>> buckets_;
};

inline PreprocessResult preprocess(const PointIndex& index, const TrajectoryArc& arc,
                                   const SafetyThresholds& thresholds,
                                   double swath_width = kSwathWidth) {
  return preprocess(index.swath_candidates(arc, swath_width), arc, thresholds, swath_width);
}

}  // namespace terravolt
