// Independent reference implementations used as oracles by the test suites.
// Everything here is deliberately written from the operation definitions,
// not from the library code it checks.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <vector>

#include "terravolt/nn.hpp"
#include "terravolt/planner.hpp"
#include "terravolt/swath.hpp"
#include "terravolt/trajectory.hpp"

namespace oracle {

// Plain nested-loop 1D cross-correlation, channel layout [t][cin], kernel
// [cout][k][cin], left-aligned window with (k-1)/2 left zero padding in
// same mode.
inline terravolt::Tensor2 naive_conv1d(const terravolt::Tensor2& x,
                                       const std::vector<double>& w,
                                       const std::vector<double>& b, int cin, int cout, int k,
                                       bool pad_same) {
  const int pl = pad_same ? (k - 1) / 2 : 0;
  const int t_out = pad_same ? x.t : x.t - k + 1;
  terravolt::Tensor2 y;
  y.resize(t_out, cout);
  for (int t = 0; t < t_out; ++t) {
    for (int co = 0; co < cout; ++co) {
      double acc = b[static_cast<std::size_t>(co)];
      for (int j = 0; j < k; ++j) {
        const int ts = t + j - pl;
        if (ts < 0 || ts >= x.t) continue;
        for (int ci = 0; ci < cin; ++ci)
          acc += x.at(ts, ci) * w[(static_cast<std::size_t>(co) * k + j) * cin + ci];
      }
      y.at(t, co) = acc;
    }
  }
  return y;
}

inline terravolt::Tensor2 naive_maxpool(const terravolt::Tensor2& x) {
  terravolt::Tensor2 y;
  y.resize(x.t / 2, x.channels);
  for (int t = 0; t < y.t; ++t)
    for (int c = 0; c < x.channels; ++c)
      y.at(t, c) = std::max(x.at(2 * t, c), x.at(2 * t + 1, c));
  return y;
}

// Brute-force voxel grid: per cell mean in point order, column-wise linear
// interpolation of interior gaps, nearest-value extension of end gaps.
// Returns nullopt when some column has no filled cell.
inline std::optional<terravolt::FullGrid> naive_rasterize(const terravolt::PointCloud& cloud,
                                                          const terravolt::TrajectoryArc& arc) {
  using namespace terravolt;
  std::vector<std::vector<double>> cell_values(kPatchRows * kFullGridCols);
  for (const auto& p : cloud.points) {
    const ArcCoords c = arc_project(arc, p.x, p.y);
    if (c.s < 0.0 || c.s > kSwathLength || std::abs(c.lateral) > kSwathWidth / 2.0) continue;
    const int row = std::min(kPatchRows - 1, static_cast<int>(c.s / kCellSpacing));
    const int col = std::min(kFullGridCols - 1,
                             static_cast<int>((kSwathWidth / 2.0 - c.lateral) / kCellSpacing));
    cell_values[static_cast<std::size_t>(row) * kFullGridCols + col].push_back(p.z);
  }
  FullGrid grid;
  for (int col = 0; col < kFullGridCols; ++col) {
    std::vector<int> filled;
    for (int row = 0; row < kPatchRows; ++row) {
      const auto& vals = cell_values[static_cast<std::size_t>(row) * kFullGridCols + col];
      if (vals.empty()) continue;
      double sum = 0.0;
      for (double v : vals) sum += v;
      grid.at(row, col) = sum / static_cast<double>(vals.size());
      filled.push_back(row);
    }
    if (filled.empty()) return std::nullopt;
    for (int row = 0; row < kPatchRows; ++row) {
      if (!cell_values[static_cast<std::size_t>(row) * kFullGridCols + col].empty()) continue;
      // nearest filled rows on each side
      int below = -1, above = -1;
      for (int r : filled) {
        if (r < row) below = r;
        if (r > row) {
          above = r;
          break;
        }
      }
      if (below < 0)
        grid.at(row, col) = grid.at(above, col);
      else if (above < 0)
        grid.at(row, col) = grid.at(below, col);
      else {
        const double t = static_cast<double>(row - below) / (above - below);
        grid.at(row, col) = grid.at(below, col) + t * (grid.at(above, col) - grid.at(below, col));
      }
    }
  }
  return grid;
}

// Staged patch oracle: brute rasterize, trim bands by index, subtract row-0
// mean.
inline std::optional<terravolt::TerrainPatch> naive_patch(const terravolt::PointCloud& swath,
                                                          const terravolt::TrajectoryArc& arc) {
  using namespace terravolt;
  const auto grid = naive_rasterize(swath, arc);
  if (!grid) return std::nullopt;
  TerrainPatch patch;
  for (int row = 0; row < kPatchRows; ++row) {
    for (int c = 0; c < kBandCols; ++c) {
      patch.at(row, c) = grid->at(row, c);
      patch.at(row, c + kBandCols) = grid->at(row, 12 + c);
    }
  }
  double mean0 = 0.0;
  for (int c = 0; c < kPatchCols; ++c) mean0 += patch.at(0, c);
  mean0 /= kPatchCols;
  for (auto& v : patch.values) v -= mean0;
  return patch;
}

// Independent uniform-cost search over the same lattice, with reopening.
// Uses its own quantization and queue code so it can serve as the search
// oracle; ties break FIFO like the planner.
inline std::optional<double> uniform_cost_search(const terravolt::Pose2D& start,
                                                 const terravolt::Pose2D& goal,
                                                 const terravolt::EdgeEvaluator& edge_cost,
                                                 const terravolt::LatticeConfig& cfg) {
  using namespace terravolt;
  struct Key {
    long x, y;
    int sector;
    bool operator<(const Key& o) const {
      if (x != o.x) return x < o.x;
      if (y != o.y) return y < o.y;
      return sector < o.sector;
    }
  };
  auto key_of = [&cfg](const Pose2D& p) {
    Key k;
    k.x = std::lround(std::floor(p.x / cfg.position_quantum));
    k.y = std::lround(std::floor(p.y / cfg.position_quantum));
    const double w = 2.0 * kPi / cfg.heading_sectors;
    int s = static_cast<int>(std::floor((p.heading + kPi) / w));
    if (s >= cfg.heading_sectors) s = cfg.heading_sectors - 1;
    if (s < 0) s = 0;
    k.sector = s;
    return k;
  };

  struct Item {
    double g;
    std::uint64_t seq;
    Pose2D pose;
  };
  struct Cmp {
    bool operator()(const Item& a, const Item& b) const {
      if (a.g != b.g) return a.g > b.g;
      return a.seq > b.seq;
    }
  };
  const auto prims = primitives(cfg);
  std::priority_queue<Item, std::vector<Item>, Cmp> open;
  std::map<Key, double> best;
  std::uint64_t seq = 0;
  open.push({0.0, seq++, start});
  best[key_of(start)] = 0.0;
  long expansions = 0;
  while (!open.empty()) {
    const Item item = open.top();
    open.pop();
    auto it = best.find(key_of(item.pose));
    if (it != best.end() && item.g > it->second + 1e-12) continue;
    ++expansions;
    if (std::hypot(item.pose.x - goal.x, item.pose.y - goal.y) <= cfg.goal_radius)
      return item.g;
    if (expansions >= cfg.max_expansions) return std::nullopt;
    for (const auto& prim : prims) {
      TrajectoryArc arc = prim;
      arc.start = item.pose;
      const auto cost = edge_cost(arc);
      if (!cost) continue;
      const Pose2D next = arc_end(arc);
      const double g_next = item.g + cost->net;
      const Key k = key_of(next);
      auto found = best.find(k);
      if (found != best.end() && found->second <= g_next + 1e-12) continue;
      best[k] = g_next;
      open.push({g_next, seq++, next});
    }
  }
  return std::nullopt;
}

// Central finite differences of a scalar function of one parameter vector
// entry.
template <typename LossFn>
double central_difference(std::vector<double>& param, std::size_t index, double h,
                          const LossFn& loss) {
  const double saved = param[index];
  param[index] = saved + h;
  const double up = loss();
  param[index] = saved - h;
  const double down = loss();
  param[index] = saved;
  return (up - down) / (2.0 * h);
}

inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
