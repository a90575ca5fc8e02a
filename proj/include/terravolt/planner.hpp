#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "terravolt/estimators.hpp"
#include "terravolt/swath.hpp"
#include "terravolt/terrain.hpp"
#include "terravolt/textio.hpp"
#include "terravolt/trajectory.hpp"

namespace terravolt {

struct LatticeConfig {
  double primitive_length = 1.375;  // [m]
  double curvature_min = -1.14;     // [1/m]
  double curvature_max = 1.14;      // [1/m]
  int primitive_count = 9;          // odd, so kappa = 0 is included
  double position_quantum = 0.1;    // [m], closed-set quantization
  int heading_sectors = 24;
  double goal_radius = 0.7;  // [m]
  long max_expansions = 200000;
  double cloud_density = 256.0;  // [pts/m^2] for the perception cloud
  std::uint64_t cloud_seed = 9001;
};

// The elementary trajectories: constant-curvature arcs of fixed length with
// curvature uniformly spaced over [curvature_min, curvature_max], anchored
// at the identity pose.
inline std::vector<TrajectoryArc> primitives(const LatticeConfig& cfg) {
  if (cfg.primitive_count < 1 || cfg.primitive_count % 2 == 0)
    throw std::invalid_argument("primitive_count must be odd and positive");
  if (!(cfg.primitive_length > 0.0))
    throw std::invalid_argument("primitive_length must be positive");
  std::vector<TrajectoryArc> out;
  out.reserve(static_cast<std::size_t>(cfg.primitive_count));
  const int last = cfg.primitive_count - 1;
  for (int i = 0; i < cfg.primitive_count; ++i) {
    TrajectoryArc arc;
    arc.length = cfg.primitive_length;
    arc.curvature = cfg.curvature_min +
                    (cfg.curvature_max - cfg.curvature_min) * i / static_cast<double>(last);
    if (2 * i == last && cfg.curvature_min == -cfg.curvature_max) arc.curvature = 0.0;
    out.push_back(arc);
  }
  return out;
}

// Remaining-energy heuristic H(n, g) = (G*theta + beta) * d with theta the
// straight-line inclination between the two poses in degrees and d their
// horizontal euclidean distance.
inline double heuristic(const Pose2D& n, const Pose2D& goal, const Dem& dem,
                        const RampModelParams& p) {
  const double d = std::hypot(goal.x - n.x, goal.y - n.y);
  if (d == 0.0) return 0.0;
  const double dz = dem.elevation_at(goal.x, goal.y) - dem.elevation_at(n.x, n.y);
  const double theta = std::atan(dz / d) * 57.29577951308232;
  const double gain = theta >= 0.0 ? p.g_up : p.g_down;
  return (gain * theta + p.beta) * d;
}

struct PlanResult {
  bool found = false;
  std::vector<TrajectoryArc> arcs;          // chained start -> goal
  std::vector<double> arc_pred_net;         // estimator net energy per arc [J]
  double predicted_energy = 0.0;            // [J], g-cost of the goal node
  double real_energy = 0.0;                 // [J], filled by execute_plan
  long nodes_expanded = 0;
  double wall_time = 0.0;  // [s]
};

// Evaluates one candidate edge: preprocessing (with its safety gate)
// followed by the estimator. nullopt = edge not usable.
class EdgeEvaluator {
 public:
  EdgeEvaluator(const Dem& dem, const PointIndex& index, const EnergyEstimator& estimator,
                const SafetyThresholds& thresholds, double swath_width = kSwathWidth)
      : dem_(&dem), index_(&index), estimator_(&estimator), thresholds_(thresholds),
        swath_width_(swath_width) {}

  std::optional<EnergyEstimate> operator()(const TrajectoryArc& arc) const {
    if (!corridor_in_bounds(arc)) return std::nullopt;
    const PreprocessResult pre = preprocess(*index_, arc, thresholds_, swath_width_);
    if (!pre.traversable()) return std::nullopt;
    return estimator_->estimate(*pre.patch, arc);
  }

  // The swath window plus the wheel bands must stay inside the DEM.
  bool corridor_in_bounds(const TrajectoryArc& arc) const {
    const double margin = swath_width_ / 2.0 + 0.01;
    const int probes = 8;
    for (int i = 0; i <= probes; ++i) {
      const Pose2D p = pose_along(arc, kSwathLength * i / probes);
      if (!dem_->contains(p.x - margin, p.y - margin) ||
          !dem_->contains(p.x + margin, p.y + margin))
        return false;
    }
    return true;
  }

 private:
  const Dem* dem_;
  const PointIndex* index_;
  const EnergyEstimator* estimator_;
  SafetyThresholds thresholds_;
  double swath_width_;
};

namespace detail {

struct NodeKey {
  long qx = 0;
  long qy = 0;
  int sector = 0;
  bool operator==(const NodeKey&) const = default;
};

struct NodeKeyHash {
  std::size_t operator()(const NodeKey& k) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 0x100000001b3ULL;
    };
    mix(static_cast<std::uint64_t>(k.qx));
    mix(static_cast<std::uint64_t>(k.qy));
    mix(static_cast<std::uint64_t>(k.sector));
    return static_cast<std::size_t>(h);
  }
};

inline NodeKey quantize(const Pose2D& p, const LatticeConfig& cfg) {
  NodeKey key;
  key.qx = std::lround(std::floor(p.x / cfg.position_quantum));
  key.qy = std::lround(std::floor(p.y / cfg.position_quantum));
  const double sector_width = 2.0 * kPi / cfg.heading_sectors;
  int s = static_cast<int>(std::floor((p.heading + kPi) / sector_width));
  if (s >= cfg.heading_sectors) s = cfg.heading_sectors - 1;
  if (s < 0) s = 0;
  key.sector = s;
  return key;
}

struct StoredNode {
  Pose2D pose;
  double g = 0.0;
  long parent = -1;
  TrajectoryArc arriving_arc;
  double arc_pred = 0.0;
};

struct OpenEntry {
  double priority = 0.0;
  std::uint64_t seq = 0;  // FIFO tie-break
  long node = -1;
};

struct OpenOrder {
  bool operator()(const OpenEntry& a, const OpenEntry& b) const {
    if (a.priority != b.priority) return a.priority > b.priority;
    return a.seq > b.seq;
  }
};

}  // namespace detail

// Best-first search over the state lattice. Node priority is the cumulative
// path cost plus the heuristic; edges are the elementary trajectories whose
// swaths pass the safety gate; edge cost is the estimator's net energy.
// Closed states are reopened when reached with a strictly better cost, so
// mildly inconsistent heuristics and negative downhill edges stay safe.
// Passing nullopt as heuristic_params runs uniform-cost search.
inline PlanResult astar(const Pose2D& start, const Pose2D& goal, const Dem& dem,
                        const EdgeEvaluator& edge_cost,
                        const std::optional<RampModelParams>& heuristic_params,
                        const LatticeConfig& cfg) {
  if (!dem.contains(start.x, start.y) || !dem.contains(goal.x, goal.y))
    throw std::invalid_argument("start and goal must lie within the DEM");

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  auto h = [&](const Pose2D& p) {
    return heuristic_params ? heuristic(p, goal, dem, *heuristic_params) : 0.0;
  };

  const std::vector<TrajectoryArc> prims = primitives(cfg);
  std::vector<detail::StoredNode> nodes;
  std::priority_queue<detail::OpenEntry, std::vector<detail::OpenEntry>, detail::OpenOrder> open;
  std::unordered_map<detail::NodeKey, double, detail::NodeKeyHash> best_g;

  nodes.push_back({start, 0.0, -1, {}, 0.0});
  best_g[detail::quantize(start, cfg)] = 0.0;
  std::uint64_t seq = 0;
  open.push({h(start), seq++, 0});

  PlanResult result;
  while (!open.empty()) {
    const detail::OpenEntry entry = open.top();
    open.pop();
    const detail::StoredNode node = nodes[static_cast<std::size_t>(entry.node)];
    const auto it = best_g.find(detail::quantize(node.pose, cfg));
    if (it != best_g.end() && node.g > it->second + 1e-12) continue;  // stale entry

    ++result.nodes_expanded;
    if (std::hypot(node.pose.x - goal.x, node.pose.y - goal.y) <= cfg.goal_radius) {
      // Walk the parent chain back to the start.
      std::vector<long> chain;
      for (long i = entry.node; i > 0; i = nodes[static_cast<std::size_t>(i)].parent)
        chain.push_back(i);
      for (auto rit = chain.rbegin(); rit != chain.rend(); ++rit) {
        result.arcs.push_back(nodes[static_cast<std::size_t>(*rit)].arriving_arc);
        result.arc_pred_net.push_back(nodes[static_cast<std::size_t>(*rit)].arc_pred);
      }
      result.found = true;
      result.predicted_energy = node.g;
      result.wall_time = elapsed();
      return result;
    }
    if (result.nodes_expanded >= cfg.max_expansions) break;

    for (const TrajectoryArc& prim : prims) {
      TrajectoryArc arc = prim;
      arc.start = node.pose;
      const std::optional<EnergyEstimate> cost = edge_cost(arc);
      if (!cost) continue;
      const Pose2D next = arc_end(arc);
      const double g_next = node.g + cost->net;
      const detail::NodeKey key = detail::quantize(next, cfg);
      const auto found = best_g.find(key);
      if (found != best_g.end() && found->second <= g_next + 1e-12) continue;
      best_g[key] = g_next;
      nodes.push_back({next, g_next, entry.node, arc, cost->net});
      open.push({g_next + h(next), seq++, static_cast<long>(nodes.size() - 1)});
    }
  }
  result.found = false;
  result.wall_time = elapsed();
  return result;
}

// Convenience wrapper that owns the perception cloud for one search.
inline PlanResult astar(const Pose2D& start, const Pose2D& goal, const Dem& dem,
                        const EnergyEstimator& estimator,
                        const std::optional<RampModelParams>& heuristic_params,
                        const LatticeConfig& cfg, const SafetyThresholds& thresholds) {
  const PointCloud cloud = sample_point_cloud(dem, cfg.cloud_density, cfg.cloud_seed);
  const PointIndex index(cloud);
  const EdgeEvaluator edges(dem, index, estimator, thresholds);
  return astar(start, goal, dem, edges, heuristic_params, cfg);
}

// Scores a plan with the traverse simulator; returns and stores the real
// net energy of the arc chain.
inline double execute_plan(PlanResult& plan, const Dem& dem, const RoverParams& rover) {
  double total = 0.0;
  for (const TrajectoryArc& arc : plan.arcs) total += traverse_energy(dem, arc, rover).net();
  plan.real_energy = total;
  return total;
}

// Plan record: one line per arc, then a summary line.
inline void save_plan(const PlanResult& plan, const std::string& path) {
  auto f = open_output(path);
  for (std::size_t i = 0; i < plan.arcs.size(); ++i) {
    const TrajectoryArc& a = plan.arcs[i];
    f << "arc " << i << " x " << format_double(a.start.x) << " y "
      << format_double(a.start.y) << " heading " << format_double(a.start.heading)
      << " curvature " << format_double(a.curvature) << " length "
      << format_double(a.length) << " pred_net " << format_double(plan.arc_pred_net[i])
      << "\n";
  }
  f << "total pred " << format_double(plan.predicted_energy) << " real "
    << format_double(plan.real_energy) << " nodes " << plan.nodes_expanded << " time "
    << format_double(plan.wall_time) << "\n";
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace terravolt
