#pragma once

#include <cmath>
#include <stdexcept>

namespace terravolt {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

struct Pose2D {
  double x = 0.0;        // [m]
  double y = 0.0;        // [m]
  double heading = 0.0;  // [rad], in (-pi, pi]
};

// Constant-curvature motion primitive. curvature > 0 turns left.
struct TrajectoryArc {
  Pose2D start;
  double curvature = 0.0;  // [1/m]
  double length = 0.0;     // [m]
};

inline void validate_arc(const TrajectoryArc& arc, double curvature_bound = 1.14) {
  if (!(arc.length > 0.0)) throw std::invalid_argument("arc length must be positive");
  if (!(std::abs(arc.curvature) <= curvature_bound))
    throw std::invalid_argument("arc curvature exceeds bound");
  if (!std::isfinite(arc.start.x) || !std::isfinite(arc.start.y) ||
      !std::isfinite(arc.start.heading))
    throw std::invalid_argument("arc start pose must be finite");
}

// Pose after advancing arc length s from the start (s may exceed arc.length;
// the curve continues with the same curvature).
inline Pose2D pose_along(const TrajectoryArc& arc, double s) {
  const double h = arc.start.heading;
  Pose2D p;
  if (arc.curvature == 0.0) {
    p.x = arc.start.x + s * std::cos(h);
    p.y = arc.start.y + s * std::sin(h);
    p.heading = h;
    return p;
  }
  const double k = arc.curvature;
  const double dpsi = k * s;
  p.x = arc.start.x + (std::sin(h + dpsi) - std::sin(h)) / k;
  p.y = arc.start.y - (std::cos(h + dpsi) - std::cos(h)) / k;
  p.heading = wrap_angle(h + dpsi);
  return p;
}

inline Pose2D arc_end(const TrajectoryArc& arc) { return pose_along(arc, arc.length); }

// Curvilinear coordinates of a point relative to an arc: s is the arc-length
// projection onto the centerline (negative behind the start), lateral is the
// signed offset, positive to the left of the direction of travel.
struct ArcCoords {
  double s = 0.0;
  double lateral = 0.0;
};

inline ArcCoords arc_project(const TrajectoryArc& arc, double px, double py) {
  const double ch = std::cos(arc.start.heading);
  const double sh = std::sin(arc.start.heading);
  const double dx = px - arc.start.x;
  const double dy = py - arc.start.y;
  const double lx = ch * dx + sh * dy;
  const double ly = -sh * dx + ch * dy;
  ArcCoords out;
  if (arc.curvature == 0.0) {
    out.s = lx;
    out.lateral = ly;
    return out;
  }
  const double k = arc.curvature;
  const double radius = 1.0 / std::abs(k);
  const double cy = 1.0 / k;  // turn centre in the start frame is (0, 1/k)
  const double rx = lx;
  const double ry = ly - cy;
  const double rho = std::hypot(rx, ry);
  const double gamma = std::atan2(ry, rx);
  const double delta = wrap_angle((k > 0.0 ? gamma : -gamma) + kPi / 2.0);
  out.s = radius * delta;
  out.lateral = (k > 0.0) ? (radius - rho) : (rho - radius);
  return out;
}

// Point at curvilinear coordinates (s, lateral) of an arc, i.e. the inverse
// of arc_project for |lateral| < turn radius.
inline void arc_unproject(const TrajectoryArc& arc, double s, double lateral,
                          double& px, double& py) {
  const Pose2D p = pose_along(arc, s);
  px = p.x - lateral * std::sin(p.heading);
  py = p.y + lateral * std::cos(p.heading);
}

}  // namespace terravolt
