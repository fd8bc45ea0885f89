#pragma once

// Synthetic target motion generators.

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "umbrella/common.hpp"

namespace umbrella {

struct MotionSpec {
  enum class Kind { Static, PiecewiseLinear, Smooth };

  Kind kind = Kind::Static;
  Vec2 start;
  std::vector<Vec2> waypoints;  // visited in order after `start`
  double speed = 0.0;           // m/s along the path
  double waypoint_noise = 0.0;  // std-dev (m) of per-coordinate waypoint perturbation
  double speed_noise = 0.0;     // relative std-dev of the speed
  int fixed_waypoints = 0;      // leading waypoints that are never perturbed
};

inline std::string to_string(MotionSpec::Kind k) {
  switch (k) {
    case MotionSpec::Kind::Static: return "static";
    case MotionSpec::Kind::PiecewiseLinear: return "piecewise_linear";
    case MotionSpec::Kind::Smooth: return "smooth";
  }
  return "?";
}

inline MotionSpec::Kind motion_kind_from_string(const std::string& s) {
  if (s == "static") return MotionSpec::Kind::Static;
  if (s == "piecewise_linear") return MotionSpec::Kind::PiecewiseLinear;
  if (s == "smooth") return MotionSpec::Kind::Smooth;
  throw ScenarioError("unknown motion generator '" + s + "'");
}

namespace detail {

// Positions at multiples of `dt` along a polyline traversed at constant speed,
// holding the last vertex once it is reached.
inline std::vector<Vec2> traverse(const std::vector<Vec2>& poly, double speed, double dt, int steps) {
  std::vector<Vec2> out;
  out.reserve(steps);
  std::size_t seg = 0;
  double offset = 0.0;  // distance already covered on poly[seg] -> poly[seg + 1]
  Vec2 pos = poly.front();
  out.push_back(pos);
  for (int k = 1; k < steps; ++k) {
    double budget = speed * dt;
    while (budget > 0.0 && seg + 1 < poly.size()) {
      const double len = distance(poly[seg], poly[seg + 1]);
      const double left = len - offset;
      if (budget < left) {
        offset += budget;
        budget = 0.0;
      } else {
        budget -= left;
        ++seg;
        offset = 0.0;
      }
    }
    if (seg + 1 < poly.size()) {
      const double len = distance(poly[seg], poly[seg + 1]);
      pos = len > 0.0 ? lerp(poly[seg], poly[seg + 1], offset / len) : poly[seg];
    } else {
      pos = poly.back();
    }
    out.push_back(pos);
  }
  return out;
}

// Dense uniform Catmull-Rom sampling through the control points.
inline std::vector<Vec2> catmull_rom(const std::vector<Vec2>& pts, int per_segment = 24) {
  if (pts.size() < 2) return pts;
  std::vector<Vec2> out;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 p0 = i == 0 ? pts[0] : pts[i - 1];
    const Vec2 p1 = pts[i];
    const Vec2 p2 = pts[i + 1];
    const Vec2 p3 = i + 2 < pts.size() ? pts[i + 2] : pts[i + 1];
    for (int s = 0; s < per_segment; ++s) {
      const double u = static_cast<double>(s) / per_segment;
      const double u2 = u * u;
      const double u3 = u2 * u;
      out.push_back(0.5 * ((2.0 * p1) + u * (p2 - p0) + u2 * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) +
                           u3 * (3.0 * p1 - p0 - 3.0 * p2 + p3)));
    }
  }
  out.push_back(pts.back());
  return out;
}

}  // namespace detail

/// Draws one trajectory of `steps` positions spaced `dt` seconds apart.
inline std::vector<Vec2> generate_trajectory(const MotionSpec& spec, double dt, int steps, Rng& rng) {
  if (steps < 1) throw std::invalid_argument("generate_trajectory: steps must be positive");
  if (spec.kind == MotionSpec::Kind::Static || spec.waypoints.empty()) {
    return std::vector<Vec2>(steps, spec.start);
  }
  std::vector<Vec2> pts{spec.start};
  for (std::size_t i = 0; i < spec.waypoints.size(); ++i) {
    Vec2 w = spec.waypoints[i];
    if (static_cast<int>(i) >= spec.fixed_waypoints && spec.waypoint_noise > 0.0) {
      w.x += spec.waypoint_noise * rng.normal();
      w.y += spec.waypoint_noise * rng.normal();
    }
    pts.push_back(w);
  }
  double speed = spec.speed;
  if (spec.speed_noise > 0.0) speed *= std::max(0.1, 1.0 + spec.speed_noise * rng.normal());
  if (spec.kind == MotionSpec::Kind::Smooth) pts = detail::catmull_rom(pts);
  return detail::traverse(pts, speed, dt, steps);
}

}  // namespace umbrella
