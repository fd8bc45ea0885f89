#pragma once

#include "umbrella/umbrella.hpp"

namespace helpers {

using namespace umbrella;

// Target moving with constant velocity, sampled every dt from t = 0.
inline Trajectory line(Vec2 start, Vec2 vel, double dt, int steps) {
  Trajectory t;
  for (int k = 0; k < steps; ++k) t.push_back(start + (k * dt) * vel);
  return t;
}

inline TargetPaths paths(std::vector<Trajectory> t, double dt) { return TargetPaths{0.0, dt, std::move(t)}; }

// Zero-radius bundle whose mean follows the given paths.
inline PredictionBundle exact_bundle(const TargetPaths& p, const std::vector<std::string>& names,
                                     std::vector<double> vmax = {}) {
  PredictionBundle b{p.t0, p.dt, 0.15, names, {}};
  for (std::size_t m = 0; m < p.paths.size(); ++m) {
    TargetForecast f;
    f.current = p.paths[m].front();
    f.mean = p.paths[m];
    f.radius.assign(f.mean.size(), 0.0);
    f.vmax = m < vmax.size() ? vmax[m] : 0.0;
    b.forecasts.push_back(std::move(f));
  }
  return b;
}

inline PlanItem item(const std::string& name, int task, int target, std::vector<std::string> actions, double duration,
                     std::vector<int> preds = {}) {
  PlanItem it;
  it.name = name;
  it.task = task;
  it.target = target;
  it.actions = std::move(actions);
  it.duration = duration;
  it.preds = std::move(preds);
  return it;
}

inline PlanRobot robot(const std::string& id, Vec2 pos, double v, std::vector<std::string> caps) {
  return {id, pos, v, std::move(caps)};
}

inline PlanningProblem problem(std::vector<PlanRobot> robots, std::vector<PlanItem> items, std::size_t tasks,
                               std::size_t targets, double dt = 0.1) {
  PlanningProblem p;
  p.dt = dt;
  p.reach_threshold = 0.0;
  p.max_time = 1000.0;
  p.robots = std::move(robots);
  p.items = std::move(items);
  for (std::size_t l = 0; l < tasks; ++l) p.tasks.push_back("task" + std::to_string(l));
  for (std::size_t m = 0; m < targets; ++m) p.targets.push_back("t" + std::to_string(m));
  return p;
}

// Up to 3 robots and 3 subtasks over two drifting targets, zero radii.
struct Instance {
  PlanningProblem problem;
  TargetPaths paths;
};

inline Instance random_instance(Rng& rng) {
  const int n_robots = 1 + static_cast<int>(rng.index(3));
  const int n_items = 1 + static_cast<int>(rng.index(3));
  std::vector<PlanRobot> robots;
  for (int k = 0; k < n_robots; ++k) {
    std::vector<std::string> caps{"cam"};
    if (k == 0 || rng.bernoulli(0.5)) caps.push_back("net");
    robots.push_back(robot("r" + std::to_string(k), {rng.uniform(0, 20), rng.uniform(0, 20)}, rng.uniform(1.5, 3.0), caps));
  }
  std::vector<PlanItem> items;
  for (int i = 0; i < n_items; ++i) {
    std::vector<std::string> acts{rng.bernoulli(0.5) ? "cam" : "net"};
    if (n_robots > 1 && rng.bernoulli(0.3)) acts = {"cam", "net"};
    std::vector<int> preds;
    if (i > 0 && rng.bernoulli(0.4)) preds.push_back(static_cast<int>(rng.index(i)));
    items.push_back(item("w" + std::to_string(i), i % 2, i % 2, acts, rng.uniform(0.5, 3.0), preds));
  }
  Instance out;
  out.problem = problem(robots, items, n_items > 1 ? 2 : 1, 2);
  out.paths = paths({line({rng.uniform(0, 20), rng.uniform(0, 20)}, {0.5, 0.2}, 0.1, 600),
                     line({rng.uniform(0, 20), rng.uniform(0, 20)}, {-0.3, 0.4}, 0.1, 600)},
                    0.1);
  return out;
}

}  // namespace helpers
