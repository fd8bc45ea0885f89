#pragma once

// Team model, planning problems and the stepwise execution simulator.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "umbrella/common.hpp"
#include "umbrella/poset.hpp"
#include "umbrella/prediction.hpp"

namespace umbrella {

struct RobotSpec {
  std::string id;
  std::vector<std::string> capabilities;  // action names
  double vmax = 1.0;                      // m/s
  Vec2 position;

  bool can(const std::string& action) const {
    return std::find(capabilities.begin(), capabilities.end(), action) != capabilities.end();
  }
};

struct Collaboration {
  std::string id;
  std::vector<std::string> actions;  // one robot per action
  double duration = 0.0;             // seconds
};

struct TeamModel {
  std::vector<RobotSpec> robots;
  std::vector<Collaboration> collaborations;

  const Collaboration& collaboration(const std::string& id) const {
    for (const auto& c : collaborations)
      if (c.id == id) return c;
    throw ScenarioError("unknown collaboration '" + id + "'");
  }
  std::optional<std::size_t> robot_index(const std::string& id) const {
    for (std::size_t i = 0; i < robots.size(); ++i)
      if (robots[i].id == id) return i;
    return std::nullopt;
  }

  /// Every collaboration action must be executable by at least one robot; speeds positive.
  void validate() const {
    for (const auto& r : robots)
      if (!(r.vmax > 0.0)) throw ScenarioError("robot '" + r.id + "' needs a positive vmax");
    for (const auto& c : collaborations) {
      if (c.actions.empty()) throw ScenarioError("collaboration '" + c.id + "' has no actions");
      if (c.duration < 0.0) throw ScenarioError("collaboration '" + c.id + "' has a negative duration");
      for (const auto& a : c.actions)
        if (std::none_of(robots.begin(), robots.end(), [&](const RobotSpec& r) { return r.can(a); }))
          throw ScenarioError("no robot can perform action '" + a + "' of '" + c.id + "'");
    }
  }
};

// ---------------------------------------------------------------------------
// Planning problem: an index-based snapshot of the work that remains.
// ---------------------------------------------------------------------------

enum class ItemStatus { Pending, Executing, Done };

inline constexpr int kUnavailable = -2;

struct PlanItem {
  std::string name;
  int task = 0;                        // index into PlanningProblem::tasks
  int target = 0;                      // index into the target paths
  std::vector<std::string> actions;    // role k is performed by group[k]
  double duration = 0.0;
  int pinned_robot = -1;               // reach subtasks are bound to one robot; kUnavailable if it failed
  std::vector<int> preds;
  std::vector<int> exclusive;
  Letter letter;
  // Set for subtasks already executing when the snapshot was taken.
  ItemStatus status = ItemStatus::Pending;
  double start = kInf;
  double completion = kInf;
  std::vector<int> group;
};

struct PlanRobot {
  std::string id;
  Vec2 position;
  double vmax = 1.0;
  std::vector<std::string> capabilities;

  bool can(const std::string& action) const {
    return std::find(capabilities.begin(), capabilities.end(), action) != capabilities.end();
  }
};

struct PlanningProblem {
  double t_now = 0.0;
  double dt = 0.5;                  // simulation step, s
  double reach_threshold = 0.5;     // m
  double max_time = 3600.0;         // absolute cap, s
  PrecedenceSemantics semantics = PrecedenceSemantics::StartCompletion;
  std::vector<PlanRobot> robots;
  std::vector<PlanItem> items;
  std::vector<std::string> tasks;
  std::vector<double> task_weights;  // empty: plain average over tasks
  std::vector<std::string> targets;  // names, indexed like the paths

  std::size_t num_items() const noexcept { return items.size(); }
};

struct Decision {
  int item = 0;
  std::vector<int> group;  // robot indices, one per action of the item
  friend bool operator==(const Decision&, const Decision&) = default;
};

using Assignment = std::vector<Decision>;

/// Builds a planning problem over a poset (all subtasks pending).
inline PlanningProblem make_problem(const RPoset& poset, const TeamModel& team, const std::vector<std::string>& targets,
                                    double t_now = 0.0) {
  PlanningProblem p;
  p.t_now = t_now;
  p.targets = targets;
  for (const auto& r : team.robots) p.robots.push_back({r.id, r.position, r.vmax, r.capabilities});
  std::map<std::string, int> task_index;
  for (const auto& s : poset.subtasks) {
    auto [it, fresh] = task_index.emplace(s.task, static_cast<int>(p.tasks.size()));
    if (fresh) p.tasks.push_back(s.task);
    PlanItem item;
    item.name = s.name;
    item.task = it->second;
    auto tgt = std::find(targets.begin(), targets.end(), s.target);
    if (tgt == targets.end()) throw ScenarioError("subtask '" + s.name + "' names unknown target '" + s.target + "'");
    item.target = static_cast<int>(tgt - targets.begin());
    if (s.collab == kReachCollab) {
      auto r = team.robot_index(*s.robot);
      if (!r) throw ScenarioError("subtask '" + s.name + "' names unknown robot '" + *s.robot + "'");
      item.pinned_robot = static_cast<int>(*r);
      item.actions = {kReachCollab};
    } else {
      const auto& c = team.collaboration(s.collab);
      item.actions = c.actions;
      item.duration = c.duration;
    }
    item.preds = poset.predecessors(s.id);
    item.exclusive = poset.excluded_with(s.id);
    item.letter = s.letter();
    p.items.push_back(std::move(item));
  }
  return p;
}

/// Weighted (priorities) or plain average of per-task values.
inline double task_average(const std::vector<double>& values, const std::vector<double>& weights) {
  if (values.empty()) return 0.0;
  if (!weights.empty()) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += weights[i] * values[i];
    return s;
  }
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

/// Weighted makespan sum_l alpha_l T_l over tasks named in `makespans`.
inline double weighted_makespan(const std::map<std::string, double>& makespans,
                                const std::map<std::string, double>& priorities) {
  double s = 0.0;
  for (const auto& [task, t] : makespans) {
    auto it = priorities.find(task);
    if (it == priorities.end()) throw std::invalid_argument("no priority for task '" + task + "'");
    s += it->second * t;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Groups
// ---------------------------------------------------------------------------

/// All robot groups able to perform `item`: distinct robots, one per action, with
/// robots interchangeable between identical actions counted once.
inline std::vector<std::vector<int>> feasible_groups(const PlanningProblem& p, int item) {
  const PlanItem& it = p.items[item];
  std::vector<std::vector<int>> out;
  if (it.pinned_robot == kUnavailable) return out;
  if (it.pinned_robot >= 0) {
    out.push_back({it.pinned_robot});
    return out;
  }
  const std::size_t k = it.actions.size();
  std::vector<int> cur(k, -1);
  std::set<std::vector<int>> seen;
  std::vector<bool> used(p.robots.size(), false);
  auto rec = [&](auto&& self, std::size_t role) -> void {
    if (role == k) {
      // canonical form: robots sorted within each run of identical actions
      std::vector<int> canon = cur;
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b)
          if (it.actions[a] == it.actions[b] && canon[b] < canon[a]) std::swap(canon[a], canon[b]);
      if (seen.insert(canon).second) out.push_back(canon);
      return;
    }
    for (std::size_t r = 0; r < p.robots.size(); ++r) {
      if (used[r] || !p.robots[r].can(it.actions[role])) continue;
      used[r] = true;
      cur[role] = static_cast<int>(r);
      self(self, role + 1);
      used[r] = false;
    }
  };
  rec(rec, 0);
  return out;
}

/// Subtasks that are pending, not yet assigned, and whose predecessors are assigned or executing.
inline std::vector<int> available_items(const PlanningProblem& p, const std::vector<bool>& assigned) {
  std::vector<int> out;
  for (std::size_t i = 0; i < p.items.size(); ++i) {
    if (assigned[i] || p.items[i].status != ItemStatus::Pending) continue;
    bool ready = true;
    for (int q : p.items[i].preds)
      if (p.items[q].status == ItemStatus::Pending && !assigned[q]) {
        ready = false;
        break;
      }
    if (ready) out.push_back(static_cast<int>(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stepwise simulation
// ---------------------------------------------------------------------------

struct SimResult {
  std::vector<double> start;       // per item; kInf when never started
  std::vector<double> completion;  // per item; kInf when never completed
  std::vector<double> task_completion;  // per task; kInf when incomplete
  double objective = kInf;         // average (or weighted) remaining makespan
  bool exceeded = false;           // hit max_time before finishing
  double end_time = 0.0;
};

/// Mutable execution state shared by the planner simulation and the online executor.
struct WorldState {
  double t = 0.0;
  std::vector<Vec2> pos;                  // per robot
  std::vector<bool> alive;                // per robot
  std::vector<std::vector<int>> queue;    // per robot, items in execution order
  std::vector<std::size_t> head;          // per robot, index of the current queue entry
  std::vector<ItemStatus> status;         // per item
  std::vector<double> start, completion;  // per item
  std::vector<std::vector<int>> group;    // per item
  std::vector<int> order;                 // assignment order, used to start items deterministically
  std::vector<int> rank;                  // per item position in `order` (or -1)

  int front(std::size_t r) const { return head[r] < queue[r].size() ? queue[r][head[r]] : -1; }
};

/// Initial world for executing `assignment` on top of the problem's executing items.
inline WorldState make_world(const PlanningProblem& p, const Assignment& assignment) {
  WorldState w;
  const std::size_t nr = p.robots.size();
  const std::size_t ni = p.items.size();
  w.t = p.t_now;
  w.alive.assign(nr, true);
  w.queue.assign(nr, {});
  w.head.assign(nr, 0);
  w.status.resize(ni);
  w.start.assign(ni, kInf);
  w.completion.assign(ni, kInf);
  w.group.assign(ni, {});
  w.rank.assign(ni, -1);
  for (std::size_t r = 0; r < nr; ++r) w.pos.push_back(p.robots[r].position);
  for (std::size_t i = 0; i < ni; ++i) {
    const PlanItem& it = p.items[i];
    w.status[i] = it.status;
    if (it.status == ItemStatus::Executing) {
      w.start[i] = it.start;
      w.completion[i] = it.completion;
      w.group[i] = it.group;
      for (int r : it.group) w.queue[r].push_back(static_cast<int>(i));
      w.rank[i] = static_cast<int>(w.order.size());
      w.order.push_back(static_cast<int>(i));
    } else if (it.status == ItemStatus::Done) {
      w.start[i] = it.start;
      w.completion[i] = it.completion;
    }
  }
  for (const Decision& d : assignment) {
    w.group[d.item] = d.group;
    for (int r : d.group) w.queue[r].push_back(d.item);
    w.rank[d.item] = static_cast<int>(w.order.size());
    w.order.push_back(d.item);
  }
  return w;
}

struct TickEvents {
  std::vector<int> completed;
  std::vector<int> started;
};

/// Completes items whose completion time has passed at the current time, then
/// advances the world by one step to `t_next`: robots move, items start.
inline TickEvents advance_world(const PlanningProblem& p, const TargetPaths& paths, WorldState& w, double t_next) {
  TickEvents ev;
  const std::size_t nr = w.pos.size();
  for (int i : w.order) {
    if (w.status[i] == ItemStatus::Executing && w.completion[i] <= w.t + kTimeEps) {
      w.status[i] = ItemStatus::Done;
      ev.completed.push_back(i);
      for (int r : w.group[i])
        if (w.front(r) == i) ++w.head[r];
    }
  }
  for (std::size_t r = 0; r < nr; ++r) {
    if (!w.alive[r]) continue;
    const int i = w.front(r);
    if (i < 0) continue;
    const Vec2 goal = paths.at(p.items[i].target, t_next);
    if (w.status[i] == ItemStatus::Executing) {
      w.pos[r] = goal;
    } else {
      w.pos[r] = move_toward(w.pos[r], goal, p.robots[r].vmax * (t_next - w.t));
    }
  }
  const double thr = p.reach_threshold + 1e-9;
  for (int i : w.order) {
    if (w.status[i] != ItemStatus::Pending) continue;
    const PlanItem& it = p.items[i];
    const auto& g = w.group[i];
    if (g.empty()) continue;
    bool ok = true;
    const Vec2 tp = paths.at(it.target, t_next);
    for (int r : g) {
      if (!w.alive[r] || w.front(r) != i || distance(w.pos[r], tp) > thr) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    for (int q : it.preds) {
      const bool met = p.semantics == PrecedenceSemantics::StartStart
                           ? w.status[q] != ItemStatus::Pending
                           : w.status[q] == ItemStatus::Done || w.completion[q] <= t_next + kTimeEps;
      if (!met) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    for (int q : it.exclusive)
      if (w.status[q] == ItemStatus::Executing && w.completion[q] > t_next + kTimeEps) {
        ok = false;
        break;
      }
    if (!ok) continue;
    w.status[i] = ItemStatus::Executing;
    w.start[i] = t_next;
    w.completion[i] = t_next + it.duration;
    ev.started.push_back(i);
  }
  w.t = t_next;
  return ev;
}

struct SimOptions {
  int stop_after_start = -1;  // stop as soon as this item starts (its start time is then final)
};

/// Simulates the execution of `assignment` on fixed target paths.
///
/// Items not in the assignment stay pending. The objective averages, over tasks
/// whose items are all assigned or executing, the task completion time minus t_now.
inline SimResult simulate(const PlanningProblem& p, const Assignment& assignment, const TargetPaths& paths,
                          const SimOptions& opt = {}) {
  WorldState w = make_world(p, assignment);
  const std::size_t ni = p.items.size();
  SimResult res;
  long long k = 0;
  bool exceeded = false;
  while (true) {
    if (opt.stop_after_start >= 0 && w.status[opt.stop_after_start] != ItemStatus::Pending) break;
    // all active items completed?
    bool finished = true;
    for (int i : w.order)
      if (w.status[i] == ItemStatus::Pending || (w.status[i] == ItemStatus::Executing && w.completion[i] > w.t + kTimeEps)) {
        finished = false;
        break;
      }
    if (finished) {
      for (int i : w.order)
        if (w.status[i] == ItemStatus::Executing) w.status[i] = ItemStatus::Done;
      break;
    }
    if (w.t > p.max_time) {
      exceeded = true;
      break;
    }
    ++k;
    advance_world(p, paths, w, p.t_now + static_cast<double>(k) * p.dt);
  }
  res.start = w.start;
  res.completion = w.completion;
  for (std::size_t i = 0; i < ni; ++i)
    if (w.status[i] != ItemStatus::Done && w.status[i] != ItemStatus::Executing) res.completion[i] = kInf;
  res.exceeded = exceeded;
  res.end_time = w.t;
  res.task_completion.assign(p.tasks.size(), -kInf);
  std::vector<bool> complete(p.tasks.size(), true);
  for (std::size_t i = 0; i < ni; ++i) {
    const int task = p.items[i].task;
    if (w.rank[i] < 0 && p.items[i].status == ItemStatus::Pending) complete[task] = false;
    res.task_completion[task] = std::max(res.task_completion[task], res.completion[i]);
  }
  std::vector<double> remaining;
  std::vector<double> weights;
  for (std::size_t l = 0; l < p.tasks.size(); ++l) {
    if (!complete[l]) {
      res.task_completion[l] = kInf;
      continue;
    }
    if (res.task_completion[l] == -kInf) res.task_completion[l] = p.t_now;
    remaining.push_back(res.task_completion[l] - p.t_now);
    if (!p.task_weights.empty()) weights.push_back(p.task_weights[l]);
  }
  res.objective = exceeded ? kInf : task_average(remaining, weights);
  if (exceeded)
    for (auto& c : res.task_completion)
      if (c == -kInf) c = kInf;
  return res;
}

/// Public form of the simulation: throws HorizonExceededError instead of returning an infinite objective.
inline SimResult stepwise_simulate(const PlanningProblem& p, const Assignment& assignment, const TargetPaths& paths) {
  SimResult r = simulate(p, assignment, paths);
  if (r.exceeded) {
    throw HorizonExceededError("simulation passed t = " + std::to_string(p.max_time) + " s without finishing");
  }
  return r;
}

/// Shallow validity check of an assignment: each item once, a feasible group, predecessors first.
inline bool assignment_consistent(const PlanningProblem& p, const Assignment& a) {
  std::vector<bool> assigned(p.items.size(), false);
  for (const Decision& d : a) {
    if (d.item < 0 || d.item >= static_cast<int>(p.items.size()) || assigned[d.item]) return false;
    const PlanItem& it = p.items[d.item];
    if (it.status != ItemStatus::Pending || d.group.size() != it.actions.size()) return false;
    std::set<int> distinct(d.group.begin(), d.group.end());
    if (distinct.size() != d.group.size()) return false;
    for (std::size_t k = 0; k < d.group.size(); ++k) {
      const int r = d.group[k];
      if (r < 0 || r >= static_cast<int>(p.robots.size())) return false;
      if (it.pinned_robot >= 0 ? r != it.pinned_robot : !p.robots[r].can(it.actions[k])) return false;
    }
    for (int q : it.preds)
      if (p.items[q].status == ItemStatus::Pending && !assigned[q]) return false;
    assigned[d.item] = true;
  }
  return true;
}

}  // namespace umbrella
