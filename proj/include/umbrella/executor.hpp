#pragma once

// Receding-horizon mission execution with event-triggered replanning.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "umbrella/formula.hpp"
#include "umbrella/planner.hpp"
#include "umbrella/poset.hpp"
#include "umbrella/scenario.hpp"
#include "umbrella/simulation.hpp"

namespace umbrella {

struct ReactiveRule {
  std::string id;
  Trigger trigger;
  Formula response;
  bool fired = false;
};

/// Conjoins F(response) for each rule named in `fired_ids` that has not fired yet,
/// in rule-id order, and marks those rules fired.
inline Formula update_formula(const Formula& phi, std::vector<ReactiveRule>& rules,
                              const std::vector<std::string>& fired_ids) {
  std::vector<ReactiveRule*> newly;
  for (auto& r : rules)
    if (!r.fired && std::find(fired_ids.begin(), fired_ids.end(), r.id) != fired_ids.end()) newly.push_back(&r);
  std::sort(newly.begin(), newly.end(), [](const ReactiveRule* a, const ReactiveRule* b) { return a->id < b->id; });
  Formula out = phi;
  for (ReactiveRule* r : newly) {
    out = Formula::conj(out, Formula::eventually(r->response));
    r->fired = true;
  }
  return out;
}

/// eta * (L - done + c) / (L - done), with `done` tasks counted before the c new completions.
inline double update_eta_on_completion(double eta, int total_tasks, int completed_count, int just_completed) {
  if (total_tasks <= completed_count) throw std::invalid_argument("update_eta_on_completion: no task left");
  const double remaining = static_cast<double>(total_tasks - completed_count);
  return eta * (remaining + just_completed) / remaining;
}

struct ReplanEvent {
  double t = 0.0;
  std::string reason;  // new_task, degradation, failure
  bool adopted = false;
  double eta_before = 0.0;  // eta* before the event (after progress updates)
  double eta_after = 0.0;   // eta* after the event
  double eta_t = kInf;      // incumbent re-evaluation (degradation only)
  double eta_hat = kInf;    // candidate plan value
  double threshold = kInf;  // (1 + gamma) * eta_before (degradation only)
};

struct GanttRow {
  std::string robot;
  std::string subtask;
  std::string task;
  double start = 0.0;
  double end = 0.0;
  bool aborted = false;
};

struct TraceEntry {
  double t = 0.0;
  std::vector<std::string> props;
};

struct MissionReport {
  std::string scenario;
  std::string method;
  std::uint64_t seed = 0;
  std::map<std::string, double> release;
  std::map<std::string, double> completion;
  std::map<std::string, double> makespans;
  double average_makespan = 0.0;
  std::optional<double> weighted_makespan;
  double initial_eta = 0.0;
  double end_time = 0.0;
  int planning_calls = 0;
  SearchStats initial_search;
  std::vector<ReplanEvent> replan_events;
  std::vector<GanttRow> gantt;
  std::vector<TraceEntry> trace;
  std::vector<std::string> notes;
};

class Mission {
 public:
  Mission(const Scenario& s, std::shared_ptr<TargetData> data, Method method, std::uint64_t seed)
      : Mission(s, std::move(data), method, seed, ground_truth(s, seed)) {}

  Mission(const Scenario& s, std::shared_ptr<TargetData> data, Method method, std::uint64_t seed, TargetPaths truth)
      : s_(s), method_(method), seed_(seed), forecaster_(s, std::move(data), std::move(truth), method) {
    world_.dt = s.params.dt;
    world_.reach_threshold = s.params.reach_threshold;
    world_.semantics = s.params.precedence_semantics;
    world_.targets = s.target_names();
    for (const auto& r : s.team.robots) world_.robots.push_back({r.id, r.position, r.vmax, r.capabilities});
    state_ = make_world(world_, {});
    state_.t = 0.0;
    for (const auto& r : s.reactive) rules_.push_back({r.id, r.trigger, parse_scltl(r.response), false});
    failures_ = s.failures;
    std::stable_sort(failures_.begin(), failures_.end(),
                     [](const FailureSpec& a, const FailureSpec& b) { return a.t < b.t; });
    horizon_s_ = s.prediction.horizon;
    eta_step_ = s.params.eta_step < 0.0 ? s.params.dt : s.params.eta_step;
    report_.scenario = s.name;
    report_.method = to_string(method);
    report_.seed = seed;
  }

  MissionReport run() {
    // Tasks known at t = 0, including rules triggered at once.
    for (const auto& t : s_.tasks) add_task(t.id, parse_scltl(t.formula), 0.0, t.priority);
    const auto fired0 = fire_rules(0.0);
    release_rules(fired0, 0.0);
    if (!tasks_.empty()) {
      auto cand = plan_now(0.0);
      report_.initial_search = cand.stats;
      report_.initial_eta = cand.eta;
      adopt(cand);
      eta_star_ = cand.eta;
    }
    long k = 0;
    while (!finished()) {
      const double t = static_cast<double>(++k) * s_.params.dt;
      if (t > s_.params.mission_max_time + kTimeEps) {
        throw MissionTimeoutError("mission not finished by t = " + std::to_string(s_.params.mission_max_time) + " s");
      }
      tick(t);
    }
    finalize();
    return report_;
  }

  double eta_star() const noexcept { return eta_star_; }

 private:
  struct TaskState {
    std::string id;
    CompiledTask compiled;
    double release = 0.0;
    std::optional<double> priority;
    std::vector<int> items;  // global item ids
    bool done = false;
    double completion = kInf;
  };

  struct Residual {
    PlanningProblem p;
    std::vector<int> item_global;
    std::vector<int> robot_global;
    Assignment current;  // incumbent's remaining decisions, local indices
  };

  struct Candidate {
    Residual res;
    SearchResult search;
    SearchStats stats;
    double eta = kInf;
  };

  // ---- tasks ---------------------------------------------------------------

  void add_task(const std::string& id, const Formula& f, double release, std::optional<double> priority) {
    TaskState ts{id, compile_task(id, f), release, priority, {}, false, kInf};
    const int offset = static_cast<int>(world_.items.size());
    const int task_index = static_cast<int>(tasks_.size());
    world_.tasks.push_back(id);
    for (const auto& sub : ts.compiled.poset.subtasks) {
      PlanItem it;
      it.name = sub.name;
      it.task = task_index;
      auto tgt = std::find(world_.targets.begin(), world_.targets.end(), sub.target);
      if (tgt == world_.targets.end()) throw ScenarioError("unknown target '" + sub.target + "'");
      it.target = static_cast<int>(tgt - world_.targets.begin());
      if (sub.collab == kReachCollab) {
        auto r = s_.team.robot_index(*sub.robot);
        if (!r) throw ScenarioError("unknown robot '" + *sub.robot + "'");
        it.pinned_robot = static_cast<int>(*r);
        it.actions = {kReachCollab};
      } else {
        const auto& c = s_.team.collaboration(sub.collab);
        it.actions = c.actions;
        it.duration = c.duration;
      }
      for (int q : ts.compiled.poset.predecessors(sub.id)) it.preds.push_back(offset + q);
      it.letter = sub.letter();
      ts.items.push_back(static_cast<int>(world_.items.size()));
      world_.items.push_back(std::move(it));
      state_.status.push_back(ItemStatus::Pending);
      state_.start.push_back(kInf);
      state_.completion.push_back(kInf);
      state_.group.emplace_back();
      state_.rank.push_back(-1);
    }
    phi_ = tasks_.empty() ? ts.compiled.formula : Formula::conj(phi_, ts.compiled.formula);
    tasks_.push_back(std::move(ts));
    refresh_exclusions();
  }

  // Exclusions across every released task (checked for interleaving robustness).
  void refresh_exclusions() {
    std::vector<const CompiledTask*> parts;
    for (const auto& t : tasks_) parts.push_back(&t.compiled);
    const RPoset merged = merge_task_posets(parts);
    for (auto& it : world_.items) it.exclusive.clear();
    for (const auto& set : merged.exclusion)
      for (int a : set)
        for (int b : set)
          if (a != b) world_.items[a].exclusive.push_back(b);
  }

  std::vector<std::string> fire_rules(double t) {
    std::vector<std::string> out;
    for (const auto& r : rules_) {
      if (r.fired) continue;
      bool hit = false;
      if (r.trigger.kind == Trigger::Kind::Time) {
        hit = t + kTimeEps >= r.trigger.t;
      } else {
        const auto m = std::find(world_.targets.begin(), world_.targets.end(), r.trigger.target) - world_.targets.begin();
        const Vec2 tp = forecaster_.truth().at(m, t);
        for (std::size_t i = 0; i < world_.robots.size() && !hit; ++i) {
          if (!state_.alive[i]) continue;
          if (r.trigger.robot && world_.robots[i].id != *r.trigger.robot) continue;
          hit = distance(state_.pos[i], tp) <= r.trigger.radius;
        }
      }
      if (hit) out.push_back(r.id);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  void release_rules(const std::vector<std::string>& fired, double t) {
    if (fired.empty()) return;
    const Formula before = phi_;
    for (const auto& id : fired) {
      auto rule = std::find_if(rules_.begin(), rules_.end(), [&](const ReactiveRule& r) { return r.id == id; });
      const ReactiveSpec& spec = *std::find_if(s_.reactive.begin(), s_.reactive.end(),
                                               [&](const ReactiveSpec& r) { return r.id == id; });
      add_task(id, Formula::eventually(rule->response), t, spec.priority);
    }
    phi_ = update_formula(before, rules_, fired);
  }

  bool finished() const {
    for (const auto& t : tasks_)
      if (!t.done) return false;
    for (const auto& r : rules_)
      if (!r.fired && r.trigger.kind == Trigger::Kind::Time) return false;
    return true;
  }

  // ---- planning ------------------------------------------------------------

  Residual residual(double t) const {
    Residual r;
    PlanningProblem& p = r.p;
    p.t_now = t;
    p.dt = world_.dt;
    p.reach_threshold = world_.reach_threshold;
    p.max_time = t + s_.params.sim_max_time;
    p.semantics = world_.semantics;
    p.targets = world_.targets;
    std::vector<int> robot_local(world_.robots.size(), -1);
    for (std::size_t i = 0; i < world_.robots.size(); ++i) {
      if (!state_.alive[i]) continue;
      robot_local[i] = static_cast<int>(p.robots.size());
      PlanRobot pr = world_.robots[i];
      pr.position = state_.pos[i];
      p.robots.push_back(std::move(pr));
      r.robot_global.push_back(static_cast<int>(i));
    }
    std::vector<int> task_local(tasks_.size(), -1);
    const bool weighted = any_priority();
    for (std::size_t l = 0; l < tasks_.size(); ++l) {
      if (tasks_[l].done) continue;
      task_local[l] = static_cast<int>(p.tasks.size());
      p.tasks.push_back(tasks_[l].id);
      if (weighted) p.task_weights.push_back(*tasks_[l].priority);
    }
    std::vector<int> item_local(world_.items.size(), -1);
    for (std::size_t i = 0; i < world_.items.size(); ++i) {
      if (state_.status[i] == ItemStatus::Done) continue;
      item_local[i] = static_cast<int>(r.item_global.size());
      r.item_global.push_back(static_cast<int>(i));
    }
    for (int g : r.item_global) {
      PlanItem it = world_.items[g];
      it.task = task_local[it.task];
      if (it.pinned_robot >= 0) it.pinned_robot = robot_local[it.pinned_robot] >= 0 ? robot_local[it.pinned_robot] : kUnavailable;
      auto remap = [&](const std::vector<int>& ids) {
        std::vector<int> out;
        for (int q : ids)
          if (item_local[q] >= 0) out.push_back(item_local[q]);
        return out;
      };
      it.preds = remap(it.preds);
      it.exclusive = remap(it.exclusive);
      it.status = state_.status[g];
      it.start = state_.start[g];
      it.completion = state_.completion[g];
      it.group.clear();
      if (it.status == ItemStatus::Executing)
        for (int rr : state_.group[g]) it.group.push_back(robot_local[rr]);
      p.items.push_back(std::move(it));
    }
    for (int g : state_.order) {
      if (state_.status[g] != ItemStatus::Pending || item_local[g] < 0) continue;
      Decision d{item_local[g], {}};
      bool ok = !state_.group[g].empty();
      for (int rr : state_.group[g]) {
        if (robot_local[rr] < 0) ok = false;
        d.group.push_back(robot_local[rr]);
      }
      if (ok) r.current.push_back(std::move(d));
    }
    return r;
  }

  bool any_priority() const {
    return std::any_of(tasks_.begin(), tasks_.end(), [](const TaskState& t) { return t.priority.has_value(); });
  }

  int horizon_for(double t) const {
    const int k = forecaster_.observation_index(t);
    const double t0 = static_cast<double>(k - s_.prediction.history_steps) * s_.prediction.dt;
    return forecaster_.horizon_steps(t - t0 + horizon_s_);
  }

  RiskConfig risk_config() const {
    RiskConfig cfg = s_.risk_config();
    cfg.uncertainty_term = forecaster_.settings().uncertainty_term;
    cfg.seed = search_seed();
    return cfg;
  }

  Candidate plan_now(double t) {
    Candidate c;
    c.res = residual(t);
    const PredictionBundle b = forecaster_.bundle(t, horizon_for(t));
    c.search = cp_mcts(c.res.p, b, risk_config());
    ++report_.planning_calls;
    c.stats = c.search.stats;
    c.eta = c.search.cvar;
    return c;
  }

  std::uint64_t search_seed() const { return derive_seed(seed_, 0x91a7); }

  double evaluate_incumbent(double t) {
    const Residual r = residual(t);
    const PredictionBundle b = forecaster_.bundle(t, horizon_for(t));
    bool zero = true;
    for (const auto& f : b.forecasts)
      zero &= std::all_of(f.radius.begin(), f.radius.end(), [](double g) { return g == 0.0; });
    const int z = zero ? 1 : s_.params.z;
    // Same sample stream as the planner, so an unchanged forecast re-evaluates to eta_hat.
    const auto samples = draw_samples(b, z, derive_seed(search_seed(), kSampleStream), s_.params.sample_smoothness);
    return evaluate(r.p, r.current, samples, s_.params.alpha).cvar;
  }

  void adopt(const Candidate& c) {
    std::vector<int> order;
    for (int g : state_.order)
      if (state_.status[g] == ItemStatus::Executing) order.push_back(g);
    for (const Decision& d : c.search.plan.assignment) {
      const int g = c.res.item_global[d.item];
      state_.group[g].clear();
      for (int r : d.group) state_.group[g].push_back(c.res.robot_global[r]);
      order.push_back(g);
    }
    for (std::size_t i = 0; i < state_.rank.size(); ++i) state_.rank[i] = -1;
    for (std::size_t k = 0; k < order.size(); ++k) state_.rank[order[k]] = static_cast<int>(k);
    state_.order = order;
    for (std::size_t r = 0; r < state_.queue.size(); ++r) {
      state_.queue[r].clear();
      state_.head[r] = 0;
      if (!state_.alive[r]) continue;
      for (int g : order)
        if (std::find(state_.group[g].begin(), state_.group[g].end(), static_cast<int>(r)) != state_.group[g].end())
          state_.queue[r].push_back(g);
    }
    // Remaining horizon: incumbent's predicted finish plus a margin.
    double finish = c.res.p.t_now;
    for (double v : c.search.plan.predicted.completion)
      if (std::isfinite(v)) finish = std::max(finish, v);
    horizon_s_ = std::max(s_.params.dt, (finish - c.res.p.t_now) * (1.0 + s_.prediction.horizon_margin));
  }

  // ---- execution -----------------------------------------------------------

  void tick(double t) {
    const TickEvents ev = advance_world(world_, forecaster_.truth(), state_, t);
    for (int i : ev.completed)
      for (int r : state_.group[i])
        report_.gantt.push_back({world_.robots[r].id, world_.items[i].name, tasks_[world_.items[i].task].id,
                                 state_.start[i], state_.completion[i], false});
    if (!ev.started.empty()) {
      std::set<std::string> props;
      for (int i : ev.started)
        for (const auto& p : world_.items[i].letter) props.insert(p.to_string());
      report_.trace.push_back({t, {props.begin(), props.end()}});
      Letter letter;
      for (int i : ev.started) letter.insert(world_.items[i].letter.begin(), world_.items[i].letter.end());
      letters_.push_back({t, letter});
    }

    // Tasks finished during this step.
    const int done_before = static_cast<int>(std::count_if(tasks_.begin(), tasks_.end(), [](const TaskState& x) { return x.done; }));
    int just_done = 0;
    for (auto& task : tasks_) {
      if (task.done) continue;
      bool all = true;
      double c = task.release;
      for (int i : task.items) {
        all &= state_.status[i] == ItemStatus::Done;
        c = std::max(c, state_.completion[i]);
      }
      if (all) {
        task.done = true;
        task.completion = c;
        ++just_done;
      }
    }

    const bool failure_replan = apply_failures(t);
    const auto fired = fire_rules(t);

    if (!fired.empty()) {
      release_rules(fired, t);
      replan(t, "new_task", true);
    } else if (failure_replan) {
      replan(t, "failure", true);
    } else {
      const int total = static_cast<int>(tasks_.size());
      const int done_after = done_before + just_done;
      // Completions are seen one tick late, so they are folded in before the decrement.
      // Counting the completed set after this step's completions keeps eta* equal to
      // the mean remaining time over open tasks.
      if (just_done > 0 && total > done_after)
        eta_star_ = update_eta_on_completion(eta_star_, total, done_after, just_done);
      eta_star_ = std::max(0.0, eta_star_ - eta_step_);
      if (done_after < total) {
        const double eta_t = evaluate_incumbent(t);
        const double threshold = (1.0 + s_.params.gamma) * eta_star_;
        if (eta_t > threshold) {
          ReplanEvent e;
          e.t = t;
          e.reason = "degradation";
          e.eta_before = eta_star_;
          e.eta_t = eta_t;
          e.threshold = threshold;
          Candidate c = plan_now(t);
          e.eta_hat = c.eta;
          e.adopted = c.eta < eta_t;
          if (e.adopted) {
            adopt(c);
            eta_star_ = c.eta;
          } else {
            eta_star_ = eta_t;
          }
          e.eta_after = eta_star_;
          report_.replan_events.push_back(e);
        }
      }
    }
  }

  void replan(double t, const std::string& reason, bool unconditional) {
    ReplanEvent e;
    e.t = t;
    e.reason = reason;
    e.eta_before = eta_star_;
    Candidate c = plan_now(t);
    e.eta_hat = c.eta;
    e.adopted = unconditional;
    adopt(c);
    eta_star_ = c.eta;
    e.eta_after = eta_star_;
    report_.replan_events.push_back(e);
  }

  // Returns true when a failed robot held work that must be rescheduled.
  bool apply_failures(double t) {
    bool need = false;
    while (next_failure_ < failures_.size() && failures_[next_failure_].t <= t + kTimeEps) {
      const auto& f = failures_[next_failure_++];
      const int r = static_cast<int>(*s_.team.robot_index(f.robot));
      if (!state_.alive[r]) continue;
      state_.alive[r] = false;
      report_.notes.push_back("robot " + f.robot + " failed at t=" + std::to_string(t));
      for (std::size_t k = state_.head[r]; k < state_.queue[r].size(); ++k) {
        const int i = state_.queue[r][k];
        if (state_.status[i] == ItemStatus::Done) continue;
        need = true;
        if (state_.status[i] == ItemStatus::Executing) {
          for (int m : state_.group[i])
            report_.gantt.push_back({world_.robots[m].id, world_.items[i].name, tasks_[world_.items[i].task].id,
                                     state_.start[i], t, true});
          state_.status[i] = ItemStatus::Pending;
          state_.start[i] = kInf;
          state_.completion[i] = kInf;
        }
      }
      state_.queue[r].clear();
      state_.head[r] = 0;
    }
    return need;
  }

  void finalize() {
    std::vector<double> values;
    std::map<std::string, double> prio;
    for (const auto& t : tasks_) {
      report_.release[t.id] = t.release;
      report_.completion[t.id] = t.completion;
      report_.makespans[t.id] = t.completion - t.release;
      values.push_back(t.completion - t.release);
      if (t.priority) prio[t.id] = *t.priority;
    }
    report_.average_makespan = task_average(values, {});
    if (any_priority()) report_.weighted_makespan = weighted_makespan(report_.makespans, prio);
    report_.end_time = state_.t;
    std::stable_sort(report_.gantt.begin(), report_.gantt.end(), [](const GanttRow& a, const GanttRow& b) {
      return std::tie(a.start, a.robot) < std::tie(b.start, b.robot);
    });
  }

 public:
  /// Checks every task formula on the letters emitted since its release.
  bool trace_satisfies_tasks() const {
    for (const auto& task : tasks_) {
      std::vector<Letter> w;
      for (const auto& [t, l] : letters_)
        if (t + kTimeEps >= task.release) w.push_back(l);
      if (!accepts(task.compiled.automaton, w)) return false;
    }
    return true;
  }

  const Formula& formula() const noexcept { return phi_; }

 private:
  const Scenario& s_;
  Method method_;
  std::uint64_t seed_;
  Forecaster forecaster_;
  PlanningProblem world_;
  WorldState state_;
  std::vector<TaskState> tasks_;
  std::vector<ReactiveRule> rules_;
  std::vector<FailureSpec> failures_;
  std::size_t next_failure_ = 0;
  Formula phi_ = Formula::truth();
  double eta_star_ = 0.0;
  double eta_step_ = 0.5;
  double horizon_s_ = 120.0;
  std::vector<std::pair<double, Letter>> letters_;
  MissionReport report_;
};

inline MissionReport run_mission(const Scenario& s, std::shared_ptr<TargetData> data, Method method,
                                 std::uint64_t seed) {
  return Mission(s, std::move(data), method, seed).run();
}

inline nlohmann::json to_json(const MissionReport& r) {
  auto num = [](double v) -> nlohmann::json { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : r.replan_events)
    events.push_back({{"t", e.t}, {"reason", e.reason}, {"adopted", e.adopted}, {"eta_before", num(e.eta_before)},
                      {"eta_after", num(e.eta_after)}, {"eta_t", num(e.eta_t)}, {"eta_hat", num(e.eta_hat)},
                      {"threshold", num(e.threshold)}});
  nlohmann::json gantt = nlohmann::json::array();
  for (const auto& g : r.gantt)
    gantt.push_back({{"robot", g.robot}, {"subtask", g.subtask}, {"task", g.task}, {"start", g.start},
                     {"end", g.end}, {"aborted", g.aborted}});
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : r.trace) trace.push_back({{"t", t.t}, {"props", t.props}});
  nlohmann::json j{{"scenario", r.scenario},
                   {"method", r.method},
                   {"seed", r.seed},
                   {"makespans", r.makespans},
                   {"release", r.release},
                   {"average_makespan", r.average_makespan},
                   {"initial_eta", num(r.initial_eta)},
                   {"end_time", r.end_time},
                   {"planning_calls", r.planning_calls},
                   {"initial_search", to_json(r.initial_search)},
                   {"replan_events", events},
                   {"gantt", gantt},
                   {"trace", trace},
                   {"notes", r.notes}};
  if (r.weighted_makespan) j["weighted_makespan"] = *r.weighted_makespan;
  return j;
}

}  // namespace umbrella
