#pragma once

// Risk-aware Monte Carlo tree search over subtask assignments.

#include <chrono>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "umbrella/common.hpp"
#include "umbrella/prediction.hpp"
#include "umbrella/simulation.hpp"

namespace umbrella {

struct RiskConfig {
  double alpha = 0.05;        // risk level
  int z = 50;                 // samples per evaluation
  double Q = 1.5;             // UCT exploration constant
  double epsilon = 0.3;       // rollout random factor
  double t_b = 10.0;          // wall-clock budget, s (used when iterations == 0)
  long iterations = 0;        // iteration budget; 0 selects the wall-clock budget
  int branching_limit = 64;   // groups kept per subtask during expansion
  bool uncertainty_term = true;
  double sample_smoothness = 0.0;
  int convergence_window = 100;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ScenarioError("alpha must lie in (0, 1]");
    if (z < 1) throw ScenarioError("z must be at least 1");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ScenarioError("epsilon must lie in [0, 1]");
    if (Q < 0.0) throw ScenarioError("Q must be nonnegative");
    if (branching_limit < 1) throw ScenarioError("branching_limit must be positive");
  }
};

// ---------------------------------------------------------------------------
// Risk measures
// ---------------------------------------------------------------------------

struct RiskEstimate {
  double var = kInf;
  double cvar = kInf;
  std::vector<double> samples;
  int capped = 0;  // samples that hit the simulation time cap
};

/// Empirical VaR (upper alpha-quantile) and CVaR (mean of the samples at or above it).
inline RiskEstimate risk_measures(std::vector<double> samples, double alpha) {
  if (samples.empty()) throw std::invalid_argument("risk_measures: no samples");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  RiskEstimate r;
  r.samples = samples;
  std::sort(samples.begin(), samples.end());
  const long long z = static_cast<long long>(samples.size());
  const long long tail = std::clamp<long long>(robust_ceil(alpha * static_cast<double>(z)), 1, z);
  r.var = samples[z - tail];
  double s = 0.0;
  int n = 0;
  for (double v : samples)
    if (v >= r.var) {
      s += v;
      ++n;
    }
  r.cvar = s / n;
  return r;
}

/// Average-makespan distribution of `a` over sampled target paths.
inline RiskEstimate evaluate(const PlanningProblem& p, const Assignment& a, const std::vector<TargetPaths>& samples,
                             double alpha) {
  std::vector<double> values;
  values.reserve(samples.size());
  int capped = 0;
  for (const auto& s : samples) {
    SimResult r = simulate(p, a, s);
    if (r.exceeded) {
      ++capped;
      values.push_back(p.max_time - p.t_now);
    } else {
      values.push_back(r.objective);
    }
  }
  RiskEstimate est = risk_measures(std::move(values), alpha);
  est.capped = capped;
  return est;
}

inline std::vector<TargetPaths> draw_samples(const PredictionBundle& b, int z, std::uint64_t seed, double smoothness) {
  Rng rng(seed);
  std::vector<TargetPaths> out;
  out.reserve(z);
  for (int k = 0; k < z; ++k) out.push_back(sample_paths(b, rng, smoothness));
  return out;
}

// ---------------------------------------------------------------------------
// Plans
// ---------------------------------------------------------------------------

struct PlanStep {
  double t = 0.0;  // synchronized start time
  std::string action;
  std::string target;
  std::string subtask;
};

struct Plan {
  Assignment assignment;
  std::vector<std::vector<PlanStep>> robot_steps;  // per robot, in time order
  SimResult predicted;                             // on the mean forecast
  RiskEstimate risk;
};

inline Plan make_plan(const PlanningProblem& p, const Assignment& a, const TargetPaths& mean, RiskEstimate risk) {
  Plan plan{a, std::vector<std::vector<PlanStep>>(p.robots.size()), simulate(p, a, mean), std::move(risk)};
  for (const Decision& d : a) {
    const PlanItem& it = p.items[d.item];
    for (std::size_t k = 0; k < d.group.size(); ++k) {
      plan.robot_steps[d.group[k]].push_back(
          {plan.predicted.start[d.item], it.actions[k], p.targets[it.target], it.name});
    }
  }
  for (auto& steps : plan.robot_steps)
    std::stable_sort(steps.begin(), steps.end(), [](const PlanStep& x, const PlanStep& y) { return x.t < y.t; });
  return plan;
}

inline nlohmann::json to_json(const PlanningProblem& p, const Plan& plan) {
  auto num = [](double v) -> nlohmann::json { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json robots = nlohmann::json::object();
  for (std::size_t r = 0; r < p.robots.size(); ++r) {
    nlohmann::json seq = nlohmann::json::array();
    for (const auto& s : plan.robot_steps[r]) seq.push_back({num(s.t), s.action, s.target});
    robots[p.robots[r].id] = seq;
  }
  nlohmann::json subtasks = nlohmann::json::object();
  for (const Decision& d : plan.assignment) {
    nlohmann::json g = nlohmann::json::array();
    for (int r : d.group) g.push_back(p.robots[r].id);
    subtasks[p.items[d.item].name] = {{"start", num(plan.predicted.start[d.item])},
                                      {"completion", num(plan.predicted.completion[d.item])},
                                      {"group", g}};
  }
  return {{"robots", robots},
          {"subtasks", subtasks},
          {"predicted_objective", num(plan.predicted.objective)},
          {"var", num(plan.risk.var)},
          {"cvar", num(plan.risk.cvar)},
          {"samples", plan.risk.samples}};
}

// ---------------------------------------------------------------------------
// Search tree
// ---------------------------------------------------------------------------

struct SearchNode {
  int parent = -1;
  std::vector<int> children;
  Decision decision;  // meaningless at the root
  int depth = 0;
  long visits = 0;
  double value_sum = 0.0;
  double zeta = 0.0;
  std::vector<double> predicted;  // predicted completion per item (kInf if unassigned)
  bool expanded = false;
  bool terminal = false;
  bool pruned = false;     // infinite zeta: never selected
  bool exhausted = false;  // subtree fully explored

  double mean_value() const { return visits > 0 ? value_sum / static_cast<double>(visits) : 0.0; }
};

inline double uct_score(double mean, long visits, long parent_visits, double Q) {
  if (visits == 0) return kInf;
  const double B = static_cast<double>(std::max<long>(parent_visits, 1));
  return mean + Q * std::sqrt(std::log(B) / static_cast<double>(visits));
}

class SearchTree {
 public:
  SearchTree() { nodes_.emplace_back(); }

  int root() const noexcept { return 0; }
  SearchNode& operator[](int i) { return nodes_[i]; }
  const SearchNode& operator[](int i) const { return nodes_[i]; }
  std::size_t size() const noexcept { return nodes_.size(); }

  int add_child(int parent, Decision d) {
    SearchNode n;
    n.parent = parent;
    n.decision = std::move(d);
    n.depth = nodes_[parent].depth + 1;
    nodes_.push_back(std::move(n));
    const int id = static_cast<int>(nodes_.size()) - 1;
    nodes_[parent].children.push_back(id);
    return id;
  }

  /// Decisions on the path from the root to `node`.
  Assignment assignment(int node) const {
    Assignment a(nodes_[node].depth);
    for (int n = node; n != 0; n = nodes_[n].parent) a[nodes_[n].depth - 1] = nodes_[n].decision;
    return a;
  }

  /// Adds one visit and `xi` to every node from `node` up to the root; returns the number updated.
  int backpropagate(int node, double xi) {
    int count = 0;
    for (int n = node; n != -1; n = nodes_[n].parent) {
      nodes_[n].visits += 1;
      nodes_[n].value_sum += xi;
      ++count;
    }
    return count;
  }

  /// Marks `node` exhausted and propagates to ancestors whose children are all closed.
  void close(int node) {
    nodes_[node].exhausted = true;
    for (int n = nodes_[node].parent; n != -1; n = nodes_[n].parent) {
      const auto& ch = nodes_[n].children;
      const bool all = std::all_of(ch.begin(), ch.end(), [&](int c) { return nodes_[c].exhausted || nodes_[c].pruned; });
      if (!all || !nodes_[n].expanded) break;
      nodes_[n].exhausted = true;
    }
  }

  /// Descends from the root by UCT over open children (unvisited first, in creation
  /// order) to a node that is unexpanded or terminal. Returns -1 when the tree is exhausted.
  int select(double Q) {
    while (!nodes_[0].exhausted) {
      int n = 0;
      bool restart = false;
      while (nodes_[n].expanded && !nodes_[n].terminal) {
        int best = -1;
        double best_score = -kInf;
        for (int c : nodes_[n].children) {
          const SearchNode& ch = nodes_[c];
          if (ch.pruned || ch.exhausted) continue;
          const double s = uct_score(ch.mean_value(), ch.visits, nodes_[n].visits, Q);
          if (s > best_score) {
            best_score = s;
            best = c;
          }
        }
        if (best < 0) {
          close(n);
          restart = true;
          break;
        }
        n = best;
      }
      if (!restart) return n;
    }
    return -1;
  }

 private:
  std::vector<SearchNode> nodes_;
};

/// Subtasks first in some robot's queue that appear later in no robot's queue.
/// Queues include subtasks already executing.
inline std::vector<int> key_subtasks(const std::vector<std::vector<int>>& queues) {
  std::vector<int> out;
  for (const auto& q : queues) {
    if (q.empty()) continue;
    const int w = q.front();
    bool later = false;
    for (const auto& q2 : queues)
      if (std::find(q2.begin() + (q2.empty() ? 0 : 1), q2.end(), w) != q2.end()) later = true;
    if (!later && std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::vector<int>> robot_queues(const PlanningProblem& p, const Assignment& a) {
  return make_world(p, a).queue;
}

inline std::vector<int> key_subtasks(const PlanningProblem& p, const Assignment& a) {
  return key_subtasks(robot_queues(p, a));
}

/// Uncertainty-adjusted mean completion time of the assigned subtasks.
///
/// Predicted completions are measured from t_now. A key subtask adds
/// G(T_hat) / (min group speed - target speed bound); it is infinite when the
/// slowest group member is not faster than the target.
inline double zeta(const PlanningProblem& p, const Assignment& a, const SimResult& sim, const PredictionBundle& b,
                   bool uncertainty_term = true) {
  std::vector<int> assigned;
  for (std::size_t i = 0; i < p.items.size(); ++i)
    if (p.items[i].status == ItemStatus::Executing) assigned.push_back(static_cast<int>(i));
  for (const Decision& d : a) assigned.push_back(d.item);
  if (assigned.empty()) return 0.0;
  double sum = 0.0;
  for (int i : assigned) {
    if (!std::isfinite(sim.completion[i])) return kInf;
    sum += sim.completion[i] - p.t_now;
  }
  if (uncertainty_term) {
    for (int w : key_subtasks(p, a)) {
      const PlanItem& it = p.items[w];
      if (it.status == ItemStatus::Executing) continue;
      std::vector<int> group;
      for (const Decision& d : a)
        if (d.item == w) group = d.group;
      double vmin = kInf;
      for (int r : group) vmin = std::min(vmin, p.robots[r].vmax);
      const std::size_t m = b.index(p.targets[it.target]);
      const double vstar = b.forecasts[m].vmax;
      if (vmin <= vstar) return kInf;
      sum += b.radius_at(m, sim.completion[w]) / (vmin - vstar);
    }
  }
  return sum / static_cast<double>(assigned.size());
}

/// Key-subtask completion bounds T_hat + T_hat^e for a complete assignment.
struct KeyBound {
  int item = 0;
  double predicted = kInf;
  double bound = kInf;
};

inline std::vector<KeyBound> key_subtask_bounds(const PlanningProblem& p, const Assignment& a,
                                                const PredictionBundle& b) {
  const SimResult sim = simulate(p, a, b.mean_paths());
  std::vector<KeyBound> out;
  for (int w : key_subtasks(p, a)) {
    const PlanItem& it = p.items[w];
    KeyBound kb{w, sim.completion[w], kInf};
    if (it.status == ItemStatus::Executing) {
      kb.bound = kb.predicted;
    } else {
      double vmin = kInf;
      for (const Decision& d : a)
        if (d.item == w)
          for (int r : d.group) vmin = std::min(vmin, p.robots[r].vmax);
      const std::size_t m = b.index(p.targets[it.target]);
      const double vstar = b.forecasts[m].vmax;
      if (vmin > vstar && std::isfinite(kb.predicted)) kb.bound = kb.predicted + b.radius_at(m, kb.predicted) / (vmin - vstar);
    }
    out.push_back(kb);
  }
  return out;
}

/// Throws InfeasibleError when some pending subtask has no capable group.
inline void check_capability(const PlanningProblem& p) {
  for (std::size_t i = 0; i < p.items.size(); ++i) {
    if (p.items[i].status != ItemStatus::Pending) continue;
    if (feasible_groups(p, static_cast<int>(i)).empty()) {
      throw InfeasibleError("no available robot group can perform subtask '" + p.items[i].name + "'");
    }
  }
}

/// Groups for `item` in enumeration order, truncated to the `limit` with the
/// earliest simulated start when there are more.
inline std::vector<std::vector<int>> ranked_groups(const PlanningProblem& p, const Assignment& base, int item,
                                                   const TargetPaths& mean, int limit) {
  auto groups = feasible_groups(p, item);
  if (static_cast<int>(groups.size()) <= limit) return groups;
  std::vector<std::pair<double, std::size_t>> keyed;
  Assignment a = base;
  a.push_back({item, {}});
  for (std::size_t g = 0; g < groups.size(); ++g) {
    a.back().group = groups[g];
    const SimResult r = simulate(p, a, mean, {item});
    keyed.emplace_back(r.start[item], g);
  }
  std::stable_sort(keyed.begin(), keyed.end());
  std::vector<std::vector<int>> out;
  for (int k = 0; k < limit; ++k) out.push_back(groups[keyed[k].second]);
  return out;
}

/// Completes a partial assignment: uniformly random next subtask; with probability
/// epsilon a uniformly random feasible group, otherwise the group that starts earliest.
inline Assignment rollout(const PlanningProblem& p, Assignment a, const TargetPaths& mean, double epsilon, Rng& rng) {
  std::vector<bool> assigned(p.items.size(), false);
  for (const Decision& d : a) assigned[d.item] = true;
  while (true) {
    const auto avail = available_items(p, assigned);
    if (avail.empty()) break;
    const int item = avail[rng.index(avail.size())];
    const auto groups = feasible_groups(p, item);
    if (groups.empty()) throw DeadlockError("no feasible group for subtask '" + p.items[item].name + "'");
    std::vector<int> chosen;
    if (rng.bernoulli(epsilon)) {
      chosen = groups[rng.index(groups.size())];
    } else {
      double best = kInf;
      a.push_back({item, {}});
      for (const auto& g : groups) {
        a.back().group = g;
        const SimResult r = simulate(p, a, mean, {item});
        if (r.start[item] < best) {
          best = r.start[item];
          chosen = g;
        }
      }
      a.pop_back();
      if (chosen.empty()) throw DeadlockError("no group can start subtask '" + p.items[item].name + "'");
    }
    a.push_back({item, std::move(chosen)});
    assigned[item] = true;
  }
  return a;
}

struct SearchStats {
  long iterations = 0;
  long nodes = 0;             // tree nodes created (root included)
  long simulated = 0;         // nodes that entered rollout + evaluation
  long evaluations = 0;       // calls to evaluate
  long pruned = 0;            // children with infinite zeta
  long deadlocks = 0;         // rollouts that could not complete
  double first_solution_s = -1.0;
  long first_solution_iter = -1;
  double last_improvement_s = -1.0;
  long last_improvement_iter = -1;
  bool converged = false;     // incumbent unchanged for convergence_window iterations
  bool exhausted = false;     // the whole tree was enumerated
  double elapsed_s = 0.0;
  std::vector<std::pair<long, double>> incumbent_history;  // (iteration, cvar)
};

struct SearchResult {
  Plan plan;
  double cvar = kInf;
  SearchStats stats;
};

/// Backpropagated value 2 - eta / eta_best, clamped to [-1, 1].
inline double normalized_reward(double eta, double eta_best) {
  if (!std::isfinite(eta)) return -1.0;
  return std::clamp(2.0 - eta / eta_best, -1.0, 1.0);
}

/// Stream tag of the evaluation samples drawn from RiskConfig::seed.
inline constexpr std::uint64_t kSampleStream = 0x5a4d;

/// CP-MCTS. `bundle` supplies the mean forecast, regions and speed bounds; the
/// z evaluation samples are drawn once per call and shared by all evaluations.
inline SearchResult cp_mcts(const PlanningProblem& p, const PredictionBundle& bundle, const RiskConfig& cfg) {
  cfg.validate();
  check_capability(p);
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t_start).count(); };

  const TargetPaths mean = bundle.mean_paths();
  const auto samples = draw_samples(bundle, cfg.z, derive_seed(cfg.seed, kSampleStream), cfg.sample_smoothness);
  Rng rng(derive_seed(cfg.seed, 0x7011));

  SearchResult out;
  SearchStats& st = out.stats;
  Assignment best;
  double best_eta = kInf;
  bool have_best = false;

  // Evaluates a complete assignment, updates the incumbent and returns the clamped xi.
  auto consider = [&](const Assignment& a) -> double {
    RiskEstimate est = evaluate(p, a, samples, cfg.alpha);
    ++st.evaluations;
    const double eta = est.cvar;
    if (!have_best || eta < best_eta) {
      if (!have_best) {
        st.first_solution_s = elapsed();
        st.first_solution_iter = st.iterations;
      }
      best_eta = eta;
      best = a;
      have_best = true;
      out.plan.risk = std::move(est);
      st.last_improvement_s = elapsed();
      st.last_improvement_iter = st.iterations;
      st.incumbent_history.emplace_back(st.iterations, eta);
    }
    return normalized_reward(eta, best_eta);
  };

  std::vector<bool> no_assignment(p.items.size(), false);
  if (available_items(p, no_assignment).empty()) {
    consider({});
    out.plan = make_plan(p, {}, mean, out.plan.risk);
    out.cvar = best_eta;
    st.nodes = 1;
    st.exhausted = true;
    st.elapsed_s = elapsed();
    return out;
  }

  SearchTree tree;
  auto budget_left = [&] {
    if (cfg.iterations > 0) return st.iterations < cfg.iterations;
    return elapsed() < cfg.t_b;
  };

  while (budget_left()) {
    const int leaf = tree.select(cfg.Q);
    if (leaf < 0) {
      st.exhausted = true;
      break;
    }
    ++st.iterations;
    const Assignment base = tree.assignment(leaf);
    std::vector<bool> assigned(p.items.size(), false);
    for (const Decision& d : base) assigned[d.item] = true;
    const auto avail = available_items(p, assigned);

    if (avail.empty()) {
      tree[leaf].terminal = true;
      tree[leaf].expanded = true;
      const double xi = consider(base);
      tree.backpropagate(leaf, xi);
      tree.close(leaf);
    } else {
      tree[leaf].expanded = true;
      // Expansion: one child per available subtask and feasible group.
      std::vector<std::pair<int, int>> best_per_item;  // (item, child)
      for (int item : avail) {
        int best_child = -1;
        for (auto& g : ranked_groups(p, base, item, mean, cfg.branching_limit)) {
          const int c = tree.add_child(leaf, {item, std::move(g)});
          Assignment a = base;
          a.push_back(tree[c].decision);
          const SimResult sim = simulate(p, a, mean);
          tree[c].predicted = sim.completion;
          tree[c].zeta = sim.exceeded ? kInf : zeta(p, a, sim, bundle, cfg.uncertainty_term);
          if (!std::isfinite(tree[c].zeta)) {
            tree[c].pruned = true;
            ++st.pruned;
            continue;
          }
          if (best_child < 0 || tree[c].zeta < tree[best_child].zeta) best_child = c;
        }
        if (best_child >= 0) best_per_item.emplace_back(item, best_child);
      }
      if (leaf == tree.root() && best_per_item.empty()) {
        throw InfeasibleError("every first assignment has an infinite completion estimate");
      }
      // Simulation of the filtered children.
      for (const auto& entry : best_per_item) {
        const int c = entry.second;
        ++st.simulated;
        double xi = -1.0;
        try {
          const Assignment full = rollout(p, tree.assignment(c), mean, cfg.epsilon, rng);
          xi = consider(full);
        } catch (const DeadlockError&) {
          ++st.deadlocks;
        }
        tree.backpropagate(c, xi);
      }
      const auto& ch = tree[leaf].children;
      if (std::all_of(ch.begin(), ch.end(), [&](int c) { return tree[c].pruned; })) tree.close(leaf);
    }
    if (st.last_improvement_iter >= 0 && st.iterations - st.last_improvement_iter >= cfg.convergence_window) {
      st.converged = true;
    }
  }
  st.nodes = static_cast<long>(tree.size());
  st.elapsed_s = elapsed();
  if (!have_best) throw InfeasibleError("search found no complete plan");
  RiskEstimate risk = out.plan.risk;
  out.plan = make_plan(p, best, mean, std::move(risk));
  out.cvar = best_eta;
  return out;
}

inline nlohmann::json to_json(const SearchStats& s) {
  return {{"iterations", s.iterations},
          {"nodes", s.nodes},
          {"simulated", s.simulated},
          {"evaluations", s.evaluations},
          {"pruned", s.pruned},
          {"deadlocks", s.deadlocks},
          {"first_solution_s", s.first_solution_s},
          {"first_solution_iter", s.first_solution_iter},
          {"convergence_s", s.last_improvement_s},
          {"convergence_iter", s.last_improvement_iter},
          {"converged", s.converged},
          {"exhausted", s.exhausted},
          {"elapsed_s", s.elapsed_s}};
}

}  // namespace umbrella
