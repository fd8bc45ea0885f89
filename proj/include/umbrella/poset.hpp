#pragma once

// Relaxed partially ordered sets of subtasks extracted from task automata.

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "umbrella/formula.hpp"

namespace umbrella {

/// Collaboration id used for subtasks that only require a named robot to reach a target.
inline const std::string kReachCollab = "reach";

struct Subtask {
  int id = 0;                       // index within its poset
  std::string name;                 // stable name, "<task>/<k>"
  std::string task;                 // owning task id
  std::vector<AtomicProp> label;    // positive literals enabling the transition
  std::string target;
  std::string collab;               // kReachCollab for reach propositions
  std::optional<std::string> robot; // pinned robot for reach propositions
  std::vector<AtomicProp> forbidden;

  Letter letter() const { return Letter(label.begin(), label.end()); }
};

enum class PrecedenceSemantics {
  StartStart,       // a successor may start once its predecessors have started
  StartCompletion,  // a successor may start once its predecessors have completed
};

struct RPoset {
  std::vector<Subtask> subtasks;
  std::vector<std::pair<int, int>> precedence;  // (before, after), transitively reduced
  std::vector<std::vector<int>> exclusion;      // sets whose members never execute concurrently

  std::size_t size() const noexcept { return subtasks.size(); }
  bool empty() const noexcept { return subtasks.empty(); }

  std::vector<int> predecessors(int w) const {
    std::vector<int> out;
    for (auto [a, b] : precedence)
      if (b == w) out.push_back(a);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Subtasks sharing an exclusion set with `w`.
  std::vector<int> excluded_with(int w) const {
    std::set<int> out;
    for (const auto& set : exclusion)
      if (std::find(set.begin(), set.end(), w) != set.end())
        for (int o : set)
          if (o != w) out.insert(o);
    return {out.begin(), out.end()};
  }

  std::optional<int> find(const std::string& name) const {
    for (const auto& s : subtasks)
      if (s.name == name) return s.id;
    return std::nullopt;
  }

  /// Restricts to the subtasks in `keep` (indices), renumbering them in order.
  RPoset restricted(const std::vector<int>& keep) const {
    std::vector<int> remap(subtasks.size(), -1);
    RPoset out;
    for (int k : keep) {
      remap[k] = static_cast<int>(out.subtasks.size());
      Subtask s = subtasks[k];
      s.id = remap[k];
      out.subtasks.push_back(std::move(s));
    }
    for (auto [a, b] : precedence)
      if (remap[a] >= 0 && remap[b] >= 0) out.precedence.emplace_back(remap[a], remap[b]);
    for (const auto& set : exclusion) {
      std::vector<int> r;
      for (int o : set)
        if (remap[o] >= 0) r.push_back(remap[o]);
      if (r.size() >= 2) out.exclusion.push_back(std::move(r));
    }
    return out;
  }
};

/// Returns every unassigned subtask whose predecessors are all assigned.
inline std::vector<int> available_subtasks(const RPoset& p, const std::vector<bool>& assigned) {
  std::vector<int> out;
  for (const auto& s : p.subtasks) {
    if (assigned.at(s.id)) continue;
    bool ready = true;
    for (auto [a, b] : p.precedence)
      if (b == s.id && !assigned.at(a)) {
        ready = false;
        break;
      }
    if (ready) out.push_back(s.id);
  }
  return out;
}

inline std::vector<int> available_subtasks(const RPoset& p, const std::set<int>& assigned) {
  std::vector<bool> mask(p.size(), false);
  for (int a : assigned) mask.at(a) = true;
  return available_subtasks(p, mask);
}

namespace detail {

inline std::vector<std::vector<int>> transitive_closure(std::size_t n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<int>> reach(n, std::vector<int>(n, 0));
  for (auto [a, b] : edges) reach[a][b] = 1;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (reach[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (reach[k][j]) reach[i][j] = 1;
  return reach;
}

inline std::vector<std::pair<int, int>> transitive_reduction(std::size_t n, const std::vector<std::pair<int, int>>& edges) {
  const auto reach = transitive_closure(n, edges);
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (!reach[i][j]) continue;
      bool implied = false;
      for (std::size_t k = 0; k < n && !implied; ++k)
        if (k != i && k != j && reach[i][k] && reach[k][j]) implied = true;
      if (!implied) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  return out;
}

// Walks every linear extension depth-first, carrying the automaton configuration
// along the prefix. `advance` maps a configuration and a letter to the successor
// configuration (nullopt = rejected); `accepting` judges a complete linearization.
template <typename Config, typename Advance, typename Accepting>
bool all_linearizations(const RPoset& p, const Config& init, Advance advance, Accepting accepting) {
  const std::size_t n = p.size();
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> succ(n);
  for (auto [a, b] : p.precedence) {
    ++indeg[b];
    succ[a].push_back(b);
  }
  std::vector<bool> used(n, false);
  std::function<bool(const Config&, std::size_t)> rec = [&](const Config& cfg, std::size_t depth) -> bool {
    if (depth == n) return accepting(cfg);
    for (std::size_t w = 0; w < n; ++w) {
      if (used[w] || indeg[w] != 0) continue;
      std::optional<Config> next = advance(cfg, p.subtasks[w].letter());
      if (!next) return false;
      used[w] = true;
      for (int s : succ[w]) --indeg[s];
      const bool ok = rec(*next, depth + 1);
      for (int s : succ[w]) ++indeg[s];
      used[w] = false;
      if (!ok) return false;
    }
    return true;
  };
  return rec(init, 0);
}

}  // namespace detail

inline constexpr std::size_t kMaxSoundnessSubtasks = 10;

/// Exhaustively checks that every linear extension of the precedence relation
/// induces a trace (one letter per subtask) accepted by the automaton.
inline bool check_poset_soundness(const RPoset& p, const FiniteAutomaton& a,
                                  std::size_t max_subtasks = kMaxSoundnessSubtasks) {
  if (p.size() > max_subtasks) {
    throw CapacityError("soundness check limited to " + std::to_string(max_subtasks) + " subtasks, got " +
                        std::to_string(p.size()));
  }
  using Config = std::vector<int>;
  return detail::all_linearizations(
      p, a.initial(),
      [&](const Config& c, const Letter& l) -> std::optional<Config> {
        Config next = a.step(c, l);
        if (next.empty()) return std::nullopt;
        return next;
      },
      [&](const Config& c) { return a.any_accepting(c); });
}

/// Like check_poset_soundness, but letters from `foreign` may additionally be
/// inserted anywhere, any number of times. Tracks the set of reachable
/// subset-configurations so every insertion pattern is covered.
inline bool check_poset_soundness_interleaved(const RPoset& p, const FiniteAutomaton& a,
                                              const std::vector<Letter>& foreign,
                                              std::size_t max_subtasks = kMaxSoundnessSubtasks) {
  if (p.size() > max_subtasks) {
    throw CapacityError("soundness check limited to " + std::to_string(max_subtasks) + " subtasks");
  }
  using Subset = std::vector<int>;
  using Config = std::set<Subset>;
  auto close = [&](Config c) -> std::optional<Config> {
    std::deque<Subset> work(c.begin(), c.end());
    while (!work.empty()) {
      Subset s = work.front();
      work.pop_front();
      for (const Letter& l : foreign) {
        Subset t = a.step(s, l);
        if (t.empty()) return std::nullopt;
        if (c.insert(t).second) work.push_back(std::move(t));
      }
    }
    return c;
  };
  auto init = close(Config{a.initial()});
  if (!init) return false;
  return detail::all_linearizations(
      p, *init,
      [&](const Config& c, const Letter& l) -> std::optional<Config> {
        Config next;
        for (const Subset& s : c) {
          Subset t = a.step(s, l);
          if (t.empty()) return std::nullopt;
          next.insert(std::move(t));
        }
        return close(std::move(next));
      },
      [&](const Config& c) {
        return std::all_of(c.begin(), c.end(), [&](const Subset& s) { return a.any_accepting(s); });
      });
}

/// Extracts an R-poset from a task automaton.
///
/// A shortest accepting run whose transitions each enable exactly one positive
/// proposition is selected by breadth-first search (ties go to smaller state ids).
/// Its transitions become subtasks, initially totally ordered. Precedence pairs are
/// then dropped greedily, widest span first, whenever every linearization stays
/// accepted. Negative literals of a transition guard that name another subtask's
/// label produce a mutual-exclusion set.
inline RPoset compute_poset(const FiniteAutomaton& a, const std::string& task = "task") {
  if (a.empty() || a.initial().empty()) throw EmptyLanguageError("task '" + task + "' is unsatisfiable");
  for (int s : a.initial())
    if (a.is_accepting(s)) return RPoset{};

  const std::size_t n = a.num_states();
  std::vector<int> parent_transition(n, -1);
  std::vector<int> depth(n, -1);
  std::deque<int> queue;
  std::vector<int> init = a.initial();
  std::sort(init.begin(), init.end());
  for (int s : init) {
    depth[s] = 0;
    queue.push_back(s);
  }
  int goal = -1;
  int goal_depth = -1;
  while (!queue.empty()) {
    const int s = queue.front();
    queue.pop_front();
    if (goal_depth >= 0 && depth[s] >= goal_depth) break;
    for (int k : a.outgoing(s)) {
      const Transition& t = a.transitions()[k];
      if (t.to == s || t.guard.positives().size() != 1) continue;
      if (depth[t.to] >= 0) continue;
      depth[t.to] = depth[s] + 1;
      parent_transition[t.to] = k;
      queue.push_back(t.to);
      if (a.is_accepting(t.to) && (goal < 0 || t.to < goal)) {
        goal = t.to;
        goal_depth = depth[t.to];
      }
    }
  }
  if (goal < 0) {
    throw EmptyLanguageError("task '" + task + "' has no accepting run made of single-proposition steps");
  }

  std::vector<const Transition*> run;
  for (int s = goal; parent_transition[s] >= 0; s = a.transitions()[parent_transition[s]].from) {
    run.push_back(&a.transitions()[parent_transition[s]]);
  }
  std::reverse(run.begin(), run.end());

  RPoset p;
  for (std::size_t k = 0; k < run.size(); ++k) {
    const AtomicProp prop = run[k]->guard.positives().front();
    Subtask w;
    w.id = static_cast<int>(k);
    w.name = task + "/" + std::to_string(k);
    w.task = task;
    w.label = {prop};
    w.target = prop.target;
    if (prop.kind == AtomicProp::Kind::Reach) {
      w.collab = kReachCollab;
      w.robot = prop.robot;
    } else {
      w.collab = prop.collab;
    }
    w.forbidden = run[k]->guard.negatives();
    p.subtasks.push_back(std::move(w));
  }

  const std::size_t m = p.size();
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
  p.precedence = pairs;
  if (m <= kMaxSoundnessSubtasks) {
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](auto x, auto y) { return (x.second - x.first) > (y.second - y.first); });
    for (auto pr : pairs) {
      auto it = std::find(p.precedence.begin(), p.precedence.end(), pr);
      const auto saved = p.precedence;
      p.precedence.erase(it);
      if (!check_poset_soundness(p, a)) p.precedence = saved;
    }
  }
  p.precedence = detail::transitive_reduction(m, p.precedence);

  std::set<std::vector<int>> excl;
  for (const auto& w : p.subtasks)
    for (const auto& f : w.forbidden)
      for (const auto& o : p.subtasks)
        if (o.id != w.id && std::find(o.label.begin(), o.label.end(), f) != o.label.end()) {
          excl.insert({std::min(w.id, o.id), std::max(w.id, o.id)});
        }
  p.exclusion.assign(excl.begin(), excl.end());
  return p;
}

/// A released task with its compiled automaton and poset.
struct CompiledTask {
  std::string id;
  Formula formula;
  FiniteAutomaton automaton;
  RPoset poset;
};

inline CompiledTask compile_task(const std::string& id, const Formula& f) {
  CompiledTask t{id, f, to_automaton(f), {}};
  t.poset = compute_poset(t.automaton, id);
  return t;
}

/// Unites per-task posets into one poset over all subtasks (task order preserved).
///
/// The union is sound for the conjunction when each task still accepts its
/// linearizations with the other tasks' events interleaved; this is verified
/// (for tasks small enough to enumerate) and a PosetError is raised otherwise.
/// Exclusion sets are extended across tasks: a subtask forbidding a proposition
/// never overlaps a subtask of another task whose label carries it.
inline RPoset merge_task_posets(const std::vector<const CompiledTask*>& tasks, bool verify = true) {
  RPoset out;
  std::vector<int> offset;
  for (const CompiledTask* t : tasks) {
    offset.push_back(static_cast<int>(out.subtasks.size()));
    for (Subtask s : t->poset.subtasks) {
      s.id += offset.back();
      out.subtasks.push_back(std::move(s));
    }
    for (auto [a, b] : t->poset.precedence) out.precedence.emplace_back(a + offset.back(), b + offset.back());
    for (auto set : t->poset.exclusion) {
      for (int& o : set) o += offset.back();
      out.exclusion.push_back(std::move(set));
    }
  }
  if (verify && tasks.size() > 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const CompiledTask& t = *tasks[i];
      if (t.poset.size() > kMaxSoundnessSubtasks) continue;
      std::set<Letter> foreign_set;
      for (std::size_t j = 0; j < tasks.size(); ++j)
        if (j != i)
          for (const auto& s : tasks[j]->poset.subtasks) foreign_set.insert(s.letter());
      const std::vector<Letter> foreign(foreign_set.begin(), foreign_set.end());
      if (!check_poset_soundness_interleaved(t.poset, t.automaton, foreign)) {
        throw PosetError("task '" + t.id + "' is not robust to interleaving with the other tasks' events");
      }
    }
  }
  std::set<std::vector<int>> excl(out.exclusion.begin(), out.exclusion.end());
  for (const auto& w : out.subtasks)
    for (const auto& f : w.forbidden)
      for (const auto& o : out.subtasks)
        if (o.task != w.task && std::find(o.label.begin(), o.label.end(), f) != o.label.end()) {
          excl.insert({std::min(w.id, o.id), std::max(w.id, o.id)});
        }
  out.exclusion.assign(excl.begin(), excl.end());
  return out;
}

// ---------------------------------------------------------------------------
// JSON: {subtasks:[{id,name,task,label,target,collab}], precedence:[[i,j]], exclusion:[[i,j,...]]}
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const RPoset& p) {
  nlohmann::json subtasks = nlohmann::json::array();
  for (const auto& s : p.subtasks) {
    nlohmann::json label = nlohmann::json::array();
    for (const auto& l : s.label) label.push_back(l.to_string());
    nlohmann::json j{{"id", s.id}, {"name", s.name}, {"task", s.task}, {"label", label},
                     {"target", s.target}, {"collab", s.collab}};
    if (s.robot) j["robot"] = *s.robot;
    if (!s.forbidden.empty()) {
      nlohmann::json f = nlohmann::json::array();
      for (const auto& l : s.forbidden) f.push_back(l.to_string());
      j["forbidden"] = f;
    }
    subtasks.push_back(std::move(j));
  }
  nlohmann::json prec = nlohmann::json::array();
  for (auto [a, b] : p.precedence) prec.push_back({a, b});
  return {{"subtasks", subtasks}, {"precedence", prec}, {"exclusion", p.exclusion}};
}

inline RPoset poset_from_json(const nlohmann::json& j) {
  auto parse_prop = [](const std::string& s) {
    const Formula f = parse_scltl(s);
    if (f.op() != Formula::Op::Atom) throw ScenarioError("expected a proposition, got '" + s + "'");
    return f.prop();
  };
  RPoset p;
  for (const auto& js : j.at("subtasks")) {
    Subtask s;
    s.id = js.at("id").get<int>();
    s.name = js.value("name", std::to_string(s.id));
    s.task = js.value("task", std::string{});
    for (const auto& l : js.at("label")) s.label.push_back(parse_prop(l.get<std::string>()));
    s.target = js.at("target").get<std::string>();
    s.collab = js.at("collab").get<std::string>();
    if (js.contains("robot")) s.robot = js.at("robot").get<std::string>();
    if (js.contains("forbidden"))
      for (const auto& l : js.at("forbidden")) s.forbidden.push_back(parse_prop(l.get<std::string>()));
    p.subtasks.push_back(std::move(s));
  }
  for (const auto& e : j.at("precedence")) p.precedence.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  for (const auto& e : j.at("exclusion")) p.exclusion.push_back(e.get<std::vector<int>>());
  return p;
}

}  // namespace umbrella
