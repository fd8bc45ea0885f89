#pragma once

// Reference implementations used only by the tests. They are deliberately naive.

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

#include "umbrella/umbrella.hpp"

namespace oracle {

using namespace umbrella;

// Finite-trace satisfaction evaluated directly on positions 0..n of the trace.
inline bool holds(const Formula& f, const std::vector<Letter>& w, std::size_t i) {
  const std::size_t n = w.size();
  switch (f.op()) {
    case Formula::Op::True:
      return true;
    case Formula::Op::Atom:
      return i < n && w[i].count(f.prop()) > 0;
    case Formula::Op::NegAtom:
      return i < n && w[i].count(f.prop()) == 0;
    case Formula::Op::And:
      return holds(f.lhs(), w, i) && holds(f.rhs(), w, i);
    case Formula::Op::Or:
      return holds(f.lhs(), w, i) || holds(f.rhs(), w, i);
    case Formula::Op::Next:
      return i < n && holds(f.operand(), w, i + 1);
    case Formula::Op::Eventually:
      for (std::size_t j = i; j <= n; ++j)
        if (holds(f.operand(), w, j)) return true;
      return false;
    case Formula::Op::Until:
      for (std::size_t j = i; j <= n; ++j) {
        if (holds(f.rhs(), w, j)) return true;
        if (j == n || !holds(f.lhs(), w, j)) return false;
      }
      return false;
  }
  return false;
}

inline bool satisfies(const Formula& f, const std::vector<Letter>& w) { return holds(f, w, 0); }

// Every trace of length <= max_len over subsets of `props`.
inline void for_each_trace(const std::vector<AtomicProp>& props, std::size_t max_len,
                           const std::function<void(const std::vector<Letter>&)>& fn) {
  std::vector<Letter> letters;
  for (unsigned mask = 0; mask < (1u << props.size()); ++mask) {
    Letter l;
    for (std::size_t k = 0; k < props.size(); ++k)
      if (mask & (1u << k)) l.insert(props[k]);
    letters.push_back(l);
  }
  std::vector<Letter> w;
  std::function<void()> rec = [&] {
    fn(w);
    if (w.size() == max_len) return;
    for (const auto& l : letters) {
      w.push_back(l);
      rec();
      w.pop_back();
    }
  };
  rec();
}

// All orders of 0..n-1 consistent with the precedence pairs, by filtering permutations.
inline std::vector<std::vector<int>> linear_extensions(std::size_t n, const std::vector<std::pair<int, int>>& prec) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    std::vector<int> pos(n);
    for (std::size_t k = 0; k < n; ++k) pos[perm[k]] = static_cast<int>(k);
    bool ok = true;
    for (auto [a, b] : prec) ok &= pos[a] < pos[b];
    if (ok) out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

// Every robot tuple (distinct robots, one per action) able to perform the item.
inline std::vector<std::vector<int>> groups(const PlanningProblem& p, int item) {
  const PlanItem& it = p.items[item];
  std::vector<std::vector<int>> out;
  if (it.pinned_robot >= 0) return {{it.pinned_robot}};
  std::vector<int> cur;
  std::function<void()> rec = [&] {
    if (cur.size() == it.actions.size()) {
      out.push_back(cur);
      return;
    }
    for (int r = 0; r < static_cast<int>(p.robots.size()); ++r) {
      if (std::find(cur.begin(), cur.end(), r) != cur.end()) continue;
      if (!p.robots[r].can(it.actions[cur.size()])) continue;
      cur.push_back(r);
      rec();
      cur.pop_back();
    }
  };
  rec();
  return out;
}

// Best objective over all precedence-respecting decision orders and all groups.
inline double best_objective(const PlanningProblem& p, const TargetPaths& paths) {
  std::vector<std::pair<int, int>> prec;
  for (std::size_t i = 0; i < p.items.size(); ++i)
    for (int q : p.items[i].preds) prec.emplace_back(q, static_cast<int>(i));
  double best = kInf;
  for (const auto& order : linear_extensions(p.items.size(), prec)) {
    Assignment a;
    std::function<void(std::size_t)> rec = [&](std::size_t k) {
      if (k == order.size()) {
        const SimResult r = simulate(p, a, paths);
        if (!r.exceeded) best = std::min(best, r.objective);
        return;
      }
      for (const auto& g : groups(p, order[k])) {
        a.push_back({order[k], g});
        rec(k + 1);
        a.pop_back();
      }
    };
    rec(0);
  }
  return best;
}

}  // namespace oracle
