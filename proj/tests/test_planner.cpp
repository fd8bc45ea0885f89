#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include "helpers.hpp"
#include "oracles.hpp"

using namespace umbrella;
using namespace helpers;

TEST(Risk, OrderStatistics) {
  std::vector<double> s{28, 10, 26, 12, 24, 14, 22, 16, 20, 18};
  const RiskEstimate r = risk_measures(s, 0.2);
  EXPECT_DOUBLE_EQ(r.var, 26.0);
  EXPECT_DOUBLE_EQ(r.cvar, 27.0);
  EXPECT_DOUBLE_EQ(risk_measures(s, 1.0).cvar, 19.0);
  EXPECT_DOUBLE_EQ(risk_measures({5.0, 5.0, 5.0}, 0.05).cvar, 5.0);
  EXPECT_THROW(risk_measures({}, 0.1), std::invalid_argument);
  EXPECT_THROW(risk_measures({1.0}, 0.0), std::invalid_argument);
}

TEST(Risk, ZeroRadiiCollapse) {
  auto p = problem({robot("r", {0, 0}, 2.0, {"cam"})}, {item("w", 0, 0, {"cam"}, 3.0)}, 1, 1);
  const auto tp = paths({Trajectory{{10, 0}}}, 0.1);
  const auto b = exact_bundle(tp, {"t0"});
  const auto samples = draw_samples(b, 20, 7, 0.0);
  const RiskEstimate r = evaluate(p, {{0, {0}}}, samples, 0.1);
  EXPECT_DOUBLE_EQ(r.var, r.cvar);
  EXPECT_NEAR(r.cvar, 8.0, p.dt);
}

TEST(Config, Validation) {
  RiskConfig c;
  c.alpha = 0.0;
  EXPECT_THROW(c.validate(), ScenarioError);
  c = RiskConfig{};
  c.z = 0;
  EXPECT_THROW(c.validate(), ScenarioError);
  c = RiskConfig{};
  c.epsilon = 1.5;
  EXPECT_THROW(c.validate(), ScenarioError);
}

TEST(Uct, Scores) {
  EXPECT_NEAR(uct_score(0.5, 1, 6, 1.5), 0.5 + 1.5 * std::sqrt(std::log(6.0)), 1e-12);
  EXPECT_NEAR(uct_score(0.5, 1, 6, 1.5), 2.51, 0.01);
  EXPECT_NEAR(uct_score(1.0, 5, 6, 1.5), 1.90, 0.01);
  EXPECT_EQ(uct_score(0.0, 0, 6, 1.5), kInf);
}

namespace {
// Root with two visited children carrying the given statistics.
SearchTree two_children(double m0, long b0, double m1, long b1) {
  SearchTree t;
  t[0].expanded = true;
  for (auto [m, b] : {std::pair{m0, b0}, std::pair{m1, b1}}) {
    const int c = t.add_child(0, {0, {0}});
    t[c].visits = b;
    t[c].value_sum = m * static_cast<double>(b);
  }
  t[0].visits = b0 + b1;
  return t;
}
}  // namespace

TEST(Uct, SelectionFollowsScore) {
  auto t = two_children(1.0, 5, 0.5, 1);
  EXPECT_EQ(t.select(1.5), 2);
  EXPECT_EQ(t.select(0.0), 1);
  auto u = two_children(1.0, 5, 0.0, 0);
  EXPECT_EQ(u.select(0.0), 2);
}

TEST(Uct, UnvisitedInCreationOrder) {
  SearchTree t;
  t[0].expanded = true;
  t.add_child(0, {0, {0}});
  t.add_child(0, {1, {0}});
  EXPECT_EQ(t.select(1.5), 1);
}

TEST(Uct, PrunedChildrenSkippedAndExhaustion) {
  auto t = two_children(1.0, 5, 0.5, 1);
  t[2].pruned = true;
  EXPECT_EQ(t.select(1.5), 1);
  t.close(1);
  EXPECT_EQ(t.select(1.5), -1);
  EXPECT_TRUE(t[0].exhausted);
}

TEST(Backprop, DepthThreeTouchesFourNodes) {
  SearchTree t;
  const int a = t.add_child(0, {0, {0}});
  const int b = t.add_child(a, {1, {0}});
  const int c = t.add_child(b, {2, {0}});
  EXPECT_EQ(t.backpropagate(c, 0.5), 4);
  for (int n : {0, a, b, c}) {
    EXPECT_EQ(t[n].visits, 1);
    EXPECT_DOUBLE_EQ(t[n].mean_value(), 0.5);
  }
  EXPECT_EQ(t.assignment(c).size(), 3u);
  EXPECT_EQ(t.assignment(c)[2].item, 2);
}

TEST(Backprop, NormalizedReward) {
  EXPECT_DOUBLE_EQ(normalized_reward(10.0, 10.0), 1.0);
  EXPECT_DOUBLE_EQ(normalized_reward(20.0, 10.0), 0.0);
  EXPECT_DOUBLE_EQ(normalized_reward(40.0, 10.0), -1.0);
  EXPECT_DOUBLE_EQ(normalized_reward(kInf, 10.0), -1.0);
}

TEST(KeySubtasks, Definition) {
  EXPECT_EQ(key_subtasks({{1, 2}}), (std::vector<int>{1}));
  EXPECT_EQ(key_subtasks({{1, 3}, {2, 1}}), (std::vector<int>{2}));
  EXPECT_EQ(key_subtasks({{1, 2}, {2, 1}}), (std::vector<int>{}));
  EXPECT_EQ(key_subtasks({{1}, {2}}), (std::vector<int>{1, 2}));
  EXPECT_EQ(key_subtasks({{1, 3}, {1, 2}}), (std::vector<int>{1}));
  EXPECT_EQ(key_subtasks({{}, {4}}), (std::vector<int>{4}));
}

TEST(Zeta, UncertaintyTerm) {
  // robot at 2 m/s, target drifting at most 1 m/s, region radius 2 m
  auto p = problem({robot("r", {0, 0}, 2.0, {"cam"})}, {item("w", 0, 0, {"cam"}, 3.0)}, 1, 1);
  const auto tp = paths({Trajectory{{10, 0}}}, 0.1);
  auto b = exact_bundle(tp, {"t0"}, {1.0});
  const Assignment a{{0, {0}}};
  const SimResult sim = simulate(p, a, tp);
  EXPECT_NEAR(zeta(p, a, sim, b), sim.completion[0], 1e-12);
  for (auto& r : b.forecasts[0].radius) r = 2.0;
  EXPECT_NEAR(zeta(p, a, sim, b), sim.completion[0] + 2.0, 1e-12);
  EXPECT_NEAR(zeta(p, a, sim, b, false), sim.completion[0], 1e-12);
  b.forecasts[0].vmax = 2.0;
  EXPECT_EQ(zeta(p, a, sim, b), kInf);
}

TEST(Zeta, MeanOverAssignedOnly) {
  auto p = problem({robot("r", {0, 0}, 1.0, {"cam"})},
                   {item("w0", 0, 0, {"cam"}, 0.0), item("w1", 0, 0, {"cam"}, 0.0)}, 1, 1);
  const auto tp = paths({Trajectory{{4, 0}}}, 0.1);
  const auto b = exact_bundle(tp, {"t0"});
  const Assignment a{{0, {0}}};
  const SimResult sim = simulate(p, a, tp);
  EXPECT_NEAR(zeta(p, a, sim, b), 4.0, p.dt);
}

TEST(Rollout, GreedyIsDeterministicAndPicksEarliest) {
  auto p = problem({robot("far", {50, 0}, 1.0, {"cam"}), robot("near", {1, 0}, 1.0, {"cam"})},
                   {item("w0", 0, 0, {"cam"}, 1.0), item("w1", 1, 0, {"cam"}, 1.0)}, 2, 1);
  const auto tp = paths({Trajectory{{0, 0}}}, 0.1);
  Rng r1(3), r2(3);
  const Assignment a = rollout(p, {}, tp, 0.0, r1);
  EXPECT_EQ(a, rollout(p, {}, tp, 0.0, r2));
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].group, (std::vector<int>{1}));
}

TEST(Rollout, RandomGroupsAreUniform) {
  auto p = problem({robot("a", {0, 0}, 1, {"cam"}), robot("b", {5, 0}, 1, {"cam"}), robot("c", {9, 0}, 1, {"cam"})},
                   {item("w", 0, 0, {"cam"}, 1.0)}, 1, 1);
  const auto tp = paths({Trajectory{{0, 0}}}, 0.1);
  Rng rng(11);
  std::array<int, 3> counts{};
  const int n = 10000;
  for (int k = 0; k < n; ++k) counts[rollout(p, {}, tp, 1.0, rng)[0].group[0]]++;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 3.0) * (c - n / 3.0) / (n / 3.0);
  const boost::math::chi_squared dist(2);
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.01);
}

TEST(Rollout, RespectsPrecedence) {
  auto p = problem({robot("a", {0, 0}, 1, {"cam"}), robot("b", {0, 0}, 1, {"cam"})},
                   {item("w0", 0, 0, {"cam"}, 2.0), item("w1", 0, 0, {"cam"}, 2.0, {0})}, 1, 1);
  const auto tp = paths({Trajectory{{3, 0}}}, 0.1);
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    const Assignment a = rollout(p, {}, tp, 0.5, rng);
    EXPECT_EQ(a[0].item, 0);
    const SimResult s = simulate(p, a, tp);
    EXPECT_GE(s.start[1], s.completion[0] - 1e-9);
  }
}

namespace {
RiskConfig exhaustive_cfg(std::uint64_t seed) {
  RiskConfig c;
  c.z = 1;
  c.iterations = 100000;
  c.uncertainty_term = false;
  c.seed = seed;
  return c;
}
}  // namespace

TEST(Search, DegenerateSingleSubtask) {
  auto p = problem({robot("r", {0, 0}, 2.0, {"cam"})}, {item("w", 0, 0, {"cam"}, 3.0)}, 1, 1);
  const auto tp = paths({Trajectory{{10, 0}}}, 0.1);
  RiskConfig c;
  c.z = 5;
  c.iterations = 50;
  const SearchResult r = cp_mcts(p, exact_bundle(tp, {"t0"}), c);
  EXPECT_NEAR(r.cvar, 10.0 / 2.0 + 3.0, p.dt);
  EXPECT_DOUBLE_EQ(r.plan.risk.var, r.cvar);
  EXPECT_TRUE(r.stats.exhausted);
}

TEST(Search, IndependentSubtasksRunConcurrently) {
  auto p = problem({robot("a", {0, 0}, 1, {"cam"}), robot("b", {0, 0}, 1, {"cam"})},
                   {item("w0", 0, 0, {"cam"}, 2.0), item("w1", 1, 1, {"cam"}, 2.0)}, 2, 2);
  const auto tp = paths({Trajectory{{5, 0}}, Trajectory{{-5, 0}}}, 0.1);
  const SearchResult r = cp_mcts(p, exact_bundle(tp, {"t0", "t1"}), exhaustive_cfg(1));
  const SimResult seq = simulate(p, {{0, {0}}, {1, {0}}}, tp);
  EXPECT_LT(r.cvar, seq.objective);
  EXPECT_NE(r.plan.assignment[0].group, r.plan.assignment[1].group);
  EXPECT_NEAR(r.cvar, 7.0, p.dt);
}

TEST(Search, MatchesBruteForceOnSmallInstances) {
  Rng rng(2024);
  for (int trial = 0; trial < 15; ++trial) {
    const auto [p, tp] = random_instance(rng);
    const double best = oracle::best_objective(p, tp);
    ASSERT_TRUE(std::isfinite(best));
    const SearchResult r = cp_mcts(p, exact_bundle(tp, {"t0", "t1"}), exhaustive_cfg(trial));
    EXPECT_NEAR(r.cvar, best, p.dt) << "trial " << trial;
    EXPECT_TRUE(r.stats.exhausted);
  }
}

TEST(Search, InfeasibleWithoutCapableRobot) {
  auto p = problem({robot("r", {0, 0}, 2.0, {"cam"})}, {item("w", 0, 0, {"net"}, 3.0)}, 1, 1);
  const auto tp = paths({Trajectory{{10, 0}}}, 0.1);
  EXPECT_THROW(cp_mcts(p, exact_bundle(tp, {"t0"}), RiskConfig{}), InfeasibleError);
}

TEST(Search, SlowRobotsArePruned) {
  // the target may move at 1.5 m/s: only the 2 m/s robot is admissible
  auto p = problem({robot("slow", {0, 0}, 1.0, {"cam"}), robot("fast", {0, 0}, 2.0, {"cam"})},
                   {item("w", 0, 0, {"cam"}, 1.0)}, 1, 1);
  const auto tp = paths({Trajectory{{10, 0}}}, 0.1);
  RiskConfig c;
  c.z = 3;
  c.iterations = 20;
  const SearchResult r = cp_mcts(p, exact_bundle(tp, {"t0"}, {1.5}), c);
  EXPECT_EQ(r.plan.assignment[0].group, (std::vector<int>{1}));
  EXPECT_EQ(r.stats.pruned, 1);
  EXPECT_EQ(r.stats.simulated, 1);
  p.robots.pop_back();
  EXPECT_THROW(cp_mcts(p, exact_bundle(tp, {"t0"}, {1.5}), c), InfeasibleError);
}

TEST(Search, DeterministicAndMonotone) {
  auto p = problem({robot("a", {0, 0}, 2, {"cam"}), robot("b", {10, 10}, 2, {"cam", "net"}), robot("c", {20, 0}, 3, {"net"})},
                   {item("w0", 0, 0, {"cam"}, 2.0), item("w1", 0, 0, {"cam", "net"}, 3.0, {0}), item("w2", 1, 1, {"net"}, 1.0),
                    item("w3", 1, 1, {"cam"}, 1.0, {2})},
                   2, 2);
  const auto tp = paths({line({5, 5}, {0.5, 0}, 0.1, 600), line({15, 5}, {0, 0.5}, 0.1, 600)}, 0.1);
  auto b = exact_bundle(tp, {"t0", "t1"}, {0.6, 0.6});
  for (auto& f : b.forecasts)
    for (std::size_t h = 0; h < f.radius.size(); ++h) f.radius[h] = 0.01 * static_cast<double>(h);
  RiskConfig c;
  c.z = 20;
  c.iterations = 200;
  c.seed = 9;
  const SearchResult r1 = cp_mcts(p, b, c);
  const SearchResult r2 = cp_mcts(p, b, c);
  EXPECT_EQ(r1.plan.assignment, r2.plan.assignment);
  EXPECT_DOUBLE_EQ(r1.cvar, r2.cvar);
  EXPECT_EQ(r1.stats.incumbent_history, r2.stats.incumbent_history);
  for (std::size_t k = 1; k < r1.stats.incumbent_history.size(); ++k)
    EXPECT_LT(r1.stats.incumbent_history[k].second, r1.stats.incumbent_history[k - 1].second);
  EXPECT_EQ(r1.stats.incumbent_history.back().second, r1.cvar);
}
