#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace umbrella;
using namespace helpers;

TEST(Kinematics, MoveTowardStopsAtGoal) {
  const Vec2 a = move_toward({0, 0}, {3, 4}, 2.0);
  EXPECT_NEAR(a.x, 1.2, 1e-12);
  EXPECT_NEAR(a.y, 1.6, 1e-12);
  const Vec2 b = move_toward({0, 0}, {3, 4}, 7.0);
  EXPECT_DOUBLE_EQ(b.x, 3.0);
  EXPECT_DOUBLE_EQ(b.y, 4.0);
}

TEST(Simulate, StaticTarget) {
  // 10 m at 2 m/s, then 3 s of work
  auto p = problem({robot("r", {0, 0}, 2.0, {"cam"})}, {item("w", 0, 0, {"cam"}, 3.0)}, 1, 1);
  const auto tp = paths({Trajectory{{10, 0}}}, 0.1);
  const SimResult r = stepwise_simulate(p, {{0, {0}}}, tp);
  EXPECT_NEAR(r.start[0], 5.0, p.dt);
  EXPECT_NEAR(r.completion[0], 8.0, p.dt);
  EXPECT_NEAR(r.objective, 8.0, p.dt);
}

TEST(Simulate, FleeingTarget) {
  // gap 10 m closes at 2 - 1 m/s
  auto p = problem({robot("r", {0, 0}, 2.0, {"cam"})}, {item("w", 0, 0, {"cam"}, 3.0)}, 1, 1);
  const auto tp = paths({line({10, 0}, {1, 0}, 0.1, 400)}, 0.1);
  const SimResult r = stepwise_simulate(p, {{0, {0}}}, tp);
  EXPECT_NEAR(r.start[0], 10.0, p.dt);
  EXPECT_NEAR(r.completion[0], 13.0, p.dt);
}

TEST(Simulate, CollaboratorsWaitForEachOther) {
  // arrivals at 4 s and 6 s
  auto p = problem({robot("a", {0, 0}, 1.0, {"cam"}), robot("b", {20, 0}, 1.0, {"net"})},
                   {item("w", 0, 0, {"cam", "net"}, 2.0)}, 1, 1);
  const auto tp = paths({Trajectory{{4, 0}}}, 0.1);
  const SimResult r = stepwise_simulate(p, {{0, {0, 1}}}, tp);
  EXPECT_NEAR(r.start[0], 16.0, p.dt);
  p.robots[1].position = {10, 0};
  const SimResult r2 = stepwise_simulate(p, {{0, {0, 1}}}, tp);
  EXPECT_NEAR(r2.start[0], 6.0, p.dt);
  EXPECT_NEAR(r2.completion[0], 8.0, p.dt);
}

TEST(Simulate, SoloActionsDoNotWait) {
  auto p = problem({robot("a", {0, 0}, 1.0, {"cam"}), robot("b", {20, 0}, 1.0, {"cam"})},
                   {item("w0", 0, 0, {"cam"}, 1.0), item("w1", 1, 0, {"cam"}, 1.0)}, 2, 1);
  const auto tp = paths({Trajectory{{4, 0}}}, 0.1);
  const SimResult r = stepwise_simulate(p, {{0, {0}}, {1, {1}}}, tp);
  EXPECT_NEAR(r.start[0], 4.0, p.dt);
  EXPECT_NEAR(r.start[1], 16.0, p.dt);
  EXPECT_NEAR(r.objective, (5.0 + 17.0) / 2.0, p.dt);
}

TEST(Simulate, PrecedenceSemantics) {
  auto p = problem({robot("a", {0, 0}, 1.0, {"cam"}), robot("b", {0, 0}, 1.0, {"cam"})},
                   {item("w0", 0, 0, {"cam"}, 5.0), item("w1", 0, 0, {"cam"}, 1.0, {0})}, 1, 1);
  const auto tp = paths({Trajectory{{2, 0}}}, 0.1);
  const Assignment a{{0, {0}}, {1, {1}}};
  const SimResult sc = stepwise_simulate(p, a, tp);
  EXPECT_GE(sc.start[1], sc.completion[0] - 1e-9);
  p.semantics = PrecedenceSemantics::StartStart;
  const SimResult ss = stepwise_simulate(p, a, tp);
  EXPECT_GE(ss.start[1], ss.start[0] - 1e-9);
  EXPECT_LT(ss.start[1], ss.completion[0]);
}

TEST(Simulate, ExclusiveSubtasksDoNotOverlap) {
  auto p = problem({robot("a", {0, 0}, 1.0, {"cam"}), robot("b", {4, 4}, 1.0, {"cam"})},
                   {item("w0", 0, 0, {"cam"}, 5.0), item("w1", 1, 0, {"cam"}, 5.0)}, 2, 1);
  p.items[0].exclusive = {1};
  p.items[1].exclusive = {0};
  const auto tp = paths({Trajectory{{2, 2}}}, 0.1);
  const SimResult r = stepwise_simulate(p, {{0, {0}}, {1, {1}}}, tp);
  EXPECT_TRUE(r.start[1] >= r.completion[0] - 1e-9 || r.start[0] >= r.completion[1] - 1e-9);
}

TEST(Simulate, HorizonExceeded) {
  auto p = problem({robot("r", {0, 0}, 1.0, {"cam"})}, {item("w", 0, 0, {"cam"}, 1.0)}, 1, 1);
  p.max_time = 5.0;
  const auto tp = paths({Trajectory{{100, 0}}}, 0.1);
  EXPECT_THROW(stepwise_simulate(p, {{0, {0}}}, tp), HorizonExceededError);
  EXPECT_TRUE(simulate(p, {{0, {0}}}, tp).exceeded);
}

TEST(Groups, RoleAssignmentsUseDistinctRobots) {
  // two actions, three robots able to do both: 3 * 2 ordered role assignments
  auto p = problem({robot("a", {0, 0}, 1, {"x", "y"}), robot("b", {0, 0}, 1, {"x", "y"}), robot("c", {0, 0}, 1, {"x", "y"})},
                   {item("w", 0, 0, {"x", "y"}, 1.0)}, 1, 1);
  const auto g = feasible_groups(p, 0);
  EXPECT_EQ(g.size(), 6u);
  for (const auto& grp : g) EXPECT_NE(grp[0], grp[1]);
}

TEST(Groups, PinnedAndUnavailable) {
  auto p = problem({robot("a", {0, 0}, 1, {"x"}), robot("b", {0, 0}, 1, {"x"})}, {item("w", 0, 0, {"reach"}, 0.0)}, 1, 1);
  p.items[0].pinned_robot = 1;
  EXPECT_EQ(feasible_groups(p, 0), (std::vector<std::vector<int>>{{1}}));
  p.items[0].pinned_robot = kUnavailable;
  EXPECT_TRUE(feasible_groups(p, 0).empty());
}

TEST(Objective, WeightedMakespan) {
  const std::map<std::string, double> ms{{"A", 10.0}, {"B", 20.0}, {"C", 30.0}};
  EXPECT_DOUBLE_EQ(weighted_makespan(ms, {{"A", 1.0 / 3}, {"B", 1.0 / 3}, {"C", 1.0 / 3}}), 20.0);
  EXPECT_DOUBLE_EQ(weighted_makespan(ms, {{"A", 0.3}, {"B", 0.1}, {"C", 0.1}}), 8.0);
  EXPECT_DOUBLE_EQ(weighted_makespan({{"A", 12.5}}, {{"A", 1.0}}), 12.5);
  EXPECT_DOUBLE_EQ(task_average({10.0, 20.0, 30.0}, {}), 20.0);
}

TEST(Problem, FromPosetAndTeam) {
  TeamModel team;
  team.robots = {{"r1", {"cam"}, 2.0, {0, 0}}, {"r2", {"cam", "net"}, 1.0, {5, 5}}};
  team.collaborations = {{"monitor", {"cam"}, 3.0}, {"escort", {"cam", "net"}, 4.0}};
  const auto t = compile_task("T", parse_scltl("F (monitor(a) & F escort(a)) & F reach(r2,a)"));
  const PlanningProblem p = make_problem(t.poset, team, {"a"});
  ASSERT_EQ(p.items.size(), 3u);
  int escort = -1, reach = -1;
  for (std::size_t i = 0; i < p.items.size(); ++i) {
    if (p.items[i].actions.size() == 2) escort = static_cast<int>(i);
    if (p.items[i].pinned_robot >= 0) reach = static_cast<int>(i);
  }
  ASSERT_GE(escort, 0);
  ASSERT_GE(reach, 0);
  EXPECT_DOUBLE_EQ(p.items[escort].duration, 4.0);
  EXPECT_EQ(p.items[escort].preds.size(), 1u);
  EXPECT_EQ(p.items[reach].pinned_robot, 1);
  EXPECT_DOUBLE_EQ(p.items[reach].duration, 0.0);
}
