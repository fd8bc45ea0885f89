#include <gtest/gtest.h>

#include "corpus.hpp"
#include "oracles.hpp"

using namespace umbrella;

namespace {

RPoset poset_of(const std::string& text) { return compile_task("t", parse_scltl(text)).poset; }

// Linearizations enumerated independently of the library and replayed on the automaton.
bool sound_by_enumeration(const RPoset& p, const FiniteAutomaton& a) {
  for (const auto& order : oracle::linear_extensions(p.size(), p.precedence)) {
    std::vector<Letter> w;
    for (int k : order) w.push_back(p.subtasks[k].letter());
    if (!accepts(a, w)) return false;
  }
  return true;
}

}  // namespace

TEST(Poset, OrderedPairWithExclusion) {
  const RPoset p = poset_of("F (monitor(a) & !film(a) & F film(a))");
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p.subtasks[0].label.front().to_string(), "monitor(a)");
  EXPECT_EQ(p.subtasks[1].label.front().to_string(), "film(a)");
  EXPECT_EQ(p.precedence, (std::vector<std::pair<int, int>>{{0, 1}}));
  EXPECT_EQ(p.exclusion, (std::vector<std::vector<int>>{{0, 1}}));
}

TEST(Poset, MissingOrderIsUnsound) {
  const auto t = compile_task("t", parse_scltl("F (monitor(a) & !film(a) & F film(a))"));
  RPoset p = t.poset;
  p.precedence.clear();
  EXPECT_FALSE(check_poset_soundness(p, t.automaton));
  const AtomicProp m = AtomicProp::collaboration("monitor", "a"), f = AtomicProp::collaboration("film", "a");
  EXPECT_TRUE(accepts(t.automaton, std::vector<Letter>{{m}, {f}}));
  EXPECT_FALSE(accepts(t.automaton, std::vector<Letter>{{f}, {m}}));
}

TEST(Poset, IndependentEventualitiesAreUnordered) {
  const RPoset p = poset_of("F film(a) & F monitor(b)");
  EXPECT_EQ(p.size(), 2u);
  EXPECT_TRUE(p.precedence.empty());
  EXPECT_TRUE(p.exclusion.empty());
}

TEST(Poset, ChainIsTransitivelyReduced) {
  const RPoset p = poset_of("F (monitor(a) & F (film(b) & F escort(c)))");
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p.precedence, (std::vector<std::pair<int, int>>{{0, 1}, {1, 2}}));
  EXPECT_EQ(p.predecessors(2), std::vector<int>{1});
}

TEST(Poset, ReachSubtaskIsPinned) {
  const RPoset p = poset_of("F (reach(r1,a) & F monitor(a))");
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p.subtasks[0].collab, kReachCollab);
  ASSERT_TRUE(p.subtasks[0].robot.has_value());
  EXPECT_EQ(*p.subtasks[0].robot, "r1");
  EXPECT_EQ(p.subtasks[1].collab, "monitor");
  EXPECT_FALSE(p.subtasks[1].robot.has_value());
}

TEST(Poset, SubtaskNamesAreStable) {
  const RPoset p = compile_task("survey", parse_scltl("F monitor(a) & F film(b)")).poset;
  EXPECT_EQ(p.subtasks[0].name, "survey/0");
  EXPECT_EQ(p.subtasks[1].name, "survey/1");
  EXPECT_EQ(p.subtasks[1].task, "survey");
}

TEST(Poset, CorpusIsSound) {
  ASSERT_GE(corpus::formulas().size(), 20u);
  for (const auto& text : corpus::formulas()) {
    const auto t = compile_task("t", parse_scltl(text));
    EXPECT_GE(t.poset.size(), 1u) << text;
    EXPECT_TRUE(check_poset_soundness(t.poset, t.automaton)) << text;
    EXPECT_TRUE(sound_by_enumeration(t.poset, t.automaton)) << text;
  }
}

TEST(Poset, RelaxationDropsOnlyUnneededOrder) {
  // A fully ordered version of an unordered pair must fail soundness if reversed order is rejected.
  const auto t = compile_task("t", parse_scltl("F (monitor(a) & F film(b))"));
  RPoset unordered = t.poset;
  unordered.precedence.clear();
  EXPECT_FALSE(check_poset_soundness(unordered, t.automaton));
  EXPECT_FALSE(sound_by_enumeration(unordered, t.automaton));
}

TEST(Poset, SoundnessCheckHasCapacity) {
  RPoset p;
  for (int k = 0; k < 11; ++k) p.subtasks.push_back({k, "t/" + std::to_string(k), "t", {}, "a", "monitor", {}, {}});
  const auto a = to_automaton(parse_scltl("F monitor(a)"));
  EXPECT_THROW(check_poset_soundness(p, a), CapacityError);
}

TEST(Poset, EmptyLanguageIsRejected) {
  EXPECT_THROW(compile_task("t", parse_scltl("monitor(a) & !monitor(a)")), EmptyLanguageError);
}

TEST(Poset, TransitiveReduction) {
  const auto r = detail::transitive_reduction(3, {{0, 1}, {1, 2}, {0, 2}});
  EXPECT_EQ(r, (std::vector<std::pair<int, int>>{{0, 1}, {1, 2}}));
}

TEST(Poset, AvailableSubtasksFollowPrecedence) {
  const RPoset p = poset_of("F (monitor(a) & F (film(b) & F escort(c))) & F track(d)");
  std::vector<bool> assigned(p.size(), false);
  auto avail = available_subtasks(p, assigned);
  EXPECT_EQ(avail.size(), 2u);
  assigned[0] = true;
  avail = available_subtasks(p, assigned);
  EXPECT_NE(std::find(avail.begin(), avail.end(), 1), avail.end());
  EXPECT_EQ(std::find(avail.begin(), avail.end(), 2), avail.end());
}

TEST(Poset, MergeOffsetsAndCrossExclusions) {
  const auto a = compile_task("A", parse_scltl("F (monitor(a) & !film(b))"));
  const auto b = compile_task("B", parse_scltl("F film(b)"));
  const RPoset m = merge_task_posets({&a, &b});
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.subtasks[1].id, 1);
  EXPECT_EQ(m.subtasks[1].task, "B");
  EXPECT_EQ(m.exclusion, (std::vector<std::vector<int>>{{0, 1}}));
}

TEST(Poset, MergeRejectsTasksBrokenByInterleaving) {
  const auto a = compile_task("A", parse_scltl("F monitor(a) & (!film(b) U monitor(a))"));
  const auto b = compile_task("B", parse_scltl("F film(b)"));
  EXPECT_THROW(merge_task_posets({&a, &b}), PosetError);
  EXPECT_NO_THROW(merge_task_posets({&a, &b}, false));
}

TEST(Poset, JsonRoundTrip) {
  const RPoset p = poset_of("F (reach(r1,a) & F monitor(a)) & (!monitor(a) U reach(r1,a))");
  const RPoset q = poset_from_json(to_json(p));
  EXPECT_EQ(to_json(q), to_json(p));
}
