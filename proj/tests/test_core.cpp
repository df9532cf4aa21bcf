#include <gtest/gtest.h>

#include <map>
#include <set>

#include "daalder/core.hpp"
#include "test_util.hpp"

using namespace daalder;

namespace {

// 0 -a-> 1 -a-> 2 -a-> 0, b loops; outputs 0 1 0.
MooreMachine three_cycle() {
  return MooreMachine::from_tables(Alphabet{2}, Alphabet{2}, 0, {1, 0, 2, 1, 0, 2}, {0, 1, 0});
}

// Number of distinct behaviours among reachable states, by brute force over
// all suffixes up to `depth`.
std::size_t brute_force_classes(const MooreMachine& m, std::size_t depth) {
  const auto words = testutil::all_words(m.inputs().size, depth);
  std::set<State> reachable;
  for (const auto& w : words) reachable.insert(m.run(m.initial(), w));
  std::set<std::vector<Symbol>> behaviours;
  for (State s : reachable) {
    std::vector<Symbol> row;
    for (const auto& w : words) row.push_back(m.output(m.run(s, w)));
    behaviours.insert(row);
  }
  return behaviours.size();
}

}  // namespace

TEST(MooreMachine, EvaluateFollowsTransitions) {
  const auto m = three_cycle();
  EXPECT_EQ(evaluate(m, Trace{}), 0);
  EXPECT_EQ(evaluate(m, Trace{0}), 1);
  EXPECT_EQ(evaluate(m, Trace{0, 0}), 0);
  EXPECT_EQ(evaluate(m, Trace{0, 1, 1}), 1);
  EXPECT_EQ(evaluate(m, Trace{0, 0, 1, 0}), 0);
  EXPECT_EQ(evaluate(m, Trace{0, 0, 0, 0}), 1);
}

TEST(MooreMachine, EvaluateMatchesTableWalk) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = testutil::random_machine(7, 3, 3, seed);
    const std::vector<State> delta(m.transition_table().begin(), m.transition_table().end());
    const std::vector<Symbol> lambda(m.output_table().begin(), m.output_table().end());
    for (const auto& w : testutil::all_words(3, 5)) {
      ASSERT_EQ(evaluate(m, w), testutil::walk(delta, lambda, 3, m.initial(), w));
    }
  }
}

TEST(MooreMachine, RejectsMalformedTables) {
  EXPECT_THROW(MooreMachine::from_tables(Alphabet{2}, Alphabet{2}, 0, {0}, {0}), InputDomainError);
  EXPECT_THROW(MooreMachine::from_tables(Alphabet{2}, Alphabet{2}, 0, {0, 2}, {0}), InputDomainError);
  EXPECT_THROW(MooreMachine::from_tables(Alphabet{2}, Alphabet{2}, 0, {0, 0}, {2}), InputDomainError);
  EXPECT_THROW(MooreMachine::from_tables(Alphabet{2}, Alphabet{2}, 1, {0, 0}, {0}), InputDomainError);
  EXPECT_THROW(MooreMachine(Alphabet{2}, Alphabet{2}, 0), InputDomainError);
  EXPECT_THROW(make_alphabet(0), InputDomainError);
}

TEST(MooreMachine, OutOfAlphabetSymbolThrows) {
  const auto m = three_cycle();
  EXPECT_THROW(m.run(0, Trace{2}), InputDomainError);
}

TEST(Minimize, ParityWithDuplicatedStatesCollapsesToTwo) {
  // States 0,2 are even, 1,3 odd; 4 is unreachable.
  const auto m = MooreMachine::from_tables(Alphabet{2}, Alphabet{2}, 0, {2, 1, 3, 0, 0, 3, 1, 2, 4, 4}, {0, 1, 0, 1, 1});
  const auto min = minimize(m);
  EXPECT_EQ(min.num_states(), 2u);
  EXPECT_EQ(min, minimize(testutil::parity_machine()));
}

TEST(Minimize, StateCountMatchesBruteForceClasses) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto m = testutil::random_machine(8, 2, 2, seed);
    const auto min = minimize(m);
    // Distinguishable states differ on a word of length < 8.
    EXPECT_EQ(min.num_states(), brute_force_classes(m, 8)) << "seed " << seed;
    for (const auto& w : testutil::all_words(2, 10)) ASSERT_EQ(evaluate(min, w), evaluate(m, w));
  }
}

TEST(Minimize, IsAFixedPointAndCanonical) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto m = testutil::random_machine(9, 3, 2, seed);
    const auto min = minimize(m);
    EXPECT_EQ(minimize(min), min);
    // Relabel states by a rotation; the canonical form must not change.
    const std::size_t n = m.num_states();
    std::vector<State> delta(n * 3);
    std::vector<Symbol> lambda(n);
    auto rot = [n](State s) { return static_cast<State>((s + 4) % n); };
    for (State s = 0; s < n; ++s) {
      lambda[rot(s)] = m.output(s);
      for (Symbol a = 0; a < 3; ++a) delta[rot(s) * 3 + a] = rot(m.next(s, a));
    }
    const auto relabelled = MooreMachine::from_tables(Alphabet{3}, Alphabet{2}, rot(m.initial()), delta, lambda);
    EXPECT_EQ(minimize(relabelled), min);
  }
}

TEST(Trim, DropsUnreachableStates) {
  const auto m = MooreMachine::from_tables(Alphabet{1}, Alphabet{2}, 0, {1, 0, 2}, {0, 1, 1});
  EXPECT_EQ(trim(m).num_states(), 2u);
}

TEST(Equivalent, ParityAgainstConstantDiffersAfterOneSymbol) {
  const auto parity = testutil::parity_machine();
  const MooreMachine zero(Alphabet{2}, Alphabet{2}, 1);
  const auto diff = equivalent(parity, zero);
  ASSERT_TRUE(diff.has_value());
  EXPECT_EQ(*diff, (Trace{1}));
  EXPECT_FALSE(equivalent(parity, parity).has_value());
}

TEST(Equivalent, ReturnsAShortestDistinguishingTrace) {
  const auto words = testutil::all_words(2, 12);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto a = testutil::random_machine(6, 2, 2, seed);
    const auto b = testutil::random_machine(6, 2, 2, seed + 1000);
    std::optional<std::size_t> shortest;
    for (const auto& w : words) {
      if (evaluate(a, w) != evaluate(b, w)) {
        shortest = w.size();
        break;
      }
    }
    const auto diff = equivalent(a, b);
    ASSERT_EQ(diff.has_value(), shortest.has_value()) << "seed " << seed;
    if (diff) {
      EXPECT_EQ(diff->size(), *shortest);
      EXPECT_NE(evaluate(a, *diff), evaluate(b, *diff));
    }
  }
}

TEST(Equivalent, AlphabetMismatchThrows) {
  const MooreMachine a(Alphabet{2}, Alphabet{2}, 1);
  const MooreMachine b(Alphabet{3}, Alphabet{2}, 1);
  EXPECT_THROW(equivalent(a, b), InputDomainError);
}

TEST(Traces, PrefixAndShortlex) {
  EXPECT_TRUE(is_prefix(Trace{}, Trace{1, 0}));
  EXPECT_TRUE(is_prefix(Trace{1}, Trace{1, 0}));
  EXPECT_FALSE(is_prefix(Trace{0}, Trace{1, 0}));
  EXPECT_FALSE(is_prefix(Trace{1, 0, 1}, Trace{1, 0}));
  EXPECT_TRUE(shortlex_less(Trace{1}, Trace{0, 0}));
  EXPECT_TRUE(shortlex_less(Trace{0, 1}, Trace{1, 0}));
  EXPECT_FALSE(shortlex_less(Trace{0, 1}, Trace{0, 1}));
}
