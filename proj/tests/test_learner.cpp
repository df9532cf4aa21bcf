#include <gtest/gtest.h>

#include <limits>

#include "daalder/datagen.hpp"
#include "daalder/learner.hpp"
#include "test_util.hpp"

using namespace daalder;

namespace {

Trace chain(Symbol head, std::size_t twos) {
  Trace t{head};
  t.insert(t.end(), twos, Symbol{2});
  return t;
}

// Ternary fixture, every label 0. The root has a 2-chain of `root_chain`
// labelled nodes, red node "1" a 2-chain of `q_chain`, blue node "0" a
// 2-chain of 10. Merging "0" scores root_chain into the root and q_chain
// into "1".
std::vector<LabeledTrace> ratio_fixture(std::size_t root_chain, std::size_t q_chain) {
  std::vector<LabeledTrace> out;
  for (std::size_t i = 0; i < root_chain; ++i) out.push_back({Trace(i, 2), 0});
  for (std::size_t i = 0; i < q_chain; ++i) out.push_back({chain(1, i), 0});
  for (std::size_t i = 0; i < 10; ++i) out.push_back({chain(0, i), 0});
  return out;
}

struct Fixture {
  testutil::TempDir dir{"learner"};
  ObservationTree tree{Alphabet{3}, Alphabet{2}};
  std::optional<TraceStore> store;
  NodeId p = kNoNode;
  NodeId q = kNoNode;

  Fixture(std::size_t root_chain, std::size_t q_chain, const std::vector<LabeledTrace>& extra) {
    auto traces = ratio_fixture(root_chain, q_chain);
    for (const auto& lt : traces) tree.add_trace(lt);
    traces.insert(traces.end(), extra.begin(), extra.end());
    store.emplace(build_store(traces, dir / "store", Alphabet{3}, Alphabet{2}));
    p = tree.find(Trace{0});
    q = tree.find(Trace{1});
    tree.promote(q);
  }
};

std::vector<LabeledTrace> labelled(const MooreMachine& m, const std::vector<Trace>& words) {
  std::vector<LabeledTrace> out;
  for (const auto& w : words) out.push_back({w, evaluate(m, w)});
  return out;
}

}  // namespace

TEST(RatioFixture, ScoresAreAsDesigned) {
  Fixture f(5, 10, {});
  EXPECT_EQ(f.tree.check_consistency(f.p, f.q).evidence, 10u);
  EXPECT_EQ(f.tree.check_consistency(f.p, f.tree.root()).evidence, 5u);
}

TEST(ProcessUnidentified, RatioExactlyTwoMerges) {
  Fixture f(5, 10, {{{0, 1}, 1}});
  TraceStaging staging;
  LearnerConfig cfg;
  const auto out = process_unidentified(f.tree, *f.store, {f.p}, cfg, staging);
  EXPECT_FALSE(out.explore_more);
  EXPECT_EQ(out.queries, 0u);
  EXPECT_EQ(out.merges, (MergePlan{{f.p, f.q}}));
  EXPECT_EQ(out.forced, 0u);
  EXPECT_FALSE(f.tree.is_pure());
}

TEST(ProcessUnidentified, RatioBelowTwoQueriesBlueAndReds) {
  Fixture f(5, 9, {{{0, 1}, 1}});
  TraceStaging staging;
  LearnerConfig cfg;
  const auto out = process_unidentified(f.tree, *f.store, {f.p}, cfg, staging);
  EXPECT_TRUE(out.explore_more);
  EXPECT_TRUE(out.merges.empty());
  // p, the root (2 * 5 > 9) and "1".
  EXPECT_EQ(out.queries, 3u);
  EXPECT_EQ(staging.size(), 1u);
  f.tree.rollback();
  EXPECT_EQ(staging.flush(f.tree), 1u);
  EXPECT_TRUE(f.tree.has_trace(Trace{0, 1}));
}

TEST(ProcessUnidentified, NothingNewForcesBestMerge) {
  Fixture f(5, 9, {});
  TraceStaging staging;
  LearnerConfig cfg;
  const auto out = process_unidentified(f.tree, *f.store, {f.p}, cfg, staging);
  EXPECT_FALSE(out.explore_more);
  EXPECT_EQ(out.merges, (MergePlan{{f.p, f.q}}));
  EXPECT_EQ(out.forced, 1u);
  EXPECT_TRUE(staging.empty());
}

TEST(ClassifyFringe, EqualEvidenceIsUnidentified) {
  Fixture f(5, 5, {});
  EXPECT_EQ(f.tree.check_consistency(f.p, f.q).evidence, f.tree.check_consistency(f.p, f.tree.root()).evidence);
  const auto out = classify_fringe(f.tree);
  EXPECT_NE(std::find(out.unidentified.begin(), out.unidentified.end(), f.p), out.unidentified.end());
  f.tree.rollback();
}

TEST(ClassifyFringe, SingleCandidateIsIdentifiedAndNoneIsPromoted) {
  ObservationTree t(Alphabet{2}, Alphabet{2});
  // "0" agrees with the root, "1" contradicts it.
  for (const LabeledTrace& lt : std::vector<LabeledTrace>{{{}, 0}, {{0}, 0}, {{1}, 1}}) t.add_trace(lt);
  const NodeId a = t.find(Trace{0});
  const NodeId b = t.find(Trace{1});
  const auto out = classify_fringe(t);
  // Most-visited first: equal counts, so "0" before "1". "0" merges into the
  // root; "1" is then checked against the root only.
  EXPECT_EQ(out.identified, (std::vector<MergePair>{{a, t.root()}}));
  EXPECT_TRUE(out.isolated);
  EXPECT_EQ(out.promoted, 1u);
  t.rollback();
  EXPECT_TRUE(t.is_red(b));
}

TEST(ProcessCounterexample, LengthOneIssuesOneQuery) {
  testutil::TempDir dir("cex1");
  const auto store = build_store(std::vector<LabeledTrace>{{{0}, 1}, {{1}, 0}, {{1, 1}, 1}}, dir / "s", Alphabet{2},
                                 Alphabet{2});
  ObservationTree t(Alphabet{2}, Alphabet{2});
  t.add_trace({{1}, 0});
  t.promote(t.find(Trace{1}));
  TraceStaging staging;
  LearnerConfig cfg;
  EXPECT_EQ(process_counterexample(t, store, {{0}, 1}, cfg, staging), 1u);
  EXPECT_TRUE(t.has_trace(Trace{0}));
  EXPECT_EQ(t.red_nodes().size(), 1u);
  // Empty prefix query returned all three; two are not yet in the tree.
  EXPECT_EQ(staging.size(), 1u);
}

TEST(ProcessCounterexample, StagesAtMostKPerPrefix) {
  testutil::TempDir dir("cex4");
  const auto m = testutil::random_machine(4, 2, 2, 5);
  const auto store = build_store(labelled(m, testutil::all_words(2, 8)), dir / "s", Alphabet{2}, Alphabet{2});
  ObservationTree t(Alphabet{2}, Alphabet{2});
  TraceStaging staging;
  LearnerConfig cfg;
  cfg.k = 3;
  const Trace sigma{1, 0, 1, 1};
  EXPECT_EQ(process_counterexample(t, store, {sigma, evaluate(m, sigma)}, cfg, staging), 4u);
  EXPECT_LE(staging.size(), 4 * cfg.k);
}

TEST(ProcessCounterexample, NextHypothesisIsConsistentWithCounterexample) {
  testutil::TempDir dir("cex-replay");
  const auto parity = testutil::parity_machine();
  const auto store = build_store(labelled(parity, testutil::all_words(2, 5)), dir / "s", Alphabet{2}, Alphabet{2});
  ObservationTree t(Alphabet{2}, Alphabet{2});
  t.add_trace({{}, 0});
  const auto h0 = t.build_hypothesis({});
  const LabeledTrace sigma{{1, 1, 1}, 1};
  ASSERT_NE(evaluate(h0, sigma.trace), sigma.label);
  TraceStaging staging;
  process_counterexample(t, store, sigma, LearnerConfig{}, staging);
  staging.flush(t);
  EXPECT_NE(evaluate(h0, sigma.trace), sigma.label);
  EXPECT_EQ(evaluate(t.build_hypothesis({}), sigma.trace), sigma.label);
}

TEST(DecideOracleOrReset, Threshold) {
  EXPECT_EQ(decide_oracle_or_reset(0, 5), OracleDecision::call_oracle);
  EXPECT_EQ(decide_oracle_or_reset(5, 5), OracleDecision::call_oracle);
  EXPECT_EQ(decide_oracle_or_reset(6, 5), OracleDecision::reset_and_continue);
  EXPECT_EQ(decide_oracle_or_reset(1'000'000, std::numeric_limits<std::size_t>::max()), OracleDecision::call_oracle);
}

TEST(Learn, ParityFromExhaustiveStoreIsExact) {
  testutil::TempDir dir("learn-parity");
  const auto parity = testutil::parity_machine();
  const auto store = build_store(labelled(parity, testutil::all_words(2, 6)), dir / "s", Alphabet{2}, Alphabet{2});
  for (std::size_t k : {1, 10, 100}) {
    LearnerConfig cfg;
    cfg.k = k;
    const auto r = learn(store, cfg);
    EXPECT_FALSE(equivalent(r.hypothesis, parity).has_value()) << "k " << k;
    EXPECT_EQ(r.stats.consistency_violations, 0u);
  }
}

TEST(Learn, SingleTrace) {
  testutil::TempDir dir("learn-one");
  const LabeledTrace x{{1, 0, 1}, 1};
  const auto store = build_store(std::vector<LabeledTrace>{x}, dir / "s", Alphabet{2}, Alphabet{2});
  const auto r = learn(store, LearnerConfig{});
  EXPECT_EQ(evaluate(r.hypothesis, x.trace), x.label);
  EXPECT_EQ(r.stats.traces_included, 1u);
  EXPECT_TRUE(r.stats.no_characteristic_set);
}

TEST(Learn, DataUsageIsMonotoneAndDeterministic) {
  testutil::TempDir dir("learn-mono");
  const auto target = gen_target(10, 2, 2, 3);
  const auto traces = gen_traces(target, 3000, 2, 12, 4).traces;
  const auto store = build_store(traces, dir / "s", Alphabet{2}, Alphabet{2});
  LearnerConfig cfg;
  cfg.seed = 9;
  const auto a = learn(store, cfg);
  const auto b = learn(store, cfg);
  EXPECT_EQ(a.hypothesis, b.hypothesis);
  EXPECT_EQ(a.stats.rounds, b.stats.rounds);
  EXPECT_EQ(a.stats.traces_included, b.stats.traces_included);
  std::size_t last = 0;
  for (const auto& rec : a.stats.log) {
    EXPECT_GE(rec.traces_included, last);
    last = rec.traces_included;
  }
  EXPECT_LE(a.stats.traces_included, store.record_count());
  EXPECT_EQ(a.stats.consistency_violations, 0u);
  EXPECT_FALSE(equivalent(a.hypothesis, target).has_value());
}

TEST(Learn, RejectsBadConfigAndEmptyStore) {
  testutil::TempDir dir("learn-bad");
  const auto empty = build_store(std::vector<LabeledTrace>{}, dir / "e", Alphabet{2}, Alphabet{2});
  EXPECT_THROW(learn(empty, LearnerConfig{}), InputDomainError);
  LearnerConfig cfg;
  cfg.k = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.k = 1;
  cfg.ambiguity_factor = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Learn, CheckpointCanAbort) {
  testutil::TempDir dir("learn-abort");
  const auto store = build_store(labelled(testutil::parity_machine(), testutil::all_words(2, 6)), dir / "s",
                                 Alphabet{2}, Alphabet{2});
  LearnerConfig cfg;
  int calls = 0;
  cfg.checkpoint = [&] {
    if (++calls == 2) throw std::runtime_error("stop");
  };
  EXPECT_THROW(learn(store, cfg), std::runtime_error);
  EXPECT_EQ(calls, 2);
}
