#pragma once

#include <cstdint>
#include <optional>

#include "daalder/core.hpp"
#include "daalder/trace_store.hpp"

namespace daalder {

struct OracleVerdict {
  /// Absent means the hypothesis was accepted.
  std::optional<LabeledTrace> counterexample;
  /// Records compared before the verdict.
  std::uint64_t records_checked = 0;

  bool accepted() const noexcept { return !counterexample.has_value(); }
};

/// Streams up to `budget` records (every record when unset) in the seeded
/// pseudo-random order of the store and returns the first one the hypothesis
/// mislabels.
inline OracleVerdict randomized_equivalence(const TraceStore& store, const MooreMachine& h,
                                            std::optional<std::uint64_t> budget, std::uint64_t seed) {
  if (h.inputs() != store.inputs() || h.outputs() != store.outputs()) {
    throw InputDomainError("hypothesis and store use different alphabets");
  }
  OracleVerdict verdict;
  const std::uint64_t limit = budget.value_or(store.record_count());
  RandomStream stream = store.random_stream(seed);
  while (verdict.records_checked < limit) {
    auto rec = stream.next();
    if (!rec) break;
    ++verdict.records_checked;
    if (evaluate(h, rec->trace) != rec->label) {
      verdict.counterexample = std::move(rec);
      break;
    }
  }
  return verdict;
}

/// Exact oracle for tests and benchmarks: the shortest trace on which the
/// hypothesis differs from the target, labelled by the target.
inline OracleVerdict exact_equivalence(const MooreMachine& target, const MooreMachine& h) {
  OracleVerdict verdict;
  if (auto diff = equivalent(target, h)) {
    const Symbol label = evaluate(target, *diff);
    verdict.counterexample = LabeledTrace{std::move(*diff), label};
  }
  return verdict;
}

}  // namespace daalder
