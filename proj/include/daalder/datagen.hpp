#pragma once

// Random targets and random-walk trace samples.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "daalder/core.hpp"
#include "daalder/learner.hpp"

namespace daalder {

/// splitmix64; derives independent seeds from one master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline constexpr std::size_t kTargetRetryLimit = 1000;

/// Uniformly random machine, trimmed and minimized, redrawn until the
/// minimal size lies in [0.9 * num_states, num_states]. Raw machines are
/// drawn with ceil(1.25 * num_states) states so that the reachable part
/// lands near num_states.
inline MooreMachine gen_target(std::size_t num_states, std::size_t input_size, std::size_t output_size,
                               std::uint64_t seed) {
  if (num_states == 0) throw InputDomainError("num_states must be >= 1");
  const Alphabet inputs = make_alphabet(input_size);
  const Alphabet outputs = make_alphabet(output_size);
  const auto lower = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(num_states)));
  const auto raw_states = static_cast<std::size_t>(std::ceil(1.25 * static_cast<double>(num_states)));
  for (std::size_t attempt = 0; attempt < kTargetRetryLimit; ++attempt) {
    std::mt19937_64 rng(derive_seed(seed, attempt));
    std::uniform_int_distribution<State> pick_state(0, static_cast<State>(raw_states - 1));
    std::uniform_int_distribution<std::size_t> pick_output(0, output_size - 1);
    std::vector<State> delta(raw_states * input_size);
    std::vector<Symbol> lambda(raw_states);
    for (auto& t : delta) t = pick_state(rng);
    for (auto& o : lambda) o = static_cast<Symbol>(pick_output(rng));
    MooreMachine m = minimize(MooreMachine::from_tables(inputs, outputs, 0, std::move(delta), std::move(lambda)));
    if (m.num_states() >= lower && m.num_states() <= num_states) return m;
  }
  throw GenerationError("no machine with " + std::to_string(num_states) + " states after " +
                        std::to_string(kTargetRetryLimit) + " attempts");
}

enum class WalkPolicy {
  /// Next symbol chosen with weight 1 / (1 + visits(successor)).
  coverage_biased,
  uniform,
};

struct TraceGenResult {
  std::vector<LabeledTrace> traces;
  /// The attempt bound was hit before `count` unique traces were found.
  bool exhausted = false;
  std::size_t attempts = 0;
};

/// Samples unique labelled traces by random walks. Visit counts persist
/// across walks (and across calls sharing `visits`), so the walk drifts
/// towards rarely visited states.
class TraceSampler {
 public:
  TraceSampler(const MooreMachine& m, std::size_t len_min, std::size_t len_max, std::uint64_t seed,
               WalkPolicy policy = WalkPolicy::coverage_biased)
      : m_(m), len_min_(len_min), len_max_(len_max), rng_(seed), policy_(policy), visits_(m.num_states(), 0),
        weights_(m.inputs().size) {
    if (len_min > len_max) throw InputDomainError("len_min must not exceed len_max");
  }

  /// Draws up to `count` traces not seen before by this sampler; gives up
  /// after count * 100 attempts.
  TraceGenResult sample(std::size_t count) {
    if (count == 0) throw InputDomainError("count must be >= 1");
    TraceGenResult out;
    out.traces.reserve(count);
    const std::size_t max_attempts = count * 100;
    std::uniform_int_distribution<std::size_t> pick_len(len_min_, len_max_);
    while (out.traces.size() < count) {
      if (out.attempts == max_attempts) {
        out.exhausted = true;
        break;
      }
      ++out.attempts;
      LabeledTrace lt;
      lt.trace.resize(pick_len(rng_));
      State s = m_.initial();
      for (auto& sym : lt.trace) {
        sym = choose(s);
        s = m_.next(s, sym);
        ++visits_[s];
      }
      lt.label = m_.output(s);
      if (emitted_.insert(lt.trace).second) out.traces.push_back(std::move(lt));
    }
    return out;
  }

  const std::vector<std::uint64_t>& visits() const noexcept { return visits_; }

 private:
  Symbol choose(State s) {
    const std::size_t k = m_.inputs().size;
    if (policy_ == WalkPolicy::uniform) {
      return static_cast<Symbol>(std::uniform_int_distribution<std::size_t>(0, k - 1)(rng_));
    }
    double total = 0;
    for (std::size_t a = 0; a < k; ++a) {
      weights_[a] = 1.0 / (1.0 + static_cast<double>(visits_[m_.next(s, static_cast<Symbol>(a))]));
      total += weights_[a];
    }
    double r = std::uniform_real_distribution<double>(0.0, total)(rng_);
    for (std::size_t a = 0; a + 1 < k; ++a) {
      if (r < weights_[a]) return static_cast<Symbol>(a);
      r -= weights_[a];
    }
    return static_cast<Symbol>(k - 1);
  }

  const MooreMachine& m_;
  std::size_t len_min_;
  std::size_t len_max_;
  std::mt19937_64 rng_;
  WalkPolicy policy_;
  std::vector<std::uint64_t> visits_;
  std::vector<double> weights_;
  std::unordered_set<Trace, detail::TraceHash> emitted_;
};

inline TraceGenResult gen_traces(const MooreMachine& m, std::size_t count, std::size_t len_min, std::size_t len_max,
                                 std::uint64_t seed, WalkPolicy policy = WalkPolicy::coverage_biased) {
  TraceSampler sampler(m, len_min, len_max, seed, policy);
  return sampler.sample(count);
}

struct Dataset {
  /// Train sets, one per requested size; each is a prefix of the next.
  std::vector<std::vector<LabeledTrace>> train;
  std::vector<LabeledTrace> test;
  bool exhausted = false;
};

/// One stream of unique traces: the first max(train_sizes) form the nested
/// train sets, the next test_size form the disjoint test set.
inline Dataset make_dataset(const MooreMachine& m, const std::vector<std::size_t>& train_sizes, std::size_t test_size,
                            std::size_t len_min, std::size_t len_max, std::uint64_t seed) {
  if (train_sizes.empty()) throw InputDomainError("need at least one train size");
  for (std::size_t i = 0; i < train_sizes.size(); ++i) {
    if (train_sizes[i] == 0 || (i > 0 && train_sizes[i] <= train_sizes[i - 1])) {
      throw InputDomainError("train sizes must be positive and increasing");
    }
  }
  TraceSampler sampler(m, len_min, len_max, seed);
  Dataset ds;
  TraceGenResult train = sampler.sample(train_sizes.back());
  ds.exhausted = train.exhausted;
  for (std::size_t size : train_sizes) {
    const std::size_t take = std::min(size, train.traces.size());
    ds.train.emplace_back(train.traces.begin(), train.traces.begin() + static_cast<std::ptrdiff_t>(take));
  }
  if (test_size > 0) {
    TraceGenResult test = sampler.sample(test_size);
    ds.exhausted = ds.exhausted || test.exhausted;
    ds.test = std::move(test.traces);
  }
  return ds;
}

/// Every trace of length <= max_len, labelled by `m`.
inline std::vector<LabeledTrace> all_traces(const MooreMachine& m, std::size_t max_len) {
  std::vector<LabeledTrace> out;
  std::vector<std::pair<Trace, State>> level{{Trace{}, m.initial()}};
  for (std::size_t len = 0; len <= max_len; ++len) {
    std::vector<std::pair<Trace, State>> next;
    for (auto& [t, s] : level) {
      out.push_back({t, m.output(s)});
      if (len == max_len) continue;
      for (std::size_t a = 0; a < m.inputs().size; ++a) {
        Trace ext = t;
        ext.push_back(static_cast<Symbol>(a));
        next.emplace_back(std::move(ext), m.next(s, static_cast<Symbol>(a)));
      }
    }
    level = std::move(next);
  }
  return out;
}

}  // namespace daalder
