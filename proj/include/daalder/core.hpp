#pragma once

// Alphabets, traces and complete deterministic Moore machines.
//
// Symbols of an alphabet of size n are the integers 0..n-1. A trace is a
// finite input word; its label is the output of the state it reaches (Moore
// semantics), so the empty trace is labelled by the initial state's output.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "daalder/errors.hpp"

namespace daalder {

using Symbol = std::uint16_t;
using State = std::uint32_t;
using Trace = std::vector<Symbol>;

inline constexpr std::size_t kMaxAlphabetSize = std::size_t{std::numeric_limits<Symbol>::max()} + 1;

struct Alphabet {
  std::size_t size = 0;

  constexpr bool contains(std::size_t symbol) const noexcept { return symbol < size; }
  constexpr bool operator==(const Alphabet&) const = default;
};

inline Alphabet make_alphabet(std::size_t size) {
  if (size == 0 || size > kMaxAlphabetSize) {
    throw InputDomainError("alphabet size must be in [1, " + std::to_string(kMaxAlphabetSize) +
                           "], got " + std::to_string(size));
  }
  return Alphabet{size};
}

struct LabeledTrace {
  Trace trace;
  Symbol label = 0;

  bool operator==(const LabeledTrace&) const = default;
};

inline bool is_prefix(std::span<const Symbol> prefix, std::span<const Symbol> word) noexcept {
  return prefix.size() <= word.size() && std::equal(prefix.begin(), prefix.end(), word.begin());
}

/// Length first, then lexicographic.
inline bool shortlex_less(std::span<const Symbol> a, std::span<const Symbol> b) noexcept {
  if (a.size() != b.size()) return a.size() < b.size();
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

inline std::string to_string(std::span<const Symbol> trace) {
  if (trace.empty()) return "<eps>";
  std::string out;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(trace[i]);
  }
  return out;
}

/// Complete deterministic Moore machine with a transition table of
/// num_states x |inputs| entries and one output per state.
class MooreMachine {
 public:
  MooreMachine() : MooreMachine(Alphabet{1}, Alphabet{1}, 1) {}

  /// Every transition starts as a self-loop and every output as 0.
  MooreMachine(Alphabet inputs, Alphabet outputs, std::size_t num_states, State initial = 0)
      : inputs_(make_alphabet(inputs.size)), outputs_(make_alphabet(outputs.size)), initial_(initial) {
    if (num_states == 0) throw InputDomainError("a Moore machine needs at least one state");
    if (num_states > std::numeric_limits<State>::max()) throw InputDomainError("too many states");
    if (initial >= num_states) throw InputDomainError("initial state out of range");
    delta_.resize(num_states * inputs_.size);
    for (std::size_t s = 0; s < num_states; ++s) {
      for (std::size_t a = 0; a < inputs_.size; ++a) delta_[s * inputs_.size + a] = static_cast<State>(s);
    }
    lambda_.assign(num_states, 0);
  }

  static MooreMachine from_tables(Alphabet inputs, Alphabet outputs, State initial, std::vector<State> delta,
                                  std::vector<Symbol> lambda) {
    MooreMachine m(inputs, outputs, lambda.empty() ? 1 : lambda.size(), 0);
    if (lambda.empty()) throw InputDomainError("a Moore machine needs at least one state");
    if (delta.size() != lambda.size() * inputs.size) throw InputDomainError("transition table has wrong size");
    if (initial >= lambda.size()) throw InputDomainError("initial state out of range");
    for (State t : delta) {
      if (t >= lambda.size()) throw InputDomainError("transition target out of range");
    }
    for (Symbol o : lambda) {
      if (!outputs.contains(o)) throw InputDomainError("output symbol out of range");
    }
    m.initial_ = initial;
    m.delta_ = std::move(delta);
    m.lambda_ = std::move(lambda);
    return m;
  }

  std::size_t num_states() const noexcept { return lambda_.size(); }
  Alphabet inputs() const noexcept { return inputs_; }
  Alphabet outputs() const noexcept { return outputs_; }
  State initial() const noexcept { return initial_; }

  State next(State s, Symbol a) const noexcept { return delta_[std::size_t{s} * inputs_.size + a]; }
  Symbol output(State s) const noexcept { return lambda_[s]; }

  void set_transition(State s, Symbol a, State target) {
    check_state(s);
    check_state(target);
    check_input(a);
    delta_[std::size_t{s} * inputs_.size + a] = target;
  }
  void set_output(State s, Symbol o) {
    check_state(s);
    if (!outputs_.contains(o)) throw InputDomainError("output symbol " + std::to_string(o) + " out of range");
    lambda_[s] = o;
  }
  void set_initial(State s) {
    check_state(s);
    initial_ = s;
  }

  /// Follows `word` from `from`; throws on symbols outside the input alphabet.
  State run(State from, std::span<const Symbol> word) const {
    State s = from;
    for (Symbol a : word) {
      check_input(a);
      s = next(s, a);
    }
    return s;
  }

  std::span<const State> transition_table() const noexcept { return delta_; }
  std::span<const Symbol> output_table() const noexcept { return lambda_; }

  bool operator==(const MooreMachine&) const = default;

 private:
  void check_state(State s) const {
    if (s >= num_states()) throw InputDomainError("state " + std::to_string(s) + " out of range");
  }
  void check_input(Symbol a) const {
    if (!inputs_.contains(a)) throw InputDomainError("input symbol " + std::to_string(a) + " out of range");
  }

  Alphabet inputs_;
  Alphabet outputs_;
  State initial_ = 0;
  std::vector<State> delta_;
  std::vector<Symbol> lambda_;
};

inline Symbol evaluate(const MooreMachine& m, std::span<const Symbol> trace) {
  return m.output(m.run(m.initial(), trace));
}

namespace detail {

// Renumbers the states reachable from the initial state in BFS order
// (smallest input symbol first). The result is a canonical form for
// machines that are already minimal.
inline MooreMachine renumber_reachable(const MooreMachine& m, std::span<const State> block_of,
                                       std::size_t num_blocks) {
  const std::size_t k = m.inputs().size;
  constexpr State kUnset = std::numeric_limits<State>::max();
  std::vector<State> order(num_blocks, kUnset);
  std::vector<State> representative;
  std::deque<State> queue;
  const State init_block = block_of[m.initial()];
  order[init_block] = 0;
  representative.push_back(m.initial());
  queue.push_back(m.initial());
  while (!queue.empty()) {
    State s = queue.front();
    queue.pop_front();
    for (std::size_t a = 0; a < k; ++a) {
      State t = m.next(s, static_cast<Symbol>(a));
      State b = block_of[t];
      if (order[b] == kUnset) {
        order[b] = static_cast<State>(representative.size());
        representative.push_back(t);
        queue.push_back(t);
      }
    }
  }
  std::vector<State> delta(representative.size() * k);
  std::vector<Symbol> lambda(representative.size());
  for (std::size_t i = 0; i < representative.size(); ++i) {
    State s = representative[i];
    lambda[i] = m.output(s);
    for (std::size_t a = 0; a < k; ++a) delta[i * k + a] = order[block_of[m.next(s, static_cast<Symbol>(a))]];
  }
  return MooreMachine::from_tables(m.inputs(), m.outputs(), 0, std::move(delta), std::move(lambda));
}

}  // namespace detail

/// Drops states unreachable from the initial state.
inline MooreMachine trim(const MooreMachine& m) {
  std::vector<State> identity(m.num_states());
  for (std::size_t s = 0; s < identity.size(); ++s) identity[s] = static_cast<State>(s);
  return detail::renumber_reachable(m, identity, identity.size());
}

/// Minimal complete machine with the same behaviour. Unreachable states are
/// trimmed, then the output partition is refined by successor blocks until
/// stable. States of the result are numbered in BFS order, so two minimal
/// machines for the same behaviour compare equal.
inline MooreMachine minimize(const MooreMachine& m) {
  const MooreMachine t = trim(m);
  const std::size_t n = t.num_states();
  const std::size_t k = t.inputs().size;

  std::vector<State> block(n);
  std::size_t num_blocks = 0;
  {
    std::map<Symbol, State> by_output;
    for (std::size_t s = 0; s < n; ++s) {
      auto [it, inserted] = by_output.try_emplace(t.output(static_cast<State>(s)), static_cast<State>(num_blocks));
      if (inserted) ++num_blocks;
      block[s] = it->second;
    }
  }
  std::vector<State> signature(k + 1);
  while (true) {
    std::map<std::vector<State>, State> ids;
    std::vector<State> refined(n);
    for (std::size_t s = 0; s < n; ++s) {
      signature[0] = block[s];
      for (std::size_t a = 0; a < k; ++a) signature[a + 1] = block[t.next(static_cast<State>(s), static_cast<Symbol>(a))];
      auto [it, inserted] = ids.try_emplace(signature, static_cast<State>(ids.size()));
      refined[s] = it->second;
    }
    const bool stable = ids.size() == num_blocks;
    block = std::move(refined);
    num_blocks = ids.size();
    if (stable) break;
  }
  return detail::renumber_reachable(t, block, num_blocks);
}

/// Shortest trace on which `a` and `b` produce different outputs, or nothing
/// if they agree everywhere. Breadth-first search over the product.
inline std::optional<Trace> equivalent(const MooreMachine& a, const MooreMachine& b) {
  if (a.inputs() != b.inputs() || a.outputs() != b.outputs()) {
    throw InputDomainError("cannot compare machines over different alphabets");
  }
  const std::size_t k = a.inputs().size;
  const std::size_t nb = b.num_states();
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  struct Visit {
    std::size_t parent = kNone;
    Symbol via = 0;
    bool seen = false;
  };
  std::vector<Visit> visits(a.num_states() * nb);
  std::deque<std::size_t> queue;
  const std::size_t start = std::size_t{a.initial()} * nb + b.initial();
  visits[start].seen = true;
  queue.push_back(start);
  while (!queue.empty()) {
    const std::size_t pair = queue.front();
    queue.pop_front();
    const auto sa = static_cast<State>(pair / nb);
    const auto sb = static_cast<State>(pair % nb);
    if (a.output(sa) != b.output(sb)) {
      Trace word;
      for (std::size_t cur = pair; visits[cur].parent != kNone; cur = visits[cur].parent) {
        word.push_back(visits[cur].via);
      }
      std::reverse(word.begin(), word.end());
      return word;
    }
    for (std::size_t s = 0; s < k; ++s) {
      const auto sym = static_cast<Symbol>(s);
      const std::size_t succ = std::size_t{a.next(sa, sym)} * nb + b.next(sb, sym);
      if (!visits[succ].seen) {
        visits[succ] = Visit{pair, sym, true};
        queue.push_back(succ);
      }
    }
  }
  return std::nullopt;
}

}  // namespace daalder
