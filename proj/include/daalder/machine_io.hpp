#pragma once

// Text serialization for Moore machines.
//
//   moore-machine 1
//   states <n>
//   inputs <|I|>
//   outputs <|O|>
//   initial <state>
//   output <state> <symbol>            one per state
//   transition <state> <symbol> <state> one per (state, input) pair
//
// Blank lines and lines starting with '#' are ignored. Every table entry must
// appear exactly once; `output` and `transition` lines may be interleaved.

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "daalder/core.hpp"

namespace daalder {

inline constexpr std::string_view kMachineFormatTag = "moore-machine";
inline constexpr int kMachineFormatVersion = 1;

inline void write_machine(std::ostream& out, const MooreMachine& m) {
  out << kMachineFormatTag << ' ' << kMachineFormatVersion << '\n';
  out << "states " << m.num_states() << '\n';
  out << "inputs " << m.inputs().size << '\n';
  out << "outputs " << m.outputs().size << '\n';
  out << "initial " << m.initial() << '\n';
  for (State s = 0; s < m.num_states(); ++s) out << "output " << s << ' ' << m.output(s) << '\n';
  for (State s = 0; s < m.num_states(); ++s) {
    for (std::size_t a = 0; a < m.inputs().size; ++a) {
      out << "transition " << s << ' ' << a << ' ' << m.next(s, static_cast<Symbol>(a)) << '\n';
    }
  }
}

inline std::string serialize(const MooreMachine& m) {
  std::ostringstream out;
  write_machine(out, m);
  return out.str();
}

namespace detail {

inline std::vector<std::string_view> split_words(std::string_view line) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) words.push_back(line.substr(i, j - i));
    i = j;
  }
  return words;
}

inline std::size_t parse_count(std::string_view word, std::size_t line) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), value);
  if (ec != std::errc{} || ptr != word.data() + word.size()) {
    throw ParseError(line, "expected a non-negative integer, got '" + std::string(word) + "'");
  }
  return value;
}

}  // namespace detail

inline MooreMachine read_machine(std::istream& in) {
  std::string raw;
  std::size_t line_no = 0;
  auto next_line = [&](std::vector<std::string_view>& words) {
    while (std::getline(in, raw)) {
      ++line_no;
      words = detail::split_words(raw);
      if (words.empty() || words[0].starts_with('#')) continue;
      return true;
    }
    return false;
  };
  std::vector<std::string_view> words;
  auto expect_key = [&](std::string_view key) {
    if (!next_line(words)) throw ParseError(line_no + 1, "unexpected end of input, expected '" + std::string(key) + "'");
    if (words.size() != 2 || words[0] != key) throw ParseError(line_no, "expected '" + std::string(key) + " <value>'");
    return detail::parse_count(words[1], line_no);
  };

  if (!next_line(words)) throw ParseError(line_no + 1, "empty input");
  if (words.size() != 2 || words[0] != kMachineFormatTag) throw ParseError(line_no, "missing 'moore-machine' header");
  if (detail::parse_count(words[1], line_no) != kMachineFormatVersion) {
    throw ParseError(line_no, "unsupported format version " + std::string(words[1]));
  }
  const std::size_t n = expect_key("states");
  const std::size_t ni = expect_key("inputs");
  const std::size_t no = expect_key("outputs");
  const std::size_t initial = expect_key("initial");
  if (n == 0) throw ParseError(line_no, "machine needs at least one state");
  if (ni == 0 || ni > kMaxAlphabetSize || no == 0 || no > kMaxAlphabetSize) throw ParseError(line_no, "bad alphabet size");
  if (initial >= n) throw ParseError(line_no, "initial state out of range");

  constexpr State kUnset = std::numeric_limits<State>::max();
  std::vector<State> delta(n * ni, kUnset);
  std::vector<Symbol> lambda(n);
  std::vector<bool> has_output(n, false);
  std::size_t outputs_seen = 0;
  std::size_t transitions_seen = 0;
  while (outputs_seen < n || transitions_seen < n * ni) {
    if (!next_line(words)) {
      throw ParseError(line_no + 1, "unexpected end of input: " + std::to_string(outputs_seen) + "/" +
                                        std::to_string(n) + " outputs, " + std::to_string(transitions_seen) + "/" +
                                        std::to_string(n * ni) + " transitions");
    }
    if (words[0] == "output" && words.size() == 3) {
      const std::size_t s = detail::parse_count(words[1], line_no);
      const std::size_t o = detail::parse_count(words[2], line_no);
      if (s >= n) throw ParseError(line_no, "state out of range");
      if (o >= no) throw ParseError(line_no, "output symbol out of range");
      if (has_output[s]) throw ParseError(line_no, "duplicate output for state " + std::to_string(s));
      has_output[s] = true;
      lambda[s] = static_cast<Symbol>(o);
      ++outputs_seen;
    } else if (words[0] == "transition" && words.size() == 4) {
      const std::size_t s = detail::parse_count(words[1], line_no);
      const std::size_t a = detail::parse_count(words[2], line_no);
      const std::size_t t = detail::parse_count(words[3], line_no);
      if (s >= n || t >= n) throw ParseError(line_no, "state out of range");
      if (a >= ni) throw ParseError(line_no, "input symbol out of range");
      State& slot = delta[s * ni + a];
      if (slot != kUnset) throw ParseError(line_no, "duplicate transition");
      slot = static_cast<State>(t);
      ++transitions_seen;
    } else {
      throw ParseError(line_no, "expected 'output s o' or 'transition s a t'");
    }
  }
  if (next_line(words)) throw ParseError(line_no, "trailing content after complete machine");
  return MooreMachine::from_tables(Alphabet{ni}, Alphabet{no}, static_cast<State>(initial), std::move(delta),
                                   std::move(lambda));
}

inline MooreMachine deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  return read_machine(in);
}

inline void save_machine(const std::string& path, const MooreMachine& m) {
  std::ofstream out(path);
  if (!out) throw StorageError("cannot open " + path + " for writing");
  write_machine(out, m);
  if (!out) throw StorageError("write failed: " + path);
}

inline MooreMachine load_machine(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StorageError("cannot open " + path);
  return read_machine(in);
}

/// Graphviz rendering; each node shows "state / output".
inline std::string to_dot(const MooreMachine& m, std::string_view name = "moore") {
  std::ostringstream out;
  out << "digraph " << name << " {\n  rankdir=LR;\n  __start [shape=point];\n";
  out << "  __start -> s" << m.initial() << ";\n";
  for (State s = 0; s < m.num_states(); ++s) {
    out << "  s" << s << " [label=\"" << s << " / " << m.output(s) << "\"];\n";
  }
  for (State s = 0; s < m.num_states(); ++s) {
    // Parallel edges to the same target are drawn once with a joined label.
    std::map<State, std::string> edges;
    for (std::size_t a = 0; a < m.inputs().size; ++a) {
      std::string& label = edges[m.next(s, static_cast<Symbol>(a))];
      if (!label.empty()) label += ',';
      label += std::to_string(a);
    }
    for (const auto& [target, label] : edges) {
      out << "  s" << s << " -> s" << target << " [label=\"" << label << "\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace daalder
