#pragma once

// Abbadingo-style trace files:
//
//   <count> <input alphabet size> [<output alphabet size>]
//   <label> <length> <sym> <sym> ...
//
// The output alphabet size is optional and defaults to 2 (binary labels).

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "daalder/core.hpp"
#include "daalder/machine_io.hpp"

namespace daalder {

struct TraceFileHeader {
  std::size_t count = 0;
  Alphabet inputs{2};
  Alphabet outputs{2};
};

/// Streams records from a trace file without holding more than one in memory.
class TraceFileReader {
 public:
  explicit TraceFileReader(std::istream& in) : in_(in) {
    std::vector<std::string_view> words;
    if (!next_words(words)) throw ParseError(line_no_ + 1, "missing header");
    if (words.size() < 2 || words.size() > 3) throw ParseError(line_no_, "header must be 'count alphabet_size [output_size]'");
    header_.count = detail::parse_count(words[0], line_no_);
    const std::size_t ni = detail::parse_count(words[1], line_no_);
    const std::size_t no = words.size() == 3 ? detail::parse_count(words[2], line_no_) : 2;
    if (ni == 0 || ni > kMaxAlphabetSize || no == 0 || no > kMaxAlphabetSize) throw ParseError(line_no_, "bad alphabet size");
    header_.inputs = Alphabet{ni};
    header_.outputs = Alphabet{no};
  }

  const TraceFileHeader& header() const noexcept { return header_; }

  std::optional<LabeledTrace> next() {
    std::vector<std::string_view> words;
    if (read_ == header_.count) {
      if (next_words(words)) throw ParseError(line_no_, "more records than the header declares");
      return std::nullopt;
    }
    if (!next_words(words)) {
      throw ParseError(line_no_ + 1, "expected " + std::to_string(header_.count) + " records, found " +
                                         std::to_string(read_));
    }
    if (words.size() < 2) throw ParseError(line_no_, "record must be 'label length symbols...'");
    const std::size_t label = detail::parse_count(words[0], line_no_);
    const std::size_t length = detail::parse_count(words[1], line_no_);
    if (!header_.outputs.contains(label)) throw ParseError(line_no_, "label out of range");
    if (words.size() != length + 2) throw ParseError(line_no_, "length does not match number of symbols");
    LabeledTrace lt;
    lt.label = static_cast<Symbol>(label);
    lt.trace.reserve(length);
    for (std::size_t i = 0; i < length; ++i) {
      const std::size_t sym = detail::parse_count(words[i + 2], line_no_);
      if (!header_.inputs.contains(sym)) throw ParseError(line_no_, "symbol out of range");
      lt.trace.push_back(static_cast<Symbol>(sym));
    }
    ++read_;
    return lt;
  }

 private:
  bool next_words(std::vector<std::string_view>& words) {
    while (std::getline(in_, raw_)) {
      ++line_no_;
      words = detail::split_words(raw_);
      if (!words.empty()) return true;
    }
    return false;
  }

  std::istream& in_;
  std::string raw_;
  std::size_t line_no_ = 0;
  std::size_t read_ = 0;
  TraceFileHeader header_;
};

inline void write_trace_header(std::ostream& out, const TraceFileHeader& h) {
  out << h.count << ' ' << h.inputs.size;
  if (h.outputs.size != 2) out << ' ' << h.outputs.size;
  out << '\n';
}

inline void write_trace_record(std::ostream& out, const LabeledTrace& lt) {
  out << lt.label << ' ' << lt.trace.size();
  for (Symbol s : lt.trace) out << ' ' << s;
  out << '\n';
}

inline void save_traces(const std::string& path, Alphabet inputs, Alphabet outputs,
                        std::span<const LabeledTrace> traces) {
  std::ofstream out(path);
  if (!out) throw StorageError("cannot open " + path + " for writing");
  write_trace_header(out, TraceFileHeader{traces.size(), inputs, outputs});
  for (const auto& lt : traces) write_trace_record(out, lt);
  if (!out) throw StorageError("write failed: " + path);
}

inline std::vector<LabeledTrace> load_traces(const std::string& path, TraceFileHeader* header = nullptr) {
  std::ifstream in(path);
  if (!in) throw StorageError("cannot open " + path);
  TraceFileReader reader(in);
  if (header) *header = reader.header();
  std::vector<LabeledTrace> out;
  while (auto lt = reader.next()) out.push_back(std::move(*lt));
  return out;
}

}  // namespace daalder
