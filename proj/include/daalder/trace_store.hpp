#pragma once

// Disk-backed, prefix-ordered store of labelled traces.
//
// A store is a directory with three files:
//
//   manifest.txt  text, versioned: alphabets, record count, block size
//   payload.bin   records sorted lexicographically by trace, no duplicates;
//                 record = u32 length | length x u16 symbol | u16 label
//   index.bin     u8[8] magic "DAALIDX1" | u64 record_count | u64 block_size
//                 | u64 fence_count | u64 offsets_pos | u64 fences_pos
//                 then at offsets_pos: record_count x u64 payload offset
//                 then at fences_pos, per block of block_size records:
//                 u64 payload offset | u32 key length | key length x u16
//
// All integers are little-endian. Lexicographic order puts a trace directly
// before its extensions, so the records with prefix t form one contiguous
// range starting at lower_bound(t). Only the sparse fence keys live in memory;
// everything else is read on demand with pread.

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "daalder/core.hpp"

namespace daalder {

namespace store_detail {

inline constexpr std::array<char, 8> kIndexMagic = {'D', 'A', 'A', 'L', 'I', 'D', 'X', '1'};
inline constexpr std::size_t kIndexHeaderSize = 48;
inline constexpr std::string_view kManifestTag = "daalder-store";
inline constexpr int kManifestVersion = 1;

inline void put_u16(std::vector<char>& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::vector<char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint16_t get_u16(const char* p) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(p[0]) | (static_cast<unsigned char>(p[1]) << 8));
}
inline std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}
inline std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

inline void encode_record(std::vector<char>& out, const LabeledTrace& lt) {
  put_u32(out, static_cast<std::uint32_t>(lt.trace.size()));
  for (Symbol s : lt.trace) put_u16(out, s);
  put_u16(out, lt.label);
}

inline std::size_t encoded_size(std::size_t length) { return 4 + 2 * length + 2; }

/// Owning POSIX file descriptor.
class File {
 public:
  File() = default;
  File(const std::filesystem::path& path, int flags, mode_t mode = 0644) : path_(path.string()) {
    fd_ = ::open(path_.c_str(), flags | O_CLOEXEC, mode);
    if (fd_ < 0) throw StorageError("cannot open " + path_ + ": " + std::strerror(errno));
  }
  File(File&& o) noexcept : fd_(std::exchange(o.fd_, -1)), path_(std::move(o.path_)) {}
  File& operator=(File&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
      path_ = std::move(o.path_);
    }
    return *this;
  }
  File(const File&) = delete;
  File& operator=(const File&) = delete;
  ~File() { close(); }

  bool is_open() const noexcept { return fd_ >= 0; }
  const std::string& path() const noexcept { return path_; }

  /// Reads up to `size` bytes; returns the number read (short only at EOF).
  std::size_t read_at(char* buf, std::size_t size, std::uint64_t offset) const {
    std::size_t done = 0;
    while (done < size) {
      ssize_t r = ::pread(fd_, buf + done, size - done, static_cast<off_t>(offset + done));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw StorageError("read failed on " + path_ + ": " + std::strerror(errno));
      }
      if (r == 0) break;
      done += static_cast<std::size_t>(r);
    }
    return done;
  }
  void read_exact(char* buf, std::size_t size, std::uint64_t offset) const {
    if (read_at(buf, size, offset) != size) throw StorageError("unexpected end of file in " + path_);
  }
  void write_all(const char* buf, std::size_t size) {
    while (size > 0) {
      ssize_t w = ::write(fd_, buf, size);
      if (w < 0) {
        if (errno == EINTR) continue;
        throw StorageError("write failed on " + path_ + ": " + std::strerror(errno));
      }
      buf += w;
      size -= static_cast<std::size_t>(w);
    }
  }
  void write_at(const char* buf, std::size_t size, std::uint64_t offset) {
    while (size > 0) {
      ssize_t w = ::pwrite(fd_, buf, size, static_cast<off_t>(offset));
      if (w < 0) {
        if (errno == EINTR) continue;
        throw StorageError("write failed on " + path_ + ": " + std::strerror(errno));
      }
      buf += w;
      size -= static_cast<std::size_t>(w);
      offset += static_cast<std::uint64_t>(w);
    }
  }

 private:
  void close() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  int fd_ = -1;
  std::string path_;
};

/// Append-only writer with a fixed-size buffer.
class BufferedWriter {
 public:
  /// `start` is the file position the writer begins at.
  explicit BufferedWriter(File file, std::uint64_t start = 0, std::size_t capacity = 1 << 16)
      : file_(std::move(file)), capacity_(capacity), flushed_(start) {
    buf_.reserve(capacity_);
  }
  BufferedWriter(BufferedWriter&&) = default;

  std::vector<char>& buffer() noexcept { return buf_; }
  std::uint64_t position() const noexcept { return flushed_ + buf_.size(); }

  void maybe_flush() {
    if (buf_.size() >= capacity_) flush();
  }
  void flush() {
    file_.write_all(buf_.data(), buf_.size());
    flushed_ += buf_.size();
    buf_.clear();
  }
  File& file() noexcept { return file_; }

 private:
  File file_;
  std::size_t capacity_;
  std::vector<char> buf_;
  std::uint64_t flushed_ = 0;
};

/// Sequential record reader over a payload-format file starting at any
/// record boundary.
class RecordReader {
 public:
  RecordReader(const File& file, std::uint64_t offset, std::uint64_t end, std::size_t capacity = 1 << 16)
      : file_(&file), pos_(offset), end_(end), buf_(capacity) {}

  /// False at end of data.
  bool next(LabeledTrace& out) {
    if (pos_ >= end_) return false;
    ensure(4);
    const std::uint32_t len = get_u32(buf_.data() + head_);
    const std::size_t size = encoded_size(len);
    ensure(size);
    const char* p = buf_.data() + head_;
    out.trace.resize(len);
    for (std::uint32_t i = 0; i < len; ++i) out.trace[i] = get_u16(p + 4 + 2 * i);
    out.label = get_u16(p + 4 + 2 * len);
    head_ += size;
    pos_ += size;
    return true;
  }

 private:
  void ensure(std::size_t size) {
    if (tail_ - head_ >= size) return;
    const std::size_t have = tail_ - head_;
    std::memmove(buf_.data(), buf_.data() + head_, have);
    head_ = 0;
    tail_ = have;
    if (buf_.size() < size) buf_.resize(size);
    const std::uint64_t file_pos = pos_ + have;
    const std::size_t want = static_cast<std::size_t>(std::min<std::uint64_t>(buf_.size() - tail_, end_ - file_pos));
    tail_ += file_->read_at(buf_.data() + tail_, want, file_pos);
    if (tail_ < size) throw StorageError("truncated record in " + file_->path());
  }

  const File* file_;
  std::uint64_t pos_;
  std::uint64_t end_;
  std::vector<char> buf_;
  std::size_t head_ = 0;
  std::size_t tail_ = 0;
};

inline bool trace_less(const Trace& a, const Trace& b) noexcept {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace store_detail

struct StoreOptions {
  /// Memory for in-memory sort runs during build.
  std::size_t sort_buffer_bytes = std::size_t{64} << 20;
  /// Records per sparse index entry.
  std::size_t block_size = 64;
};

struct PrefixQueryResult {
  std::vector<LabeledTrace> items;
};

class TraceStore;

/// Streams every record of a store exactly once in a seeded pseudo-random
/// order: record ids are visited as x -> (a*x + c) mod m with m the smallest
/// power of two >= record_count and a odd, skipping ids >= record_count.
class RandomStream {
 public:
  RandomStream(const TraceStore& store, std::uint64_t seed);

  std::optional<LabeledTrace> next();

 private:
  const TraceStore* store_;
  std::uint64_t modulus_ = 1;
  std::uint64_t multiplier_ = 1;
  std::uint64_t increment_ = 0;
  std::uint64_t step_ = 0;
};

class TraceStore {
 public:
  static TraceStore open(const std::filesystem::path& dir) {
    using namespace store_detail;
    TraceStore s;
    s.dir_ = dir;
    std::ifstream manifest(dir / "manifest.txt");
    if (!manifest) throw StorageError("missing manifest in " + dir.string());
    std::string tag;
    int version = 0;
    manifest >> tag >> version;
    if (tag != kManifestTag || version != kManifestVersion) throw StorageError("bad store manifest in " + dir.string());
    std::string key;
    std::size_t value = 0;
    std::size_t records = 0, inputs = 0, outputs = 0, block = 0;
    while (manifest >> key >> value) {
      if (key == "records") records = value;
      else if (key == "inputs") inputs = value;
      else if (key == "outputs") outputs = value;
      else if (key == "block_size") block = value;
      else if (key == "max_length") s.max_length_ = value;
    }
    if (inputs == 0 || outputs == 0 || block == 0) throw StorageError("incomplete store manifest in " + dir.string());
    s.inputs_ = Alphabet{inputs};
    s.outputs_ = Alphabet{outputs};
    s.payload_ = File(dir / "payload.bin", O_RDONLY);
    s.index_ = File(dir / "index.bin", O_RDONLY);

    std::array<char, kIndexHeaderSize> header{};
    s.index_.read_exact(header.data(), header.size(), 0);
    if (!std::equal(kIndexMagic.begin(), kIndexMagic.end(), header.begin())) throw StorageError("bad index magic");
    s.record_count_ = get_u64(header.data() + 8);
    s.block_size_ = get_u64(header.data() + 16);
    const std::uint64_t fence_count = get_u64(header.data() + 24);
    s.offsets_pos_ = get_u64(header.data() + 32);
    const std::uint64_t fences_pos = get_u64(header.data() + 40);
    if (s.record_count_ != records || s.block_size_ != block) throw StorageError("manifest and index disagree");

    struct stat st {};
    if (::stat((dir / "payload.bin").c_str(), &st) != 0) throw StorageError("cannot stat payload");
    s.payload_size_ = static_cast<std::uint64_t>(st.st_size);

    s.fences_.reserve(fence_count);
    std::uint64_t pos = fences_pos;
    std::array<char, 12> fh{};
    for (std::uint64_t f = 0; f < fence_count; ++f) {
      s.index_.read_exact(fh.data(), fh.size(), pos);
      Fence fence;
      fence.offset = get_u64(fh.data());
      const std::uint32_t len = get_u32(fh.data() + 8);
      pos += fh.size();
      std::vector<char> key_bytes(2 * std::size_t{len});
      s.index_.read_exact(key_bytes.data(), key_bytes.size(), pos);
      pos += key_bytes.size();
      fence.key.resize(len);
      for (std::uint32_t i = 0; i < len; ++i) fence.key[i] = get_u16(key_bytes.data() + 2 * i);
      s.fences_.push_back(std::move(fence));
    }
    return s;
  }

  std::uint64_t record_count() const noexcept { return record_count_; }
  Alphabet inputs() const noexcept { return inputs_; }
  Alphabet outputs() const noexcept { return outputs_; }
  std::size_t max_length() const noexcept { return max_length_; }
  std::size_t block_size() const noexcept { return block_size_; }
  const std::filesystem::path& path() const noexcept { return dir_; }

  /// Up to k records extending `prefix`, of length <= max_len when given, in
  /// lexicographic order. Reads at most one block before the first match.
  PrefixQueryResult prefix_query(std::span<const Symbol> prefix, std::optional<std::size_t> max_len,
                                 std::size_t k) const {
    if (k == 0) throw InputDomainError("prefix_query needs k >= 1");
    PrefixQueryResult result;
    if (record_count_ == 0) return result;
    const Trace key(prefix.begin(), prefix.end());
    auto it = std::lower_bound(fences_.begin(), fences_.end(), key,
                               [](const Fence& f, const Trace& t) { return store_detail::trace_less(f.key, t); });
    const std::size_t block = it == fences_.begin() ? 0 : static_cast<std::size_t>(it - fences_.begin()) - 1;
    store_detail::RecordReader reader(payload_, fences_[block].offset, payload_size_, read_buffer_size());
    LabeledTrace rec;
    while (reader.next(rec)) {
      if (store_detail::trace_less(rec.trace, key)) continue;
      if (!is_prefix(key, rec.trace)) break;
      if (max_len && rec.trace.size() > *max_len) continue;
      result.items.push_back(rec);
      if (result.items.size() == k) break;
    }
    return result;
  }

  std::optional<Symbol> lookup(std::span<const Symbol> trace) const {
    auto r = prefix_query(trace, trace.size(), 1);
    if (!r.items.empty() && r.items.front().trace.size() == trace.size()) return r.items.front().label;
    return std::nullopt;
  }

  /// Record by position in lexicographic order.
  LabeledTrace record(std::uint64_t id) const {
    using namespace store_detail;
    if (id >= record_count_) throw InputDomainError("record id out of range");
    std::array<char, 8> off{};
    index_.read_exact(off.data(), off.size(), offsets_pos_ + 8 * id);
    const std::uint64_t offset = get_u64(off.data());
    std::array<char, 128> chunk{};
    const std::size_t got = payload_.read_at(chunk.data(), chunk.size(), offset);
    if (got < 4) throw StorageError("truncated payload");
    const std::uint32_t len = get_u32(chunk.data());
    const std::size_t size = encoded_size(len);
    LabeledTrace out;
    out.trace.resize(len);
    const char* p = chunk.data();
    std::vector<char> big;
    if (size > got) {
      big.resize(size);
      payload_.read_exact(big.data(), size, offset);
      p = big.data();
    }
    for (std::uint32_t i = 0; i < len; ++i) out.trace[i] = get_u16(p + 4 + 2 * i);
    out.label = get_u16(p + 4 + 2 * len);
    return out;
  }

  RandomStream random_stream(std::uint64_t seed) const { return RandomStream(*this, seed); }

  /// Calls `fn(const LabeledTrace&)` for every record in stored order.
  template <class Fn>
  void scan(Fn&& fn) const {
    store_detail::RecordReader reader(payload_, 0, payload_size_);
    LabeledTrace rec;
    while (reader.next(rec)) fn(std::as_const(rec));
  }

  /// Bytes held in memory by the open store (the fence index).
  std::size_t resident_bytes() const noexcept {
    std::size_t bytes = fences_.capacity() * sizeof(Fence);
    for (const auto& f : fences_) bytes += f.key.capacity() * sizeof(Symbol);
    return bytes;
  }

 private:
  struct Fence {
    std::uint64_t offset = 0;
    Trace key;
  };

  std::size_t read_buffer_size() const noexcept {
    // One block of typical records; the reader grows for long ones.
    return std::clamp<std::size_t>(block_size_ * store_detail::encoded_size(max_length_ / 2 + 1), 512, 1 << 16);
  }

  std::filesystem::path dir_;
  store_detail::File payload_;
  store_detail::File index_;
  Alphabet inputs_{1};
  Alphabet outputs_{1};
  std::uint64_t record_count_ = 0;
  std::uint64_t block_size_ = 1;
  std::uint64_t offsets_pos_ = 0;
  std::uint64_t payload_size_ = 0;
  std::size_t max_length_ = 0;
  std::vector<Fence> fences_;
};

inline RandomStream::RandomStream(const TraceStore& store, std::uint64_t seed) : store_(&store) {
  modulus_ = std::bit_ceil(std::max<std::uint64_t>(store.record_count(), 1));
  std::mt19937_64 rng(seed);
  multiplier_ = (rng() | 1) & (modulus_ - 1);
  if (multiplier_ == 0) multiplier_ = 1;
  increment_ = rng() & (modulus_ - 1);
}

inline std::optional<LabeledTrace> RandomStream::next() {
  while (step_ < modulus_) {
    const std::uint64_t id = (multiplier_ * step_ + increment_) & (modulus_ - 1);
    ++step_;
    if (id < store_->record_count()) return store_->record(id);
  }
  return std::nullopt;
}

/// Builds a store from a stream of labelled traces with an external merge
/// sort: records are buffered up to `sort_buffer_bytes`, sorted, spilled to
/// run files, and the runs are merged with duplicates removed. Two copies of
/// one trace with different labels raise DataError.
class StoreBuilder {
 public:
  StoreBuilder(std::filesystem::path dir, Alphabet inputs, Alphabet outputs, StoreOptions options = {})
      : dir_(std::move(dir)), inputs_(make_alphabet(inputs.size)), outputs_(make_alphabet(outputs.size)),
        options_(options) {
    if (options_.block_size == 0) throw ConfigError("block_size must be positive");
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw StorageError("cannot create " + dir_.string() + ": " + ec.message());
  }
  StoreBuilder(const StoreBuilder&) = delete;
  StoreBuilder& operator=(const StoreBuilder&) = delete;
  ~StoreBuilder() { remove_runs(); }

  void add(const LabeledTrace& lt) {
    for (Symbol s : lt.trace) {
      if (!inputs_.contains(s)) throw InputDomainError("trace symbol " + std::to_string(s) + " outside input alphabet");
    }
    if (!outputs_.contains(lt.label)) throw InputDomainError("label " + std::to_string(lt.label) + " outside output alphabet");
    buffered_bytes_ += sizeof(LabeledTrace) + lt.trace.size() * sizeof(Symbol);
    buffer_.push_back(lt);
    if (buffered_bytes_ >= options_.sort_buffer_bytes) spill();
  }

  TraceStore finish() {
    using namespace store_detail;
    spill();
    std::vector<File> runs;
    for (const auto& p : run_paths_) runs.emplace_back(p, O_RDONLY);
    std::vector<std::uint64_t> run_sizes;
    for (const auto& p : run_paths_) run_sizes.push_back(std::filesystem::file_size(p));

    BufferedWriter payload(File(dir_ / "payload.bin", O_WRONLY | O_CREAT | O_TRUNC));
    File index(dir_ / "index.bin", O_WRONLY | O_CREAT | O_TRUNC);
    std::vector<char> header(kIndexHeaderSize, 0);
    index.write_all(header.data(), header.size());
    BufferedWriter offsets(std::move(index), kIndexHeaderSize);

    struct Head {
      LabeledTrace rec;
      std::size_t run;
    };
    auto greater = [](const Head& a, const Head& b) {
      if (trace_less(b.rec.trace, a.rec.trace)) return true;
      if (trace_less(a.rec.trace, b.rec.trace)) return false;
      return a.run > b.run;
    };
    std::priority_queue<Head, std::vector<Head>, decltype(greater)> heap(greater);
    std::vector<RecordReader> readers;
    readers.reserve(runs.size());
    const std::size_t per_run = std::clamp<std::size_t>(options_.sort_buffer_bytes / std::max<std::size_t>(runs.size(), 1) / 2,
                                                        4096, 1 << 20);
    for (std::size_t r = 0; r < runs.size(); ++r) {
      readers.emplace_back(runs[r], 0, run_sizes[r], per_run);
      Head h{{}, r};
      if (readers[r].next(h.rec)) heap.push(std::move(h));
    }

    struct PendingFence {
      std::uint64_t offset;
      Trace key;
    };
    std::vector<PendingFence> fences;
    std::uint64_t count = 0;
    std::size_t max_length = 0;
    std::optional<LabeledTrace> last;
    while (!heap.empty()) {
      Head h = heap.top();
      heap.pop();
      if (last && last->trace == h.rec.trace) {
        if (last->label != h.rec.label) {
          throw DataError("trace " + to_string(h.rec.trace) + " has labels " + std::to_string(last->label) + " and " +
                          std::to_string(h.rec.label));
        }
      } else {
        const std::uint64_t offset = payload.position();
        if (count % options_.block_size == 0) fences.push_back({offset, h.rec.trace});
        put_u64(offsets.buffer(), offset);
        offsets.maybe_flush();
        encode_record(payload.buffer(), h.rec);
        payload.maybe_flush();
        max_length = std::max(max_length, h.rec.trace.size());
        ++count;
        last = h.rec;
      }
      if (readers[h.run].next(h.rec)) heap.push(std::move(h));
    }
    payload.flush();

    const std::uint64_t offsets_pos = kIndexHeaderSize;
    const std::uint64_t fences_pos = offsets.position();
    for (const auto& f : fences) {
      put_u64(offsets.buffer(), f.offset);
      put_u32(offsets.buffer(), static_cast<std::uint32_t>(f.key.size()));
      for (Symbol s : f.key) put_u16(offsets.buffer(), s);
      offsets.maybe_flush();
    }
    offsets.flush();
    header.clear();
    header.insert(header.end(), kIndexMagic.begin(), kIndexMagic.end());
    put_u64(header, count);
    put_u64(header, options_.block_size);
    put_u64(header, fences.size());
    put_u64(header, offsets_pos);
    put_u64(header, fences_pos);
    offsets.file().write_at(header.data(), header.size(), 0);

    runs.clear();
    remove_runs();

    std::ofstream manifest(dir_ / "manifest.txt", std::ios::trunc);
    manifest << kManifestTag << ' ' << kManifestVersion << '\n'
             << "records " << count << '\n'
             << "inputs " << inputs_.size << '\n'
             << "outputs " << outputs_.size << '\n'
             << "block_size " << options_.block_size << '\n'
             << "max_length " << max_length << '\n';
    if (!manifest) throw StorageError("cannot write manifest in " + dir_.string());
    manifest.close();
    return TraceStore::open(dir_);
  }

 private:
  void spill() {
    using namespace store_detail;
    if (buffer_.empty()) return;
    std::sort(buffer_.begin(), buffer_.end(), [](const LabeledTrace& a, const LabeledTrace& b) {
      return trace_less(a.trace, b.trace);
    });
    auto path = dir_ / ("run-" + std::to_string(run_paths_.size()) + ".tmp");
    BufferedWriter out(File(path, O_WRONLY | O_CREAT | O_TRUNC));
    run_paths_.push_back(path);
    for (std::size_t i = 0; i < buffer_.size(); ++i) {
      if (i > 0 && buffer_[i].trace == buffer_[i - 1].trace) {
        if (buffer_[i].label != buffer_[i - 1].label) {
          throw DataError("trace " + to_string(buffer_[i].trace) + " has labels " +
                          std::to_string(buffer_[i - 1].label) + " and " + std::to_string(buffer_[i].label));
        }
        continue;
      }
      encode_record(out.buffer(), buffer_[i]);
      out.maybe_flush();
    }
    out.flush();
    buffer_.clear();
    buffer_.shrink_to_fit();
    buffered_bytes_ = 0;
  }

  void remove_runs() noexcept {
    for (const auto& p : run_paths_) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
    run_paths_.clear();
  }

  std::filesystem::path dir_;
  Alphabet inputs_;
  Alphabet outputs_;
  StoreOptions options_;
  std::vector<LabeledTrace> buffer_;
  std::size_t buffered_bytes_ = 0;
  std::vector<std::filesystem::path> run_paths_;
};

template <std::ranges::input_range R>
TraceStore build_store(R&& traces, const std::filesystem::path& dir, Alphabet inputs, Alphabet outputs,
                       StoreOptions options = {}) {
  StoreBuilder builder(dir, inputs, outputs, options);
  for (const LabeledTrace& lt : traces) builder.add(lt);
  return builder.finish();
}

}  // namespace daalder
