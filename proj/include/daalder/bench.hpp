#pragma once

// Benchmark harness: config files, dataset generation, single learning runs
// under a memory budget and timeout, accuracy evaluation, and the sweep that
// produces the run CSV and plot data.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <new>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "daalder/alloc_meter.hpp"
#include "daalder/core.hpp"
#include "daalder/datagen.hpp"
#include "daalder/edsm.hpp"
#include "daalder/learner.hpp"
#include "daalder/machine_io.hpp"
#include "daalder/trace_io.hpp"
#include "daalder/trace_store.hpp"

namespace daalder {

class TimeoutError : public Error {
 public:
  using Error::Error;
};

// -- config -------------------------------------------------------------------

/// Parsed `key = value` file. Blank lines and `#` comments are skipped.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in) {
    KeyValueFile kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string text = trim(line);
      if (text.empty()) continue;
      const auto eq = text.find('=');
      if (eq == std::string::npos) {
        if (line_no == 1 && text.rfind("daalder-manifest", 0) == 0) {
          kv.version_line_ = text;
          continue;
        }
        throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
      }
      std::string key = trim(text.substr(0, eq));
      if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
      if (kv.values_.contains(key)) throw ConfigError("duplicate key '" + key + "'");
      kv.values_[key] = trim(text.substr(eq + 1));
    }
    return kv;
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.contains(key); }
  const std::string& version_line() const noexcept { return version_line_; }

  std::optional<std::string> take(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    std::string v = std::move(it->second);
    values_.erase(it);
    return v;
  }

  std::string require(const std::string& key) {
    auto v = take(key);
    if (!v) throw ConfigError("missing key '" + key + "'");
    return *v;
  }

  /// Throws on the first key nobody took.
  void reject_unused() const {
    if (!values_.empty()) throw ConfigError("unknown key '" + values_.begin()->first + "'");
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }

 private:
  std::map<std::string, std::string> values_;
  std::string version_line_;
};

namespace detail {

inline std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

inline double parse_double(const std::string& key, const std::string& text) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !(v >= 0)) {
    throw ConfigError("key '" + key + "': expected a non-negative number, got '" + text + "'");
  }
  return v;
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = KeyValueFile::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<std::uint64_t> parse_u64_list(const std::string& key, const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(text)) out.push_back(parse_u64(key, item));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

template <class T>
std::string join(const std::vector<T>& items) {
  std::ostringstream out;
  for (std::size_t i = 0; i < items.size(); ++i) out << (i ? "," : "") << items[i];
  return out.str();
}

inline std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace detail

enum class Algorithm { edsm, daalder };

inline std::string to_string(Algorithm a) { return a == Algorithm::edsm ? "edsm" : "daalder"; }

inline Algorithm parse_algorithm(const std::string& text) {
  if (text == "edsm") return Algorithm::edsm;
  if (text == "daalder") return Algorithm::daalder;
  throw ConfigError("unknown algorithm '" + text + "' (expected edsm or daalder)");
}

/// Everything a sweep needs; `generate` uses the dataset half.
struct BenchConfig {
  std::uint64_t seed = 1;
  std::size_t targets = 1;
  std::size_t states = 20;
  std::size_t inputs = 2;
  std::size_t outputs = 2;
  std::vector<std::size_t> sizes;
  std::size_t test_size = 0;
  std::size_t len_min = 2;
  std::size_t len_max = 16;

  std::vector<Algorithm> algorithms{Algorithm::edsm, Algorithm::daalder};
  std::vector<std::size_t> ks{10, 100, 1000};
  std::optional<std::size_t> n;
  /// nullopt: stream the whole store on every oracle call.
  std::optional<std::uint64_t> oracle_budget = 50'000;
  /// Bytes; nullopt is unlimited.
  std::optional<std::uint64_t> memory_budget;
  double timeout_s = 1800;

  void validate() const {
    if (targets == 0) throw ConfigError("key 'targets' must be >= 1");
    if (states == 0) throw ConfigError("key 'states' must be >= 1");
    if (inputs == 0 || inputs > kMaxAlphabetSize) throw ConfigError("key 'inputs' out of range");
    if (outputs == 0 || outputs > kMaxAlphabetSize) throw ConfigError("key 'outputs' out of range");
    if (sizes.empty()) throw ConfigError("key 'sizes' must list at least one size");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (sizes[i] == 0 || (i && sizes[i] <= sizes[i - 1])) {
        throw ConfigError("key 'sizes' must be positive and strictly increasing");
      }
    }
    if (len_min > len_max) throw ConfigError("key 'len_min' exceeds 'len_max'");
    if (algorithms.empty()) throw ConfigError("key 'algorithms' must not be empty");
    for (std::size_t k : ks) {
      if (k == 0) throw ConfigError("key 'ks' entries must be >= 1");
    }
    if (oracle_budget && *oracle_budget == 0) throw ConfigError("key 'oracle_budget' must be positive or 'all'");
    if (!(timeout_s > 0)) throw ConfigError("key 'timeout_s' must be positive");
  }

  /// Seed of target t's machine and of its dataset.
  std::uint64_t machine_seed(std::size_t t) const { return derive_seed(seed, 2 * t); }
  std::uint64_t data_seed(std::size_t t) const { return derive_seed(seed, 2 * t + 1); }
  /// Learner seed of one sweep cell.
  std::uint64_t run_seed(std::size_t t, std::size_t size_index, std::size_t k_index) const {
    return derive_seed(seed, (std::uint64_t{1} << 32) + t * 1'000'000 + size_index * 1000 + k_index);
  }
};

inline constexpr std::string_view kManifestHeader = "daalder-manifest 1";

inline BenchConfig parse_config(KeyValueFile kv) {
  BenchConfig c;
  if (!kv.version_line().empty() && kv.version_line() != kManifestHeader) {
    throw ConfigError("unsupported manifest version '" + kv.version_line() + "'");
  }
  c.seed = detail::parse_u64("seed", kv.require("seed"));
  c.states = detail::parse_u64("states", kv.require("states"));
  for (auto v : detail::parse_u64_list("sizes", kv.require("sizes"))) c.sizes.push_back(v);
  c.test_size = detail::parse_u64("test_size", kv.require("test_size"));
  if (auto v = kv.take("targets")) c.targets = detail::parse_u64("targets", *v);
  if (auto v = kv.take("inputs")) c.inputs = detail::parse_u64("inputs", *v);
  if (auto v = kv.take("outputs")) c.outputs = detail::parse_u64("outputs", *v);
  if (auto v = kv.take("len_min")) c.len_min = detail::parse_u64("len_min", *v);
  if (auto v = kv.take("len_max")) c.len_max = detail::parse_u64("len_max", *v);
  if (auto v = kv.take("algorithms")) {
    c.algorithms.clear();
    for (const auto& a : detail::split_list(*v)) c.algorithms.push_back(parse_algorithm(a));
  }
  if (auto v = kv.take("ks")) {
    c.ks.clear();
    for (auto k : detail::parse_u64_list("ks", *v)) c.ks.push_back(k);
  }
  if (auto v = kv.take("n")) {
    if (*v == "none") {
      c.n.reset();
    } else {
      c.n = detail::parse_u64("n", *v);
    }
  }
  if (auto v = kv.take("oracle_budget")) {
    if (*v == "all") {
      c.oracle_budget.reset();
    } else {
      c.oracle_budget = detail::parse_u64("oracle_budget", *v);
    }
  }
  if (auto v = kv.take("memory_budget_mb")) {
    if (*v == "none") {
      c.memory_budget.reset();
    } else {
      c.memory_budget = detail::parse_u64("memory_budget_mb", *v) << 20;
    }
  }
  if (auto v = kv.take("memory_budget_bytes")) {
    c.memory_budget = detail::parse_u64("memory_budget_bytes", *v);
  }
  if (auto v = kv.take("timeout_s")) c.timeout_s = detail::parse_double("timeout_s", *v);

  std::vector<std::string> machine_seeds;
  std::vector<std::string> data_seeds;
  if (auto v = kv.take("derived.machine_seeds")) machine_seeds = detail::split_list(*v);
  if (auto v = kv.take("derived.data_seeds")) data_seeds = detail::split_list(*v);
  kv.reject_unused();
  c.validate();
  for (std::size_t t = 0; t < machine_seeds.size(); ++t) {
    if (t >= c.targets || machine_seeds[t] != std::to_string(c.machine_seed(t))) {
      throw ConfigError("key 'derived.machine_seeds' does not match 'seed'");
    }
  }
  for (std::size_t t = 0; t < data_seeds.size(); ++t) {
    if (t >= c.targets || data_seeds[t] != std::to_string(c.data_seed(t))) {
      throw ConfigError("key 'derived.data_seeds' does not match 'seed'");
    }
  }
  return c;
}

inline BenchConfig load_config(const std::string& path) { return parse_config(KeyValueFile::load(path)); }

/// Every parameter plus the derived per-target seeds; parses back to `c`.
inline void write_manifest(std::ostream& out, const BenchConfig& c) {
  out << kManifestHeader << '\n';
  out << "seed = " << c.seed << '\n';
  out << "targets = " << c.targets << '\n';
  out << "states = " << c.states << '\n';
  out << "inputs = " << c.inputs << '\n';
  out << "outputs = " << c.outputs << '\n';
  out << "sizes = " << detail::join(c.sizes) << '\n';
  out << "test_size = " << c.test_size << '\n';
  out << "len_min = " << c.len_min << '\n';
  out << "len_max = " << c.len_max << '\n';
  std::vector<std::string> algos;
  for (auto a : c.algorithms) algos.push_back(to_string(a));
  out << "algorithms = " << detail::join(algos) << '\n';
  out << "ks = " << detail::join(c.ks) << '\n';
  out << "n = " << (c.n ? std::to_string(*c.n) : "none") << '\n';
  out << "oracle_budget = " << (c.oracle_budget ? std::to_string(*c.oracle_budget) : "all") << '\n';
  if (c.memory_budget) {
    out << "memory_budget_bytes = " << *c.memory_budget << '\n';
  } else {
    out << "memory_budget_mb = none\n";
  }
  out << "timeout_s = " << detail::format_double(c.timeout_s) << '\n';
  std::vector<std::uint64_t> ms;
  std::vector<std::uint64_t> ds;
  for (std::size_t t = 0; t < c.targets; ++t) {
    ms.push_back(c.machine_seed(t));
    ds.push_back(c.data_seed(t));
  }
  out << "derived.machine_seeds = " << detail::join(ms) << '\n';
  out << "derived.data_seeds = " << detail::join(ds) << '\n';
}

inline bool operator==(const BenchConfig& a, const BenchConfig& b) {
  std::ostringstream x;
  std::ostringstream y;
  write_manifest(x, a);
  write_manifest(y, b);
  return x.str() == y.str();
}

// -- run control --------------------------------------------------------------

struct RunLimits {
  std::optional<std::uint64_t> memory_budget;
  double timeout_s = 1800;
  /// Sampler period; at least one sample per second.
  std::chrono::milliseconds sample_period{200};
};

/// Watches one run: arms the heap limit, samples heap use on a background
/// thread, and turns an expired deadline into TimeoutError at checkpoints.
/// Byte counts are relative to the heap level when the monitor started.
class RunMonitor {
 public:
  explicit RunMonitor(const RunLimits& limits)
      : limits_(limits),
        deadline_(std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double>(limits.timeout_s))) {
    if (limits.sample_period > std::chrono::seconds(1)) throw ConfigError("sample period must be <= 1 s");
    sampler_ = std::thread([this] { sample_loop(); });
    baseline_ = alloc::current_bytes();
    alloc::reset_peak();
    if (limits_.memory_budget) alloc::set_limit(baseline_ + static_cast<std::int64_t>(*limits_.memory_budget));
    start_ = std::chrono::steady_clock::now();
    armed_.store(true);
  }

  RunMonitor(const RunMonitor&) = delete;
  RunMonitor& operator=(const RunMonitor&) = delete;
  ~RunMonitor() { stop(); }

  /// Disarms the limit and joins the sampler. Idempotent.
  void stop() {
    if (!sampler_.joinable()) return;
    alloc::set_limit(std::nullopt);
    elapsed_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    peak_ = std::max<std::int64_t>(0, alloc::peak_bytes() - baseline_);
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    sampler_.join();
  }

  void checkpoint() const {
    if (expired_.load(std::memory_order_relaxed) || std::chrono::steady_clock::now() >= deadline_) {
      throw TimeoutError("timeout after " + detail::format_double(limits_.timeout_s) + " s");
    }
  }

  double elapsed_s() const noexcept { return elapsed_; }
  /// Exact peak of live heap bytes above the baseline.
  std::uint64_t peak_bytes() const noexcept { return static_cast<std::uint64_t>(peak_); }
  /// Largest value seen by the sampler.
  std::uint64_t sampled_peak_bytes() const noexcept { return static_cast<std::uint64_t>(sampled_peak_.load()); }
  std::size_t samples() const noexcept { return samples_.load(); }

 private:
  void sample_loop() {
    std::unique_lock lock(mu_);
    while (!stopping_) {
      cv_.wait_for(lock, limits_.sample_period);
      if (!armed_.load()) continue;
      const std::int64_t used = alloc::current_bytes() - baseline_;
      if (used > sampled_peak_.load()) sampled_peak_.store(used);
      samples_.fetch_add(1);
      if (std::chrono::steady_clock::now() >= deadline_) expired_.store(true);
    }
  }

  RunLimits limits_;
  std::chrono::steady_clock::time_point deadline_;
  std::chrono::steady_clock::time_point start_;
  std::int64_t baseline_ = 0;
  std::int64_t peak_ = 0;
  double elapsed_ = 0;
  std::atomic<bool> armed_{false};
  std::atomic<bool> expired_{false};
  std::atomic<std::int64_t> sampled_peak_{0};
  std::atomic<std::size_t> samples_{0};
  std::mutex mu_;
  std::condition_variable cv_;
  bool stopping_ = false;
  std::thread sampler_;
};

// -- runs ---------------------------------------------------------------------

enum class RunStatus { ok, oom, timeout, no_characteristic_set };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::oom: return "oom";
    case RunStatus::timeout: return "timeout";
    case RunStatus::no_characteristic_set: return "no-characteristic-set";
  }
  return "?";
}

struct RunRecord {
  std::string algorithm;
  std::size_t target = 0;
  std::uint64_t dataset_size = 0;
  /// 0 for EDSM.
  std::size_t k = 0;
  double wall_time_s = 0;
  std::uint64_t peak_memory_bytes = 0;
  /// Unset when the run produced no hypothesis.
  std::optional<double> accuracy;
  std::uint64_t traces_included = 0;
  double fraction_included = 0;
  RunStatus status = RunStatus::ok;
};

inline constexpr std::string_view kRunCsvHeader =
    "algorithm,target,dataset_size,k,wall_time_s,peak_memory_bytes,accuracy,traces_included,fraction_included,status";

inline void write_run_csv_header(std::ostream& out) { out << kRunCsvHeader << '\n'; }

inline void write_run_csv(std::ostream& out, const RunRecord& r) {
  std::ostringstream row;
  row << r.algorithm << ',' << r.target << ',' << r.dataset_size << ',' << r.k << ',' << std::fixed
      << std::setprecision(3) << r.wall_time_s << ',' << r.peak_memory_bytes << ',';
  if (r.accuracy) row << std::setprecision(6) << *r.accuracy;
  row << ',' << r.traces_included << ',' << std::setprecision(6) << r.fraction_included << ',' << to_string(r.status);
  out << row.str() << '\n';
}

struct LearnParams {
  Algorithm algorithm = Algorithm::daalder;
  std::size_t k = 10;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> oracle_budget = 50'000;
  std::uint64_t seed = 1;
};

struct RunOutcome {
  RunRecord record;
  std::optional<MooreMachine> hypothesis;
  /// DAALder round log or EDSM step log.
  std::vector<RoundRecord> log;
  std::size_t samples = 0;
  std::uint64_t sampled_peak_bytes = 0;
  std::size_t oracle_calls = 0;
  /// Tree traces mislabelled by hypotheses handed to the oracle.
  std::size_t consistency_violations = 0;
};

/// Fraction of test records whose label `h` reproduces.
inline double accuracy(const MooreMachine& h, const TraceStore& test) {
  if (test.record_count() == 0) throw InputDomainError("empty test store");
  if (h.inputs() != test.inputs() || h.outputs() != test.outputs()) {
    throw InputDomainError("hypothesis and test store alphabets differ");
  }
  std::uint64_t hits = 0;
  test.scan([&](const LabeledTrace& lt) { hits += evaluate(h, lt.trace) == lt.label; });
  return static_cast<double>(hits) / static_cast<double>(test.record_count());
}

/// One learning run. Opening the store counts towards the run's time and
/// memory; accuracy on `test` (if given) is measured afterwards.
inline RunOutcome run_learner(const std::filesystem::path& store_dir, const LearnParams& params,
                              const RunLimits& limits, const TraceStore* test = nullptr) {
  RunOutcome out;
  RunRecord& rec = out.record;
  rec.algorithm = to_string(params.algorithm);
  rec.k = params.algorithm == Algorithm::daalder ? params.k : 0;
  {
    RunMonitor monitor(limits);
    try {
      const TraceStore store = TraceStore::open(store_dir);
      rec.dataset_size = store.record_count();
      if (params.algorithm == Algorithm::daalder) {
        LearnerConfig cfg;
        cfg.k = params.k;
        cfg.n = params.n;
        cfg.oracle_budget = params.oracle_budget;
        cfg.seed = params.seed;
        cfg.checkpoint = [&monitor] { monitor.checkpoint(); };
        DaalderLearner learner(store, cfg);
        try {
          LearnResult r = learner.run();
          out.hypothesis = std::move(r.hypothesis);
          rec.status = r.stats.no_characteristic_set ? RunStatus::no_characteristic_set : RunStatus::ok;
        } catch (...) {
          rec.traces_included = learner.stats().traces_included;
          out.log = learner.stats().log;
          out.oracle_calls = learner.stats().oracle_calls;
          out.consistency_violations = learner.stats().consistency_violations;
          throw;
        }
        rec.traces_included = learner.stats().traces_included;
        out.log = learner.stats().log;
        out.oracle_calls = learner.stats().oracle_calls;
        out.consistency_violations = learner.stats().consistency_violations;
      } else {
        EdsmStats progress;
        try {
          EdsmResult r = edsm_learn(store, [&monitor] { monitor.checkpoint(); }, &progress);
          out.hypothesis = std::move(r.hypothesis);
        } catch (...) {
          rec.traces_included = progress.traces;
          throw;
        }
        rec.traces_included = progress.traces;
        out.log = std::move(progress.log);
      }
    } catch (const std::bad_alloc&) {
      rec.status = RunStatus::oom;
      out.hypothesis.reset();
    } catch (const TimeoutError&) {
      rec.status = RunStatus::timeout;
      out.hypothesis.reset();
    }
    monitor.stop();
    rec.wall_time_s = monitor.elapsed_s();
    rec.peak_memory_bytes = monitor.peak_bytes();
    out.samples = monitor.samples();
    out.sampled_peak_bytes = monitor.sampled_peak_bytes();
  }
  if (rec.dataset_size == 0 && rec.status != RunStatus::ok) {
    // The budget hit while opening the store; read the size without limits.
    rec.dataset_size = TraceStore::open(store_dir).record_count();
  }
  rec.fraction_included =
      rec.dataset_size ? static_cast<double>(rec.traces_included) / static_cast<double>(rec.dataset_size) : 0.0;
  if (out.hypothesis && test) rec.accuracy = accuracy(*out.hypothesis, *test);
  return out;
}

// -- datasets -----------------------------------------------------------------

struct DatasetPaths {
  std::filesystem::path root;

  std::filesystem::path target_dir(std::size_t t) const { return root / ("target-" + std::to_string(t)); }
  std::filesystem::path machine(std::size_t t) const { return target_dir(t) / "target.machine"; }
  std::filesystem::path train(std::size_t t, std::size_t size) const {
    return target_dir(t) / ("train-" + std::to_string(size) + ".txt");
  }
  std::filesystem::path test(std::size_t t) const { return target_dir(t) / "test.txt"; }
  std::filesystem::path train_store(std::size_t t, std::size_t size) const {
    return target_dir(t) / ("store-" + std::to_string(size));
  }
  std::filesystem::path test_store(std::size_t t) const { return target_dir(t) / "store-test"; }
  std::filesystem::path manifest() const { return root / "manifest.txt"; }
};

struct GenerateReport {
  /// Per target: sizes actually reached (a walk can run out of new traces).
  std::vector<std::vector<std::size_t>> train_sizes;
  std::vector<std::size_t> target_states;
};

/// Writes machines, nested train files, test files and the manifest. With
/// `build_stores` the trace files are also ingested into stores.
inline GenerateReport generate_datasets(const BenchConfig& c, const std::filesystem::path& out_dir,
                                        bool build_stores = false) {
  c.validate();
  const DatasetPaths paths{out_dir};
  std::filesystem::create_directories(out_dir);
  GenerateReport report;
  const Alphabet in{c.inputs};
  const Alphabet outs{c.outputs};
  for (std::size_t t = 0; t < c.targets; ++t) {
    std::filesystem::create_directories(paths.target_dir(t));
    const MooreMachine m = gen_target(c.states, c.inputs, c.outputs, c.machine_seed(t));
    save_machine(paths.machine(t).string(), m);
    Dataset ds = make_dataset(m, c.sizes, c.test_size, c.len_min, c.len_max, c.data_seed(t));
    report.target_states.push_back(m.num_states());
    auto& reached = report.train_sizes.emplace_back();
    for (std::size_t i = 0; i < c.sizes.size(); ++i) {
      reached.push_back(ds.train[i].size());
      save_traces(paths.train(t, c.sizes[i]).string(), in, outs, ds.train[i]);
      if (build_stores) {
        std::filesystem::remove_all(paths.train_store(t, c.sizes[i]));
        build_store(ds.train[i], paths.train_store(t, c.sizes[i]), in, outs);
      }
    }
    if (c.test_size > 0) {
      save_traces(paths.test(t).string(), in, outs, ds.test);
      if (build_stores) {
        std::filesystem::remove_all(paths.test_store(t));
        build_store(ds.test, paths.test_store(t), in, outs);
      }
    }
  }
  std::ofstream manifest(paths.manifest());
  if (!manifest) throw StorageError("cannot write " + paths.manifest().string());
  write_manifest(manifest, c);
  return report;
}

/// Streams a trace file into a store.
inline TraceStore ingest(const std::filesystem::path& trace_file, const std::filesystem::path& store_dir,
                         StoreOptions options = {}) {
  std::ifstream in(trace_file);
  if (!in) throw StorageError("cannot open " + trace_file.string());
  TraceFileReader reader(in);
  std::filesystem::remove_all(store_dir);
  StoreBuilder builder(store_dir, reader.header().inputs, reader.header().outputs, options);
  while (auto lt = reader.next()) builder.add(*lt);
  return builder.finish();
}

// -- sweep --------------------------------------------------------------------

struct SweepResult {
  std::vector<RunRecord> records;
  std::size_t skipped = 0;
  std::size_t oracle_calls = 0;
  std::size_t consistency_violations = 0;
};

/// Runs sizes x algorithms (x ks for DAALder) on every target, one run at a
/// time. Cells whose train set fell short of the requested size are
/// skipped. `on_record` sees each record as soon as it exists.
inline SweepResult run_sweep(const BenchConfig& c, const std::filesystem::path& out_dir,
                             const std::function<void(const RunRecord&)>& on_record = {}) {
  const DatasetPaths paths{out_dir / "data"};
  const GenerateReport gen = generate_datasets(c, paths.root, true);
  SweepResult result;
  RunLimits limits;
  limits.memory_budget = c.memory_budget;
  limits.timeout_s = c.timeout_s;
  for (std::size_t t = 0; t < c.targets; ++t) {
    std::optional<TraceStore> test;
    if (c.test_size > 0) test.emplace(TraceStore::open(paths.test_store(t)));
    for (std::size_t si = 0; si < c.sizes.size(); ++si) {
      for (Algorithm algo : c.algorithms) {
        const std::size_t cells = algo == Algorithm::daalder ? c.ks.size() : 1;
        for (std::size_t ki = 0; ki < cells; ++ki) {
          if (gen.train_sizes[t][si] < c.sizes[si]) {
            ++result.skipped;
            continue;
          }
          LearnParams p;
          p.algorithm = algo;
          p.k = algo == Algorithm::daalder ? c.ks[ki] : 0;
          p.n = c.n;
          p.oracle_budget = c.oracle_budget;
          p.seed = c.run_seed(t, si, ki);
          RunOutcome run = run_learner(paths.train_store(t, c.sizes[si]), p, limits, test ? &*test : nullptr);
          run.record.target = t;
          result.oracle_calls += run.oracle_calls;
          result.consistency_violations += run.consistency_violations;
          if (on_record) on_record(run.record);
          result.records.push_back(std::move(run.record));
        }
      }
    }
  }
  return result;
}

/// Long-format series for plotting: metric, algorithm, k, dataset_size and
/// the median, min and max over targets.
inline void write_plot_data(std::ostream& out, const std::vector<RunRecord>& records) {
  using Key = std::tuple<std::string, std::size_t, std::uint64_t>;
  std::map<Key, std::vector<const RunRecord*>> groups;
  for (const auto& r : records) groups[{r.algorithm, r.k, r.dataset_size}].push_back(&r);
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2;
  };
  out << "metric,algorithm,k,dataset_size,median,min,max,runs\n";
  const std::pair<const char*, double (*)(const RunRecord&)> metrics[] = {
      {"time_s", [](const RunRecord& r) { return r.wall_time_s; }},
      {"peak_memory_bytes", [](const RunRecord& r) { return static_cast<double>(r.peak_memory_bytes); }},
      {"traces_included", [](const RunRecord& r) { return static_cast<double>(r.traces_included); }},
      {"accuracy", [](const RunRecord& r) { return r.accuracy.value_or(std::nan("")); }},
  };
  for (const auto& [name, get] : metrics) {
    for (const auto& [key, rows] : groups) {
      std::vector<double> v;
      for (const RunRecord* r : rows) {
        const double x = get(*r);
        if (!std::isnan(x)) v.push_back(x);
      }
      if (v.empty()) continue;
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      out << name << ',' << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
          << detail::format_double(median(v)) << ',' << detail::format_double(*lo) << ','
          << detail::format_double(*hi) << ',' << v.size() << '\n';
    }
  }
}

}  // namespace daalder
