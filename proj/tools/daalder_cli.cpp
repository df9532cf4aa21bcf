// daalder: generate datasets, build stores, learn, evaluate and sweep.
//
// Exit codes: 0 ok, 2 usage, 3 out of memory budget, 4 timeout, 5 data error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <new>
#include <optional>
#include <string>

#include "daalder/alloc_hooks.hpp"
#include "daalder/daalder.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 2, kOom = 3, kTimeout = 4, kDataError = 5 };

int exit_code(daalder::RunStatus s) {
  switch (s) {
    case daalder::RunStatus::oom: return kOom;
    case daalder::RunStatus::timeout: return kTimeout;
    default: return kOk;
  }
}

std::optional<std::uint64_t> parse_budget(const std::string& text, const char* flag) {
  if (text.empty() || text == "none" || text == "all") return std::nullopt;
  return daalder::detail::parse_u64(flag, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DAALder and EDSM Moore machine learning over disk-backed trace stores"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  bool with_stores = false;
  auto* generate = app.add_subcommand("generate", "Generate targets, train/test trace files and a manifest");
  generate->add_option("-c,--config", config_path, "key = value config file")->required();
  generate->add_option("-o,--out", out_dir, "Output directory")->required();
  generate->add_flag("--stores", with_stores, "Also build a store for every trace file");

  std::string input_path;
  std::string store_dir;
  std::size_t sort_buffer_mb = 64;
  auto* ingest = app.add_subcommand("ingest", "Build a trace store from a trace file");
  ingest->add_option("-i,--input", input_path, "Trace file")->required();
  ingest->add_option("-s,--store", store_dir, "Store directory (replaced)")->required();
  ingest->add_option("--sort-buffer-mb", sort_buffer_mb, "In-memory run size")->check(CLI::PositiveNumber);

  std::string algorithm = "daalder";
  std::size_t k = 10;
  std::optional<std::size_t> n;
  std::uint64_t seed = 1;
  std::string oracle_budget = "50000";
  std::string memory_budget_mb = "none";
  double timeout_s = 1800;
  std::string test_dir;
  std::string hypothesis_path;
  std::string log_path;
  auto* learn = app.add_subcommand("learn", "Learn a machine from a store and print its run record");
  learn->add_option("-s,--store", store_dir, "Train store")->required();
  learn->add_option("-a,--algorithm", algorithm, "daalder or edsm")->check(CLI::IsMember({"daalder", "edsm"}));
  learn->add_option("-k", k, "Traces per prefix query")->check(CLI::PositiveNumber);
  learn->add_option("-n", n, "Length bound for prefix queries");
  learn->add_option("--seed", seed, "Learner seed");
  learn->add_option("--oracle-budget", oracle_budget, "Records per oracle call, or 'all'");
  learn->add_option("--memory-budget-mb", memory_budget_mb, "Heap budget in MiB, or 'none'");
  learn->add_option("--timeout-s", timeout_s, "Wall-clock limit")->check(CLI::PositiveNumber);
  learn->add_option("-t,--test", test_dir, "Test store for accuracy");
  learn->add_option("-o,--output", hypothesis_path, "Where to write the hypothesis");
  learn->add_option("--log", log_path, "Per-round log (CSV)");

  std::string machine_path;
  auto* evaluate = app.add_subcommand("evaluate", "Accuracy of a machine on a test store");
  evaluate->add_option("-m,--machine", machine_path, "Machine file")->required();
  evaluate->add_option("-t,--test", test_dir, "Test store")->required();

  std::string manifest_path;
  auto* sweep = app.add_subcommand("sweep", "Run the size x algorithm matrix and write CSVs");
  auto* sweep_config = sweep->add_option("-c,--config", config_path, "key = value config file");
  sweep->add_option("-m,--manifest", manifest_path, "Replay a previous sweep's manifest")->excludes(sweep_config);
  sweep->add_option("-o,--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*generate) {
      const daalder::BenchConfig cfg = daalder::load_config(config_path);
      const auto report = daalder::generate_datasets(cfg, out_dir, with_stores);
      for (std::size_t t = 0; t < report.target_states.size(); ++t) {
        std::cout << "target " << t << ": " << report.target_states[t] << " states, train sizes";
        for (auto s : report.train_sizes[t]) std::cout << ' ' << s;
        std::cout << '\n';
      }
      return kOk;
    }

    if (*ingest) {
      daalder::StoreOptions opts;
      opts.sort_buffer_bytes = sort_buffer_mb << 20;
      const auto store = daalder::ingest(input_path, store_dir, opts);
      std::cout << store.record_count() << " records\n";
      return kOk;
    }

    if (*learn) {
      daalder::LearnParams p;
      p.algorithm = daalder::parse_algorithm(algorithm);
      p.k = k;
      p.n = n;
      p.seed = seed;
      p.oracle_budget = parse_budget(oracle_budget, "oracle-budget");
      if (p.oracle_budget && *p.oracle_budget == 0) throw daalder::ConfigError("--oracle-budget must be positive");
      daalder::RunLimits limits;
      if (auto mb = parse_budget(memory_budget_mb, "memory-budget-mb")) limits.memory_budget = *mb << 20;
      limits.timeout_s = timeout_s;
      std::optional<daalder::TraceStore> test;
      if (!test_dir.empty()) test.emplace(daalder::TraceStore::open(test_dir));
      const auto run = daalder::run_learner(store_dir, p, limits, test ? &*test : nullptr);
      if (run.hypothesis && !hypothesis_path.empty()) daalder::save_machine(hypothesis_path, *run.hypothesis);
      if (!log_path.empty()) {
        std::ofstream log(log_path);
        daalder::write_round_log_header(log);
        daalder::write_round_log(log, run.log);
      }
      daalder::write_run_csv_header(std::cout);
      daalder::write_run_csv(std::cout, run.record);
      return exit_code(run.record.status);
    }

    if (*evaluate) {
      const auto m = daalder::load_machine(machine_path);
      const auto test = daalder::TraceStore::open(test_dir);
      std::cout << daalder::accuracy(m, test) << '\n';
      return kOk;
    }

    if (*sweep) {
      if (config_path.empty() && manifest_path.empty()) throw daalder::ConfigError("sweep needs --config or --manifest");
      const daalder::BenchConfig cfg = daalder::load_config(config_path.empty() ? manifest_path : config_path);
      std::filesystem::create_directories(out_dir);
      std::ofstream csv(std::filesystem::path(out_dir) / "runs.csv");
      daalder::write_run_csv_header(csv);
      const auto result = daalder::run_sweep(cfg, out_dir, [&](const daalder::RunRecord& r) {
        daalder::write_run_csv(csv, r);
        csv.flush();
        daalder::write_run_csv(std::cerr, r);
      });
      std::ofstream plot(std::filesystem::path(out_dir) / "plot_data.csv");
      daalder::write_plot_data(plot, result.records);
      std::ofstream manifest(std::filesystem::path(out_dir) / "manifest.txt");
      daalder::write_manifest(manifest, cfg);
      std::cout << result.records.size() << " runs, " << result.skipped << " skipped\n";
      return kOk;
    }
  } catch (const daalder::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return kOom;
  } catch (const daalder::TimeoutError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kTimeout;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}
