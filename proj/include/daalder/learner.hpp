#pragma once

// DAALder: state merging over an observation tree that is grown on demand
// from a trace store.
//
// Each round inserts the traces staged by the previous round, classifies
// every blue node by how many red nodes it can merge with (one: identified,
// none: promoted, several: unidentified), and resolves unidentified nodes
// with the evidence ratio rule. Ambiguous nodes trigger prefix queries
// instead of a merge. A round that promoted a node or staged new traces
// starts another round; otherwise the learner either resets the colouring
// (after a burst of new data) or builds a hypothesis and asks the
// randomized equivalence oracle. Counterexamples are added together with
// prefix queries on each of their proper prefixes, and the tree is reset.

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "daalder/core.hpp"
#include "daalder/observation_tree.hpp"
#include "daalder/oracles.hpp"
#include "daalder/trace_store.hpp"

namespace daalder {

struct LearnerConfig {
  /// Traces per prefix query.
  std::size_t k = 10;
  /// Optional length bound for prefix queries.
  std::optional<std::size_t> n;
  /// Merge only when best evidence >= factor * second best.
  double ambiguity_factor = 2.0;
  /// New traces (since the last oracle call or reset) that force a reset.
  /// Unset: half the number of traces in the tree.
  std::optional<std::size_t> reset_threshold;
  /// Random traces used to seed the tree.
  std::size_t init_fringe_traces = 32;
  /// Records per oracle call; unset streams the whole store.
  std::optional<std::uint64_t> oracle_budget = 50'000;
  std::uint64_t seed = 1;
  std::size_t max_rounds = 1'000'000;
  /// Called once per round; may throw to abort the run.
  std::function<void()> checkpoint;

  void validate() const {
    if (k == 0) throw ConfigError("k must be >= 1");
    if (!(ambiguity_factor > 1.0)) throw ConfigError("ambiguity_factor must be > 1");
    if (oracle_budget && *oracle_budget == 0) throw ConfigError("oracle budget must be positive");
  }
};

struct RoundOutcome {
  std::vector<MergePair> identified;
  std::vector<NodeId> unidentified;
  bool isolated = false;
  std::size_t promoted = 0;
  std::size_t new_traces_added = 0;
};

struct UnidentifiedOutcome {
  bool explore_more = false;
  MergePlan merges;
  std::size_t queries = 0;
  std::size_t forced = 0;
  std::size_t promoted = 0;
};

enum class OracleDecision { call_oracle, reset_and_continue };

/// One line of the per-round log.
struct RoundRecord {
  std::size_t round = 0;
  std::string event;
  std::size_t fringe = 0;
  std::size_t identified = 0;
  std::size_t unidentified = 0;
  std::size_t isolated = 0;
  std::size_t queries = 0;
  std::size_t traces_included = 0;
  double elapsed_s = 0;
};

inline void write_round_log_header(std::ostream& out) {
  out << "round,event,fringe,identified,unidentified,isolated,queries,traces_included,elapsed_s\n";
}

inline void write_round_log(std::ostream& out, const std::vector<RoundRecord>& log) {
  for (const auto& r : log) {
    out << r.round << ',' << r.event << ',' << r.fringe << ',' << r.identified << ',' << r.unidentified << ','
        << r.isolated << ',' << r.queries << ',' << r.traces_included << ',' << r.elapsed_s << '\n';
  }
}

struct LearnerStats {
  std::size_t rounds = 0;
  std::size_t oracle_calls = 0;
  std::size_t counterexamples = 0;
  std::size_t prefix_queries = 0;
  std::size_t resets = 0;
  std::size_t repairs = 0;
  std::size_t traces_included = 0;
  std::size_t tree_nodes = 0;
  std::size_t hypothesis_states = 0;
  /// Tree traces mislabelled by any hypothesis handed to the oracle.
  std::size_t consistency_violations = 0;
  /// Every record ended up in the tree: no proper subset sufficed.
  bool no_characteristic_set = false;
  std::vector<RoundRecord> log;
};

struct LearnResult {
  MooreMachine hypothesis;
  LearnerStats stats;
};

namespace detail {

struct TraceHash {
  std::size_t operator()(const Trace& t) const noexcept {
    std::uint64_t h = 1469598103934665603ull ^ t.size();
    for (Symbol s : t) h = (h ^ s) * 1099511628211ull;
    return static_cast<std::size_t>(h);
  }
};

}  // namespace detail

/// Traces waiting to enter the tree at the start of the next round.
class TraceStaging {
 public:
  /// Stages `lt` unless the tree or the staging area already has it.
  bool offer(const ObservationTree& tree, const LabeledTrace& lt) {
    if (tree.has_trace(lt.trace) || seen_.contains(lt.trace)) return false;
    seen_.insert(lt.trace);
    pending_.push_back(lt);
    return true;
  }

  std::size_t size() const noexcept { return pending_.size(); }
  bool empty() const noexcept { return pending_.empty(); }

  /// Moves everything into the tree; returns the number of traces added.
  std::size_t flush(ObservationTree& tree) {
    std::size_t added = 0;
    for (const auto& lt : pending_) {
      if (!tree.has_trace(lt.trace)) {
        tree.add_trace(lt);
        ++added;
      }
    }
    pending_.clear();
    seen_.clear();
    return added;
  }

 private:
  std::vector<LabeledTrace> pending_;
  std::unordered_set<Trace, detail::TraceHash> seen_;
};

namespace detail {

/// Fringe nodes, most traces first, then by access trace.
inline std::vector<NodeId> ordered_fringe(const ObservationTree& tree) {
  struct Entry {
    NodeId node;
    std::uint64_t count;
    Trace access;
  };
  std::vector<Entry> entries;
  for (NodeId p : tree.blue_nodes()) entries.push_back({p, tree.trace_count(p), tree.access_trace(p)});
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.count != b.count) return a.count > b.count;
    return std::lexicographical_compare(a.access.begin(), a.access.end(), b.access.begin(), b.access.end());
  });
  std::vector<NodeId> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.node);
  return out;
}

}  // namespace detail

/// Classifies the fringe against the red core, most-visited nodes first.
/// Identified merges are applied right away (left pending on the tree) and
/// isolated nodes are promoted, so later nodes are scored in that context.
inline RoundOutcome classify_fringe(ObservationTree& tree) {
  RoundOutcome out;
  for (NodeId p : detail::ordered_fringe(tree)) {
    if (!tree.is_blue(p)) continue;
    std::size_t possible = 0;
    NodeId candidate = kNoNode;
    for (NodeId q : tree.red_nodes()) {
      if (tree.check_consistency(p, q).consistent) {
        ++possible;
        candidate = q;
      }
    }
    if (possible == 1) {
      tree.merge(p, candidate);
      out.identified.push_back({p, candidate});
    } else if (possible == 0) {
      tree.promote(p);
      out.isolated = true;
      ++out.promoted;
    } else {
      out.unidentified.push_back(p);
    }
  }
  return out;
}

namespace detail {

struct Candidate {
  NodeId red;
  std::uint64_t evidence;
  Trace access;
};

/// Consistent red candidates for p, best first: most evidence, then the
/// lexicographically smallest access trace.
inline std::vector<Candidate> ranked_candidates(ObservationTree& tree, NodeId p) {
  std::vector<Candidate> out;
  for (NodeId q : tree.red_nodes()) {
    const MergeScore s = tree.check_consistency(p, q);
    if (s.consistent) out.push_back({q, s.evidence, tree.access_trace(q)});
  }
  std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.evidence != b.evidence) return a.evidence > b.evidence;
    return std::lexicographical_compare(a.access.begin(), a.access.end(), b.access.begin(), b.access.end());
  });
  return out;
}

}  // namespace detail

/// Resolves nodes with several consistent candidates, in the context of the
/// merges already pending on the tree. The best candidate is merged when its
/// evidence is at least `ambiguity_factor` times the runner-up's. Otherwise
/// the blue node and every red candidate within that ratio of the best are
/// queried, and the answers are staged. A node whose queries bring nothing
/// new is merged with its best candidate anyway. Merges are applied as they
/// are decided; a node left without candidates is promoted.
inline UnidentifiedOutcome process_unidentified(ObservationTree& tree, const TraceStore& store,
                                                const std::vector<NodeId>& unidentified, const LearnerConfig& cfg,
                                                TraceStaging& staging) {
  UnidentifiedOutcome out;
  // Per-call cache: node -> new traces its query staged.
  std::unordered_map<NodeId, std::size_t> queried;
  auto query = [&](NodeId node) {
    if (auto it = queried.find(node); it != queried.end()) return it->second;
    std::size_t fresh = 0;
    for (const auto& lt : store.prefix_query(tree.access_trace(node), cfg.n, cfg.k).items) {
      if (staging.offer(tree, lt)) ++fresh;
    }
    ++out.queries;
    queried.emplace(node, fresh);
    return fresh;
  };

  auto merge = [&](NodeId p, NodeId q) {
    tree.merge(p, q);
    out.merges.push_back({p, q});
  };
  for (NodeId p : unidentified) {
    if (!tree.is_blue(p)) continue;
    const auto cands = detail::ranked_candidates(tree, p);
    if (cands.empty()) {
      tree.promote(p);
      ++out.promoted;
      continue;
    }
    const auto best = static_cast<double>(cands[0].evidence);
    const double second = cands.size() > 1 ? static_cast<double>(cands[1].evidence) : 0.0;
    if (cands.size() == 1 || best >= cfg.ambiguity_factor * second) {
      merge(p, cands[0].red);
      continue;
    }
    std::size_t fresh = query(p);
    for (const auto& c : cands) {
      if (cfg.ambiguity_factor * static_cast<double>(c.evidence) > best) fresh += query(c.red);
    }
    if (fresh > 0) {
      out.explore_more = true;
    } else {
      merge(p, cands[0].red);
      ++out.forced;
    }
  }
  return out;
}

/// Adds the counterexample, stages one prefix query per proper prefix of
/// it, and resets the colouring. Returns the number of queries issued.
inline std::size_t process_counterexample(ObservationTree& tree, const TraceStore& store, const LabeledTrace& sigma,
                                          const LearnerConfig& cfg, TraceStaging& staging) {
  if (!tree.has_trace(sigma.trace)) tree.add_trace(sigma);
  Trace prefix;
  std::size_t queries = 0;
  for (std::size_t len = 0; len < sigma.trace.size(); ++len) {
    prefix.assign(sigma.trace.begin(), sigma.trace.begin() + static_cast<std::ptrdiff_t>(len));
    for (const auto& lt : store.prefix_query(prefix, cfg.n, cfg.k).items) staging.offer(tree, lt);
    ++queries;
  }
  tree.reset();
  return queries;
}

inline OracleDecision decide_oracle_or_reset(std::size_t new_traces_added, std::size_t reset_threshold) {
  return new_traces_added > reset_threshold ? OracleDecision::reset_and_continue : OracleDecision::call_oracle;
}

class DaalderLearner {
 public:
  DaalderLearner(const TraceStore& store, LearnerConfig cfg)
      : store_(store), cfg_(std::move(cfg)), tree_(store.inputs(), store.outputs()) {
    cfg_.validate();
  }

  const LearnerStats& stats() const noexcept { return stats_; }
  const ObservationTree& tree() const noexcept { return tree_; }

  LearnResult run() {
    if (store_.record_count() == 0) throw InputDomainError("cannot learn from an empty store");
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    {
      RandomStream init = store_.random_stream(cfg_.seed);
      for (std::size_t i = 0; i < cfg_.init_fringe_traces; ++i) {
        auto rec = init.next();
        if (!rec) break;
        staging_.offer(tree_, *rec);
      }
      staging_.flush(tree_);
    }
    std::size_t new_since_oracle = 0;

    while (stats_.rounds < cfg_.max_rounds) {
      if (cfg_.checkpoint) cfg_.checkpoint();
      ++stats_.rounds;
      RoundRecord rec;
      rec.round = stats_.rounds;
      new_since_oracle += staging_.flush(tree_);
      rec.fringe = tree_.blue_nodes().size();

      RoundOutcome outcome = classify_fringe(tree_);
      UnidentifiedOutcome resolved = process_unidentified(tree_, store_, outcome.unidentified, cfg_, staging_);
      stats_.prefix_queries += resolved.queries;
      rec.identified = outcome.identified.size();
      rec.unidentified = outcome.unidentified.size();
      rec.isolated = outcome.promoted + resolved.promoted;
      rec.queries = resolved.queries;
      tree_.rollback();

      auto log = [&](const char* event) {
        rec.event = event;
        rec.traces_included = tree_.num_traces();
        rec.elapsed_s = elapsed();
        stats_.log.push_back(rec);
        update_sizes();
      };

      if (resolved.explore_more || rec.isolated > 0) {
        log(resolved.explore_more ? "explore" : "isolated");
        continue;
      }
      const std::size_t threshold = cfg_.reset_threshold.value_or(tree_.num_traces() / 2);
      if (decide_oracle_or_reset(new_since_oracle, threshold) == OracleDecision::reset_and_continue) {
        tree_.reset();
        ++stats_.resets;
        new_since_oracle = 0;
        log("reset");
        continue;
      }

      MergePlan plan = std::move(outcome.identified);
      plan.insert(plan.end(), resolved.merges.begin(), resolved.merges.end());
      auto hypothesis = build_with_repair(plan);
      if (!hypothesis) {
        log("repair");
        continue;
      }
      stats_.consistency_violations += tree_.count_inconsistent(*hypothesis);
      stats_.hypothesis_states = hypothesis->num_states();

      const OracleVerdict verdict =
          randomized_equivalence(store_, *hypothesis, cfg_.oracle_budget, cfg_.seed + 7919 * stats_.oracle_calls);
      ++stats_.oracle_calls;
      new_since_oracle = 0;
      if (verdict.accepted()) {
        log("accept");
        stats_.no_characteristic_set = tree_.num_traces() >= store_.record_count();
        return LearnResult{minimize(*hypothesis), stats_};
      }
      ++stats_.counterexamples;
      stats_.prefix_queries += process_counterexample(tree_, store_, *verdict.counterexample, cfg_, staging_);
      log("counterexample");
    }
    throw Error("round limit reached without an accepted hypothesis");
  }

 private:
  // Builds the plan's hypothesis. A plan entry that conflicts with the
  // merges before it is redirected to its best consistent red node in that
  // context; if there is none, its blue node is promoted and nullopt is
  // returned so the caller starts a new round.
  std::optional<MooreMachine> build_with_repair(MergePlan& plan) {
    while (true) {
      try {
        return tree_.build_hypothesis(plan);
      } catch (const FoldConflict& conflict) {
        ++stats_.repairs;
        const std::size_t i = conflict.index();
        const NodeId p = plan[i].blue;
        const std::size_t mark = tree_.journal_mark();
        for (std::size_t j = 0; j < i; ++j) tree_.merge(plan[j].blue, plan[j].red);
        const auto cands = detail::ranked_candidates(tree_, p);
        tree_.undo(mark);
        if (!cands.empty() && cands.front().red != plan[i].red) {
          plan[i].red = cands.front().red;
          continue;
        }
        tree_.promote(p);
        return std::nullopt;
      }
    }
  }

  void update_sizes() {
    stats_.traces_included = tree_.num_traces();
    stats_.tree_nodes = tree_.size();
  }

  const TraceStore& store_;
  LearnerConfig cfg_;
  ObservationTree tree_;
  TraceStaging staging_;
  LearnerStats stats_;
};

inline LearnResult learn(const TraceStore& store, const LearnerConfig& cfg) {
  DaalderLearner learner(store, cfg);
  return learner.run();
}

}  // namespace daalder
