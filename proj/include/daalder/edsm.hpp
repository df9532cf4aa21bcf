#pragma once

// Passive evidence-driven state merging over the full prefix tree, without
// sink states or a score lower bound. Each step considers only the blue node
// with the most traces through it.

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "daalder/core.hpp"
#include "daalder/learner.hpp"
#include "daalder/observation_tree.hpp"
#include "daalder/trace_store.hpp"

namespace daalder {

struct EdsmStats {
  std::size_t steps = 0;
  std::size_t merges = 0;
  std::size_t promotions = 0;
  std::size_t pta_nodes = 0;
  std::size_t traces = 0;
  std::size_t hypothesis_states = 0;
  /// Consistent red candidates seen at each step.
  std::vector<std::size_t> candidates_per_step;
  std::vector<RoundRecord> log;
};

struct EdsmResult {
  MooreMachine hypothesis;
  EdsmStats stats;
};

/// Runs the red-blue loop on a tree that already holds the data.
/// `checkpoint` is called once per step and may throw to abort.
inline EdsmResult edsm_run(ObservationTree& tree, const std::function<void()>& checkpoint = {},
                           EdsmStats* progress = nullptr) {
  EdsmStats local;
  EdsmStats& stats = progress ? *progress : local;
  stats.pta_nodes = tree.size();
  stats.traces = tree.num_traces();
  tree.reset();

  // Access trace of each state, in the merged automaton.
  std::unordered_map<NodeId, Trace> state_access{{tree.root(), Trace{}}};
  auto position_access = [&](NodeId blue) {
    Trace t = state_access.at(tree.parent_in_structure(blue));
    t.push_back(tree.incoming(blue));
    return t;
  };

  while (true) {
    if (checkpoint) checkpoint();
    const auto blues = tree.blue_nodes();
    if (blues.empty()) break;
    ++stats.steps;
    NodeId p = blues.front();
    Trace p_access;
    bool have_access = false;
    for (std::size_t i = 1; i < blues.size(); ++i) {
      const NodeId b = blues[i];
      if (tree.trace_count(b) > tree.trace_count(p)) {
        p = b;
        have_access = false;
      } else if (tree.trace_count(b) == tree.trace_count(p)) {
        if (!have_access) {
          p_access = position_access(p);
          have_access = true;
        }
        Trace b_access = position_access(b);
        if (std::lexicographical_compare(b_access.begin(), b_access.end(), p_access.begin(), p_access.end())) {
          p = b;
          p_access = std::move(b_access);
        }
      }
    }

    std::size_t consistent = 0;
    NodeId best = kNoNode;
    std::uint64_t best_evidence = 0;
    for (NodeId q : tree.red_nodes()) {
      const MergeScore s = tree.check_consistency(p, q);
      if (!s.consistent) continue;
      ++consistent;
      if (best == kNoNode || s.evidence > best_evidence) {
        best = q;
        best_evidence = s.evidence;
      }
    }
    stats.candidates_per_step.push_back(consistent);
    RoundRecord rec;
    rec.round = stats.steps;
    rec.fringe = blues.size();
    rec.traces_included = stats.traces;
    if (best != kNoNode) {
      tree.merge(p, best);
      ++stats.merges;
      rec.identified = 1;
      rec.event = consistent == 1 ? "merge-unique" : "merge";
    } else {
      state_access.emplace(p, position_access(p));
      tree.promote(p);
      ++stats.promotions;
      rec.isolated = 1;
      rec.event = "promote";
    }
    tree.commit();
    stats.log.push_back(rec);
  }
  MooreMachine h = tree.extract_machine();
  stats.hypothesis_states = h.num_states();
  return EdsmResult{std::move(h), stats};
}

/// Loads every record of the store into a prefix tree and runs EDSM on it.
inline EdsmResult edsm_learn(const TraceStore& store, const std::function<void()>& checkpoint = {},
                             EdsmStats* progress = nullptr) {
  if (store.record_count() == 0) throw InputDomainError("cannot learn from an empty store");
  ObservationTree tree(store.inputs(), store.outputs());
  store.scan([&](const LabeledTrace& lt) { tree.add_trace(lt); });
  return edsm_run(tree, checkpoint, progress);
}

}  // namespace daalder
