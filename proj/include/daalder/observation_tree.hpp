#pragma once

// Observation tree (prefix tree acceptor) with red/blue colouring and
// journaled state merging.
//
// Nodes are created by add_trace and never removed. Merging blue node p into
// red node q redirects the transition into p to q and folds p's subtree into
// the automaton rooted at q (deterministic closure). Every mutation made by a
// merge is recorded in an undo journal, so trial merges are cheap and the
// pure tree can always be restored with undo(mark).
//
// Colours: red nodes are stored explicitly, in creation order. A node is blue
// iff it is not red and is the current child of a red node; everything else
// is white.
//
// Lookups (find, has_trace, traces, count_inconsistent) always see the pure
// tree, even while merges are pending.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "daalder/core.hpp"

namespace daalder {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

enum class Color : std::uint8_t { white, blue, red };

struct MergeScore {
  bool consistent = true;
  /// Unified node pairs where both nodes carry the same label.
  std::uint64_t evidence = 0;

  bool operator==(const MergeScore&) const = default;
};

struct MergePair {
  NodeId blue = kNoNode;
  NodeId red = kNoNode;

  bool operator==(const MergePair&) const = default;
};

using MergePlan = std::vector<MergePair>;

/// A plan merge that no longer folds cleanly; the caller must rescore.
class FoldConflict : public Error {
 public:
  FoldConflict(std::size_t index, MergePair pair, const std::string& what)
      : Error(what), index_(index), pair_(pair) {}

  std::size_t index() const noexcept { return index_; }
  MergePair pair() const noexcept { return pair_; }

 private:
  std::size_t index_;
  MergePair pair_;
};

class ObservationTree {
 public:
  ObservationTree(Alphabet inputs, Alphabet outputs)
      : inputs_(make_alphabet(inputs.size)), outputs_(make_alphabet(outputs.size)), label_totals_(outputs.size, 0) {
    new_node(kNoNode, 0);
    red_[0] = 1;
    red_order_.push_back(0);
  }

  Alphabet inputs() const noexcept { return inputs_; }
  Alphabet outputs() const noexcept { return outputs_; }
  NodeId root() const noexcept { return 0; }
  std::size_t size() const noexcept { return label_.size(); }
  /// Distinct labelled traces in the tree.
  std::size_t num_traces() const noexcept { return num_traces_; }

  /// Inserts a trace and returns its endpoint. The tree must not carry
  /// uncommitted merges.
  NodeId add_trace(const LabeledTrace& lt) {
    require_pure("add_trace");
    if (!outputs_.contains(lt.label)) throw InputDomainError("label outside output alphabet");
    for (Symbol a : lt.trace) {
      if (!inputs_.contains(a)) throw InputDomainError("trace symbol outside input alphabet");
    }
    NodeId cur = find(lt.trace);
    if (cur != kNoNode && label_[cur] >= 0 && label_[cur] != lt.label) {
      throw DataError("label conflict on trace " + to_string(lt.trace) + ": stored " + std::to_string(label_[cur]) +
                      ", new " + std::to_string(lt.label));
    }
    cur = root();
    ++count_[cur];
    for (Symbol a : lt.trace) {
      NodeId nxt = tree_child(cur, a);
      if (nxt == kNoNode) {
        nxt = new_node(cur, a);
        children_[std::size_t{cur} * inputs_.size + a] = nxt;
        tree_children_[std::size_t{cur} * inputs_.size + a] = nxt;
      }
      cur = nxt;
      ++count_[cur];
    }
    if (label_[cur] < 0) {
      label_[cur] = lt.label;
      tree_label_[cur] = lt.label;
      ++label_totals_[lt.label];
      ++num_traces_;
    }
    return cur;
  }

  /// Node reached by `trace` in the pure tree, or kNoNode.
  NodeId find(std::span<const Symbol> trace) const {
    NodeId cur = root();
    for (Symbol a : trace) {
      if (!inputs_.contains(a)) return kNoNode;
      cur = tree_child(cur, a);
      if (cur == kNoNode) return kNoNode;
    }
    return cur;
  }

  /// True if the trace is stored.
  bool has_trace(std::span<const Symbol> trace) const {
    NodeId n = find(trace);
    return n != kNoNode && tree_label_[n] >= 0;
  }

  /// Child in the current (possibly merged) structure.
  NodeId child(NodeId n, Symbol a) const noexcept { return children_[std::size_t{n} * inputs_.size + a]; }
  /// Child in the pure tree.
  NodeId tree_child(NodeId n, Symbol a) const noexcept { return tree_children_[std::size_t{n} * inputs_.size + a]; }
  NodeId parent(NodeId n) const noexcept { return tree_parent_[n]; }
  /// Parent in the merged structure; differs from parent() for subtrees a
  /// merge has re-attached.
  NodeId parent_in_structure(NodeId n) const noexcept { return link_parent_[n]; }
  Symbol incoming(NodeId n) const noexcept { return incoming_[n]; }
  std::size_t depth(NodeId n) const noexcept { return depth_[n]; }
  std::optional<Symbol> label(NodeId n) const noexcept {
    if (label_[n] < 0) return std::nullopt;
    return static_cast<Symbol>(label_[n]);
  }
  std::uint64_t trace_count(NodeId n) const noexcept { return count_[n]; }

  bool is_red(NodeId n) const noexcept { return red_[n] != 0; }
  bool is_blue(NodeId n) const noexcept {
    if (red_[n] || n == root()) return false;
    const NodeId p = link_parent_[n];
    return p != kNoNode && red_[p] && child(p, incoming_[n]) == n;
  }
  Color color(NodeId n) const noexcept {
    if (is_red(n)) return Color::red;
    return is_blue(n) ? Color::blue : Color::white;
  }

  /// Red nodes in creation order.
  const std::vector<NodeId>& red_nodes() const noexcept { return red_order_; }

  /// Blue nodes ordered by (red parent creation order, symbol).
  std::vector<NodeId> blue_nodes() const {
    std::vector<NodeId> out;
    for (NodeId r : red_order_) {
      for (std::size_t a = 0; a < inputs_.size; ++a) {
        NodeId c = child(r, static_cast<Symbol>(a));
        if (c != kNoNode && !red_[c] && link_parent_[c] == r) out.push_back(c);
      }
    }
    return out;
  }

  /// Path from the root in the pure tree.
  Trace access_trace(NodeId n) const {
    Trace t(depth_[n]);
    for (NodeId cur = n; cur != root(); cur = tree_parent_[cur]) t[depth_[cur] - 1] = incoming_[cur];
    return t;
  }

  /// Most frequent label among stored traces; ties go to the smaller symbol.
  Symbol default_label() const noexcept {
    return static_cast<Symbol>(std::max_element(label_totals_.begin(), label_totals_.end()) - label_totals_.begin());
  }

  // -- colouring -----------------------------------------------------------

  /// Colours blue node p red; its non-red children become the new fringe.
  /// The promotion survives undo of pending merges, so with merges pending
  /// p must also be a child of a red node in the pure tree.
  void promote(NodeId p) {
    if (!is_blue(p)) throw std::logic_error("promote: node " + std::to_string(p) + " is not blue");
    if (!journal_.empty() && !red_[tree_parent_[p]]) throw std::logic_error("promote: node " + std::to_string(p) + " is not on the pure fringe");
    red_[p] = 1;
    red_order_.push_back(p);
  }

  /// Clears every colour except the root's. Nodes, labels and counts stay.
  void reset() {
    require_pure("reset");
    for (NodeId r : red_order_) red_[r] = 0;
    red_[root()] = 1;
    red_order_.assign(1, root());
  }

  // -- merging -------------------------------------------------------------

  std::size_t journal_mark() const noexcept { return journal_.size(); }
  bool is_pure() const noexcept { return journal_.empty(); }

  /// Merges blue p into red q. On conflict the merge stops part way and the
  /// caller must undo to a mark taken before the call.
  MergeScore merge(NodeId p, NodeId q) {
    if (!is_blue(p)) throw std::logic_error("merge: node " + std::to_string(p) + " is not blue");
    if (!is_red(q)) throw std::logic_error("merge: node " + std::to_string(q) + " is not red");
    const std::size_t k = inputs_.size;
    set_child(link_parent_[p], incoming_[p], q);
    MergeScore score;
    stack_.clear();
    stack_.push_back({p, q});
    while (!stack_.empty()) {
      const auto [s, d] = stack_.back();
      stack_.pop_back();
      if (label_[s] >= 0) {
        if (label_[d] >= 0) {
          if (label_[d] != label_[s]) return MergeScore{false, 0};
          ++score.evidence;
        } else {
          record(Entry::kLabel, d, 0, static_cast<std::uint32_t>(label_[d]));
          label_[d] = label_[s];
        }
      }
      record(Entry::kCount, d, 0, count_[d]);
      count_[d] += count_[s];
      for (std::size_t a = 0; a < k; ++a) {
        const NodeId c = children_[std::size_t{s} * k + a];
        if (c == kNoNode) continue;
        const NodeId t = children_[std::size_t{d} * k + a];
        if (t == kNoNode) {
          set_child(d, static_cast<Symbol>(a), c);
          record(Entry::kLinkParent, c, 0, link_parent_[c]);
          link_parent_[c] = d;
        } else {
          stack_.push_back({c, t});
        }
      }
    }
    return score;
  }

  void undo(std::size_t mark) {
    while (journal_.size() > mark) {
      const Entry e = journal_.back();
      journal_.pop_back();
      switch (e.kind) {
        case Entry::kChild: children_[std::size_t{e.node} * inputs_.size + e.slot] = e.old; break;
        case Entry::kLabel: label_[e.node] = static_cast<std::int32_t>(e.old); break;
        case Entry::kCount: count_[e.node] = e.old; break;
        case Entry::kLinkParent: link_parent_[e.node] = e.old; break;
        case Entry::kRed:
          red_[e.node] = 0;
          red_order_.erase(std::find(red_order_.rbegin(), red_order_.rend(), e.node).base() - 1);
          break;
      }
    }
  }

  /// Makes all applied merges permanent.
  void commit() noexcept { journal_.clear(); }

  /// Undoes every pending merge.
  void rollback() { undo(0); }

  /// Trial merge of p into q; the tree is left unchanged.
  MergeScore check_consistency(NodeId p, NodeId q) {
    const std::size_t mark = journal_mark();
    MergeScore score = merge(p, q);
    undo(mark);
    if (!score.consistent) score.evidence = 0;
    return score;
  }

  /// Scores p against every red node, in red creation order.
  std::vector<MergeScore> score_all(NodeId p) {
    std::vector<MergeScore> scores;
    scores.reserve(red_order_.size());
    for (std::size_t i = 0; i < red_order_.size(); ++i) scores.push_back(check_consistency(p, red_order_[i]));
    return scores;
  }

  /// Quotient machine for `plan`: each pair is merged in order, then any blue
  /// node the plan left open is merged into its best consistent red node (or
  /// promoted when none is consistent). Unlabelled states take the tree's
  /// default label; missing transitions go to one extra state that carries
  /// the default label and loops on itself. The tree is restored afterwards.
  MooreMachine build_hypothesis(const MergePlan& plan) {
    const std::size_t mark = journal_mark();
    try {
      for (std::size_t i = 0; i < plan.size(); ++i) {
        const MergePair& m = plan[i];
        if (!is_blue(m.blue) || !is_red(m.red)) {
          throw FoldConflict(i, m, "plan entry " + std::to_string(i) + " no longer joins a blue and a red node");
        }
        if (!merge(m.blue, m.red).consistent) {
          throw FoldConflict(i, m, "plan entry " + std::to_string(i) + " conflicts with earlier merges");
        }
      }
      complete_fringe();
      MooreMachine h = extract_machine();
      undo(mark);
      return h;
    } catch (...) {
      undo(mark);
      throw;
    }
  }

  /// Red-blue completion: while blue nodes remain, merge the first one into
  /// the consistent red node with the most evidence (earliest red on ties),
  /// or promote it. Returns the number of promotions.
  std::size_t complete_fringe() {
    std::size_t promotions = 0;
    while (true) {
      const auto blues = blue_nodes();
      if (blues.empty()) break;
      const NodeId p = blues.front();
      std::optional<std::size_t> best;
      std::uint64_t best_evidence = 0;
      for (std::size_t i = 0; i < red_order_.size(); ++i) {
        const MergeScore s = check_consistency(p, red_order_[i]);
        if (s.consistent && (!best || s.evidence > best_evidence)) {
          best = i;
          best_evidence = s.evidence;
        }
      }
      if (best) {
        merge(p, red_order_[*best]);
      } else {
        promote_pending(p);
        ++promotions;
      }
    }
    return promotions;
  }

  /// Reads the automaton off the current structure. Every node reachable
  /// from the root must be red (no blue nodes left).
  MooreMachine extract_machine() const {
    const std::size_t k = inputs_.size;
    std::vector<State> state_of(size(), std::numeric_limits<State>::max());
    std::vector<NodeId> order{root()};
    state_of[root()] = 0;
    bool needs_sink = false;
    for (std::size_t i = 0; i < order.size(); ++i) {
      for (std::size_t a = 0; a < k; ++a) {
        const NodeId c = child(order[i], static_cast<Symbol>(a));
        if (c == kNoNode) {
          needs_sink = true;
          continue;
        }
        if (!red_[c]) throw std::logic_error("extract_machine: non-red node reachable; fringe not completed");
        if (state_of[c] == std::numeric_limits<State>::max()) {
          state_of[c] = static_cast<State>(order.size());
          order.push_back(c);
        }
      }
    }
    const std::size_t n = order.size() + (needs_sink ? 1 : 0);
    const auto sink = static_cast<State>(order.size());
    std::vector<State> delta(n * k);
    std::vector<Symbol> lambda(n, default_label());
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (label_[order[i]] >= 0) lambda[i] = static_cast<Symbol>(label_[order[i]]);
      for (std::size_t a = 0; a < k; ++a) {
        const NodeId c = child(order[i], static_cast<Symbol>(a));
        delta[i * k + a] = c == kNoNode ? sink : state_of[c];
      }
    }
    if (needs_sink) {
      for (std::size_t a = 0; a < k; ++a) delta[std::size_t{sink} * k + a] = sink;
    }
    return MooreMachine::from_tables(inputs_, outputs_, 0, std::move(delta), std::move(lambda));
  }

  /// Stored traces on which `h` disagrees with the stored label.
  std::size_t count_inconsistent(const MooreMachine& h) const {
    std::size_t bad = 0;
    std::vector<std::pair<NodeId, State>> todo{{root(), h.initial()}};
    while (!todo.empty()) {
      auto [n, s] = todo.back();
      todo.pop_back();
      if (tree_label_[n] >= 0 && h.output(s) != tree_label_[n]) ++bad;
      for (std::size_t a = 0; a < inputs_.size; ++a) {
        const NodeId c = tree_child(n, static_cast<Symbol>(a));
        if (c != kNoNode) todo.emplace_back(c, h.next(s, static_cast<Symbol>(a)));
      }
    }
    return bad;
  }

  /// Every stored trace with its label, in depth-first (lexicographic) order.
  std::vector<LabeledTrace> traces() const {
    std::vector<LabeledTrace> out;
    Trace path;
    collect(root(), path, out);
    return out;
  }

  /// Graphviz dump of the current structure reachable from the root.
  std::string to_dot() const {
    std::ostringstream out;
    out << "digraph observation_tree {\n";
    std::vector<NodeId> order{root()};
    std::vector<bool> seen(size(), false);
    seen[root()] = true;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const NodeId n = order[i];
      const char* fill = is_red(n) ? "salmon" : is_blue(n) ? "lightblue" : "white";
      out << "  n" << n << " [style=filled, fillcolor=" << fill << ", label=\"";
      if (label_[n] >= 0) out << label_[n];
      else out << '?';
      out << " #" << count_[n] << "\"];\n";
      for (std::size_t a = 0; a < inputs_.size; ++a) {
        const NodeId c = child(n, static_cast<Symbol>(a));
        if (c == kNoNode) continue;
        out << "  n" << n << " -> n" << c << " [label=\"" << a << "\"];\n";
        if (!seen[c]) {
          seen[c] = true;
          order.push_back(c);
        }
      }
    }
    out << "}\n";
    return out.str();
  }

  /// Approximate heap footprint.
  std::size_t memory_bytes() const noexcept {
    return children_.capacity() * sizeof(NodeId) * 2 + tree_parent_.capacity() * sizeof(NodeId) * 2 +
           tree_label_.capacity() * sizeof(std::int32_t) +
           incoming_.capacity() * sizeof(Symbol) + depth_.capacity() * sizeof(std::uint32_t) +
           label_.capacity() * sizeof(std::int32_t) + count_.capacity() * sizeof(std::uint32_t) +
           red_.capacity() + journal_.capacity() * sizeof(Entry);
  }

 private:
  struct Entry {
    enum Kind : std::uint8_t { kChild, kLabel, kCount, kLinkParent, kRed };
    Kind kind;
    NodeId node;
    std::uint32_t slot;
    std::uint32_t old;
  };

  NodeId new_node(NodeId parent, Symbol via) {
    const auto id = static_cast<NodeId>(label_.size());
    if (id == kNoNode) throw std::length_error("observation tree too large");
    children_.resize(children_.size() + inputs_.size, kNoNode);
    tree_children_.resize(tree_children_.size() + inputs_.size, kNoNode);
    tree_label_.push_back(-1);
    tree_parent_.push_back(parent);
    link_parent_.push_back(parent);
    incoming_.push_back(via);
    depth_.push_back(parent == kNoNode ? 0 : depth_[parent] + 1);
    label_.push_back(-1);
    count_.push_back(0);
    red_.push_back(0);
    return id;
  }

  // Promotion that is undone together with the pending merges.
  void promote_pending(NodeId p) {
    if (!is_blue(p)) throw std::logic_error("promote: node " + std::to_string(p) + " is not blue");
    record(Entry::kRed, p, 0, 0);
    red_[p] = 1;
    red_order_.push_back(p);
  }

  void record(Entry::Kind kind, NodeId node, std::uint32_t slot, std::uint32_t old) {
    journal_.push_back(Entry{kind, node, slot, old});
  }

  void set_child(NodeId n, Symbol a, NodeId c) {
    NodeId& slot = children_[std::size_t{n} * inputs_.size + a];
    record(Entry::kChild, n, a, slot);
    slot = c;
  }

  void require_pure(const char* op) const {
    if (!journal_.empty()) throw std::logic_error(std::string(op) + " requires a tree without pending merges");
  }

  void collect(NodeId n, Trace& path, std::vector<LabeledTrace>& out) const {
    if (tree_label_[n] >= 0) out.push_back({path, static_cast<Symbol>(tree_label_[n])});
    for (std::size_t a = 0; a < inputs_.size; ++a) {
      const NodeId c = tree_child(n, static_cast<Symbol>(a));
      if (c == kNoNode) continue;
      path.push_back(static_cast<Symbol>(a));
      collect(c, path, out);
      path.pop_back();
    }
  }

  Alphabet inputs_;
  Alphabet outputs_;
  std::vector<NodeId> children_;
  std::vector<NodeId> tree_children_;
  std::vector<std::int32_t> tree_label_;
  std::vector<NodeId> tree_parent_;
  std::vector<NodeId> link_parent_;
  std::vector<Symbol> incoming_;
  std::vector<std::uint32_t> depth_;
  std::vector<std::int32_t> label_;
  std::vector<std::uint32_t> count_;
  std::vector<std::uint8_t> red_;
  std::vector<NodeId> red_order_;
  std::vector<std::size_t> label_totals_;
  std::size_t num_traces_ = 0;
  std::vector<Entry> journal_;
  std::vector<std::pair<NodeId, NodeId>> stack_;
};

}  // namespace daalder
