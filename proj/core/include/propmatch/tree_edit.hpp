#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "propmatch/dep_tree.hpp"
#include "propmatch/embedding.hpp"
#include "propmatch/errors.hpp"

namespace propmatch {

// The nine tree edit operations. The enumerator order is the one-hot order
// used by edit vectorization and the count order in the feature vector.
enum class EditKind : std::uint8_t {
  kInsertChild,
  kInsertParent,
  kDeleteLeaf,
  kDeleteMerge,
  kRelabelNode,
  kRelabelEdge,
  kMoveSubtree,
  kNewRoot,
  kMoveSibling,
};

inline constexpr std::size_t kEditKindCount = 9;

std::string_view EditKindName(EditKind kind);  // "INSERT-CHILD", ...
EditKind ParseEditKind(std::string_view name);

// first = nearest to the parent, last = farthest.
enum class SiblingEnd : std::uint8_t { kFirst, kLast };

// One edit with its arguments. Which fields are meaningful depends on kind:
//   INSERT-CHILD   node, lemma, pos, label, side
//   INSERT-PARENT  node, lemma, pos, label, side
//   DELETE-LEAF    node
//   DELETE-&-MERGE node
//   RELABEL-NODE   node, lemma, pos
//   RELABEL-EDGE   node, label
//   MOVE-SUBTREE   node, destination, side
//   NEW-ROOT       node, side
//   MOVE-SIBLING   node, side, end
// The prior_* fields record node's labels just before the edit was applied;
// they are filled by AnnotateEdit and are not arguments.
template <typename Label>
struct BasicEditOp {
  EditKind kind = EditKind::kRelabelNode;
  int node = -1;
  Label lemma{};
  Label pos{};
  Label label{};
  Side side = Side::kLeft;
  SiblingEnd end = SiblingEnd::kFirst;
  int destination = -1;

  Label prior_lemma{};
  Label prior_pos{};
  Label prior_deprel{};

  // Argument equality (annotations ignored).
  bool SameEdit(const BasicEditOp& o) const {
    if (kind != o.kind || node != o.node) return false;
    switch (kind) {
      case EditKind::kInsertChild:
      case EditKind::kInsertParent:
        return lemma == o.lemma && pos == o.pos && label == o.label && side == o.side;
      case EditKind::kDeleteLeaf:
      case EditKind::kDeleteMerge:
        return true;
      case EditKind::kRelabelNode:
        return lemma == o.lemma && pos == o.pos;
      case EditKind::kRelabelEdge:
        return label == o.label;
      case EditKind::kMoveSubtree:
        return destination == o.destination && side == o.side;
      case EditKind::kNewRoot:
        return side == o.side;
      case EditKind::kMoveSibling:
        return side == o.side && end == o.end;
    }
    return false;
  }

  static BasicEditOp InsertChild(int n, Label l, Label p, Label e, Side s) {
    BasicEditOp op;
    op.kind = EditKind::kInsertChild;
    op.node = n;
    op.lemma = std::move(l);
    op.pos = std::move(p);
    op.label = std::move(e);
    op.side = s;
    return op;
  }
  static BasicEditOp InsertParent(int n, Label l, Label p, Label e, Side s) {
    BasicEditOp op = InsertChild(n, std::move(l), std::move(p), std::move(e), s);
    op.kind = EditKind::kInsertParent;
    return op;
  }
  static BasicEditOp DeleteLeaf(int n) {
    BasicEditOp op;
    op.kind = EditKind::kDeleteLeaf;
    op.node = n;
    return op;
  }
  static BasicEditOp DeleteMerge(int n) {
    BasicEditOp op;
    op.kind = EditKind::kDeleteMerge;
    op.node = n;
    return op;
  }
  static BasicEditOp RelabelNode(int n, Label l, Label p) {
    BasicEditOp op;
    op.kind = EditKind::kRelabelNode;
    op.node = n;
    op.lemma = std::move(l);
    op.pos = std::move(p);
    return op;
  }
  static BasicEditOp RelabelEdge(int n, Label e) {
    BasicEditOp op;
    op.kind = EditKind::kRelabelEdge;
    op.node = n;
    op.label = std::move(e);
    return op;
  }
  static BasicEditOp MoveSubtree(int n, int m, Side s) {
    BasicEditOp op;
    op.kind = EditKind::kMoveSubtree;
    op.node = n;
    op.destination = m;
    op.side = s;
    return op;
  }
  static BasicEditOp NewRoot(int n, Side s) {
    BasicEditOp op;
    op.kind = EditKind::kNewRoot;
    op.node = n;
    op.side = s;
    return op;
  }
  static BasicEditOp MoveSibling(int n, Side s, SiblingEnd r) {
    BasicEditOp op;
    op.kind = EditKind::kMoveSibling;
    op.node = n;
    op.side = s;
    op.end = r;
    return op;
  }
};

using EditOp = BasicEditOp<std::string>;

// Returns why `op` cannot be applied to `tree`, or nullptr when it can.
// `Tree` is BasicDepTree or anything with the same node-access interface.
template <typename Tree, typename Label>
const char* EditViolation(const Tree& tree, const BasicEditOp<Label>& op) {
  if (!tree.is_alive(op.node)) return "target node does not exist";
  const auto& n = tree.node(op.node);
  const bool is_root = op.node == tree.root();
  switch (op.kind) {
    case EditKind::kInsertChild:
    case EditKind::kRelabelNode:
    case EditKind::kRelabelEdge:
      return nullptr;
    case EditKind::kInsertParent:
      return is_root ? "INSERT-PARENT needs a non-root node" : nullptr;
    case EditKind::kDeleteLeaf:
      if (!n.is_leaf()) return "DELETE-LEAF on a non-leaf";
      return is_root ? "DELETE-LEAF would remove the last node" : nullptr;
    case EditKind::kDeleteMerge:
      if (n.child_count() != 1) return "DELETE-&-MERGE needs exactly one child";
      return is_root ? "DELETE-&-MERGE on the root has no former parent" : nullptr;
    case EditKind::kMoveSubtree:
      if (!tree.is_alive(op.destination)) return "destination node does not exist";
      if (tree.IsDescendant(op.destination, op.node)) {
        return "MOVE-SUBTREE destination is the node or one of its descendants";
      }
      return nullptr;
    case EditKind::kNewRoot:
      return is_root ? "NEW-ROOT targets the current root" : nullptr;
    case EditKind::kMoveSibling:
      return is_root ? "MOVE-SIBLING on the root" : nullptr;
  }
  return "unknown edit kind";
}

// Copies node's current labels into op.prior_*.
template <typename Label>
void AnnotateEdit(const BasicDepTree<Label>& tree, BasicEditOp<Label>& op) {
  if (!tree.is_alive(op.node)) return;
  const auto& n = tree.node(op.node);
  op.prior_lemma = n.lemma;
  op.prior_pos = n.pos;
  op.prior_deprel = n.deprel;
}

// Applies `op` in place. `root_label` is the edge label NEW-ROOT assigns to
// the promoted node. Throws IllegalEdit.
template <typename Tree, typename Label>
void ApplyEditInPlace(Tree& tree, const BasicEditOp<Label>& op, const Label& root_label) {
  if (const char* why = EditViolation(tree, op)) throw IllegalEdit(why);
  const int n = op.node;
  switch (op.kind) {
    case EditKind::kInsertChild: {
      const int id = tree.AddNode(op.lemma, op.pos, op.label);
      tree.AttachFarthest(id, n, op.side);
      break;
    }
    case EditKind::kInsertParent: {
      const int parent = tree.node(n).parent;
      const Side side = tree.SideOf(n);
      const std::size_t position = tree.PositionOf(n);
      tree.Detach(n);
      const int id = tree.AddNode(op.lemma, op.pos, op.label);
      tree.AttachAt(id, parent, side, position);
      tree.AttachFarthest(n, id, op.side);
      break;
    }
    case EditKind::kDeleteLeaf:
      tree.Detach(n);
      tree.Kill(n);
      break;
    case EditKind::kDeleteMerge: {
      const auto& node = tree.node(n);
      const int child = node.left.empty() ? node.right.front() : node.left.front();
      const int parent = node.parent;
      const Side side = tree.SideOf(n);
      const std::size_t position = tree.PositionOf(n);
      tree.Detach(child);
      tree.Detach(n);
      tree.Kill(n);
      tree.AttachAt(child, parent, side, position);
      break;
    }
    case EditKind::kRelabelNode: {
      auto& node = tree.mutable_node(n);
      node.lemma = op.lemma;
      node.pos = op.pos;
      break;
    }
    case EditKind::kRelabelEdge:
      tree.mutable_node(n).deprel = op.label;
      break;
    case EditKind::kMoveSubtree:
      tree.Detach(n);
      tree.AttachFarthest(n, op.destination, op.side);
      break;
    case EditKind::kNewRoot: {
      const int old_root = tree.root();
      tree.Detach(n);
      tree.SetRoot(n);
      tree.mutable_node(n).deprel = root_label;
      tree.AttachFarthest(old_root, n, op.side);
      break;
    }
    case EditKind::kMoveSibling: {
      const int parent = tree.node(n).parent;
      tree.Detach(n);
      if (op.end == SiblingEnd::kFirst) {
        tree.AttachNearest(n, parent, op.side);
      } else {
        tree.AttachFarthest(n, parent, op.side);
      }
      break;
    }
  }
}

inline constexpr std::string_view kRootLabel = "root";

// Persistent application: returns the edited copy, `tree` is untouched.
DepTree ApplyEdit(const DepTree& tree, const EditOp& op);

// Per-category counts of source nodes that no edit touched. A node counts as
// touched when it is the `node` argument of any edit other than INSERT-CHILD
// (where it is only the attachment point).
struct UneditedCounts {
  int total = 0;
  int numeric = 0;
  int verbs = 0;
  int nouns = 0;
  int proper_nouns = 0;

  bool operator==(const UneditedCounts&) const = default;
};

struct EditSequence {
  std::vector<EditOp> ops;
  bool found = false;
  UneditedCounts source_unedited;
  std::size_t expansions = 0;
};

struct SearchConfig {
  std::size_t beam_width = 100;
  std::size_t max_expansions = 10000;
  // 0 selects 2 * (|source| + |target|).
  std::size_t max_depth = 0;
};

// Depth-synchronous beam search for an edit script turning `source` into
// `target`. Edit arguments are drawn from the target's labels. Returns
// found=false (no ops) when the expansion or depth cap is hit.
EditSequence FindEditSequence(const DepTree& source, const DepTree& target,
                              const SearchConfig& config = {});

// Applies ops in order. Throws IllegalEdit.
DepTree ReplayEdits(const DepTree& source, const std::vector<EditOp>& ops);

UneditedCounts CountUnedited(const DepTree& source, const std::vector<EditOp>& ops);

// POS / label categories shared by the feature extractor. Tag tests accept
// both Penn and Universal tagsets.
namespace category {
bool IsNoun(std::string_view pos);
bool IsProperNoun(std::string_view pos);
bool IsVerb(std::string_view pos);
bool IsPronoun(std::string_view pos);
bool ParseNumber(std::string_view lemma, double* value);
bool IsNumeric(std::string_view pos, std::string_view lemma);
bool IsSubjectLabel(std::string_view deprel);
bool IsObjectLabel(std::string_view deprel);
bool IsVerbComplementLabel(std::string_view deprel);
bool IsRootLabel(std::string_view deprel);
// |new - old| / max(|old|, 1e-9) > 0.05; unparseable values count as changed.
bool NumericChangeExceeds5Percent(std::string_view old_lemma, std::string_view new_lemma);
}  // namespace category

inline constexpr std::size_t kFeatureCount = 33;

// Slot indices of the 33-value feature vector.
namespace feature {
inline constexpr std::size_t kLength = 0;
inline constexpr std::size_t kKindCounts = 1;  // + EditKind, 9 slots
inline constexpr std::size_t kInsertNounOrVerb = 10;
inline constexpr std::size_t kInsertProperNoun = 11;
inline constexpr std::size_t kDeleteNounOrVerb = 12;
inline constexpr std::size_t kDeleteProperNoun = 13;
inline constexpr std::size_t kDeleteSubject = 14;
inline constexpr std::size_t kDeleteObject = 15;
inline constexpr std::size_t kDeleteVerbComplement = 16;
inline constexpr std::size_t kDeleteRoot = 17;
inline constexpr std::size_t kRelabelPreservesPos = 18;
inline constexpr std::size_t kRelabelPreservesLemma = 19;
inline constexpr std::size_t kRelabelNounPronoun = 20;
inline constexpr std::size_t kRelabelProperNoun = 21;
inline constexpr std::size_t kRelabelNumericChange = 22;
inline constexpr std::size_t kEdgeSubject = 23;
inline constexpr std::size_t kEdgeObject = 24;
inline constexpr std::size_t kEdgeVerbComplement = 25;
inline constexpr std::size_t kEdgeRoot = 26;
inline constexpr std::size_t kUneditedTotal = 27;
inline constexpr std::size_t kUneditedNumeric = 28;
inline constexpr std::size_t kUneditedVerbs = 29;
inline constexpr std::size_t kUneditedNouns = 30;
inline constexpr std::size_t kUneditedProperNouns = 31;
inline constexpr std::size_t kFound = 32;
}  // namespace feature

struct TreeEditFeatures {
  std::array<int, kFeatureCount> values{};

  int operator[](std::size_t i) const { return values[i]; }
  bool operator==(const TreeEditFeatures&) const = default;
};

std::string_view FeatureName(std::size_t slot);

// Counts over the script, replaying it on `source` to see each edited node.
TreeEditFeatures ExtractFeatures(const EditSequence& seq, const DepTree& source,
                                 const DepTree& target);

// One vector per edit: 9-way kind one-hot followed by a d-dim embedding
// difference (inserted word, new minus old lemma, negated deleted word, or
// zeros). An empty script yields a single all-zero vector. Relies on the
// prior_* annotations for deletes and relabels.
std::vector<Vector> VectorizeSequence(const EditSequence& seq, const EmbeddingTable& table);

nlohmann::json EditOpToJson(const EditOp& op);
EditOp EditOpFromJson(const nlohmann::json& j);
nlohmann::json EditSequenceToJson(const EditSequence& seq);
EditSequence EditSequenceFromJson(const nlohmann::json& j);

}  // namespace propmatch
