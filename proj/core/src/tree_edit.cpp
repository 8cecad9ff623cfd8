#include "propmatch/tree_edit.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace propmatch {

namespace {

constexpr std::array<std::string_view, kEditKindCount> kKindNames = {
    "INSERT-CHILD", "INSERT-PARENT", "DELETE-LEAF",  "DELETE-&-MERGE", "RELABEL-NODE",
    "RELABEL-EDGE", "MOVE-SUBTREE",  "NEW-ROOT",     "MOVE-SIBLING",
};

}  // namespace

std::string_view EditKindName(EditKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

EditKind ParseEditKind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<EditKind>(i);
  }
  throw BadInput("unknown edit kind '" + std::string(name) + "'");
}

DepTree ApplyEdit(const DepTree& tree, const EditOp& op) {
  DepTree out = tree;
  ApplyEditInPlace(out, op, std::string(kRootLabel));
  return out;
}

DepTree ReplayEdits(const DepTree& source, const std::vector<EditOp>& ops) {
  DepTree tree = source;
  const std::string root_label(kRootLabel);
  for (const EditOp& op : ops) ApplyEditInPlace(tree, op, root_label);
  return tree;
}

UneditedCounts CountUnedited(const DepTree& source, const std::vector<EditOp>& ops) {
  std::unordered_set<int> touched;
  for (const EditOp& op : ops) {
    if (op.kind != EditKind::kInsertChild) touched.insert(op.node);
  }
  UneditedCounts c;
  for (int id : source.AliveIds()) {
    if (touched.contains(id)) continue;
    const TreeNode& n = source.node(id);
    ++c.total;
    if (category::IsNumeric(n.pos, n.lemma)) ++c.numeric;
    if (category::IsVerb(n.pos)) ++c.verbs;
    if (category::IsNoun(n.pos)) ++c.nouns;
    if (category::IsProperNoun(n.pos)) ++c.proper_nouns;
  }
  return c;
}

// ---------------------------------------------------------------- search

namespace {

using Sym = int;
using ITree = BasicDepTree<Sym>;
using IOp = BasicEditOp<Sym>;

constexpr Sym kNone = 0;  // interned ""

class Interner {
 public:
  Interner() { Get(""); }
  Sym Get(const std::string& s) {
    auto [it, inserted] = ids_.emplace(s, static_cast<Sym>(names_.size()));
    if (inserted) names_.push_back(s);
    return it->second;
  }
  const std::string& Name(Sym id) const { return names_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return names_.size(); }

 private:
  std::unordered_map<std::string, Sym> ids_;
  std::vector<std::string> names_;
};

ITree Intern(const DepTree& t, Interner& in) {
  ITree out;
  for (std::size_t i = 0; i < t.slot_count(); ++i) {
    const TreeNode& n = t.node(static_cast<int>(i));
    out.AddNode(in.Get(n.lemma), in.Get(n.pos), in.Get(n.deprel), n.origin);
  }
  for (std::size_t i = 0; i < t.slot_count(); ++i) {
    const int id = static_cast<int>(i);
    const TreeNode& n = t.node(id);
    if (!n.alive) {
      out.Kill(id);
      continue;
    }
    auto& m = out.mutable_node(id);
    m.parent = n.parent;
    m.left = n.left;
    m.right = n.right;
  }
  out.SetRoot(t.root());
  return out;
}

EditOp Externalize(const IOp& op, const Interner& in) {
  EditOp out;
  out.kind = op.kind;
  out.node = op.node;
  out.lemma = in.Name(op.lemma);
  out.pos = in.Name(op.pos);
  out.label = in.Name(op.label);
  out.side = op.side;
  out.end = op.end;
  out.destination = op.destination;
  return out;
}

std::uint64_t Key(std::uint64_t tag, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                  std::uint64_t d = 0) {
  // Symbols are small; 15 bits each is ample for a single sentence pair.
  return (tag << 60) | ((a & 0x7fff) << 45) | ((b & 0x7fff) << 30) | ((c & 0x7fff) << 15) |
         (d & 0x7fff);
}

// Copy-on-write view of a tree: edits touch a handful of nodes, so a
// candidate can be applied and scored without copying the whole state.
class Overlay {
 public:
  using Node = ITree::Node;

  // Starts a fresh view of `base`. Node buffers keep their capacity across
  // resets, so steady-state evaluation does not allocate.
  void Reset(const ITree& base) {
    for (std::size_t i = 0; i < count_; ++i) where_[static_cast<std::size_t>(ids_[i])] = -1;
    base_ = &base;
    root_ = base.root();
    slots_ = static_cast<int>(base.slot_count());
    count_ = 0;
    if (where_.size() < base.slot_count() + kCapacity) where_.resize(base.slot_count() + kCapacity, -1);
  }

  int root() const { return root_; }
  bool is_alive(int id) const { return id >= 0 && id < slots_ && node(id).alive; }

  const Node& node(int id) const {
    const int at = where_[static_cast<std::size_t>(id)];
    return at >= 0 ? nodes_[static_cast<std::size_t>(at)] : base_->node(id);
  }
  Node& mutable_node(int id) {
    const int at = where_[static_cast<std::size_t>(id)];
    if (at >= 0) return nodes_[static_cast<std::size_t>(at)];
    Node& n = Push(id);
    n = base_->node(id);
    return n;
  }

  // Ids of every node this overlay has modified or created.
  std::span<const int> touched() const { return {ids_.data(), count_}; }

  bool IsDescendant(int id, int ancestor) const {
    for (int cur = id; cur >= 0; cur = node(cur).parent) {
      if (cur == ancestor) return true;
    }
    return false;
  }
  Side SideOf(int id) const {
    const int parent = node(id).parent;
    if (parent < 0) return Side::kLeft;
    const auto& l = node(parent).left;
    return std::find(l.begin(), l.end(), id) != l.end() ? Side::kLeft : Side::kRight;
  }
  std::size_t PositionOf(int id) const {
    const int parent = node(id).parent;
    if (parent < 0) return 0;
    const auto& list = node(parent).children(SideOf(id));
    return static_cast<std::size_t>(std::find(list.begin(), list.end(), id) - list.begin());
  }

  int AddNode(Sym lemma, Sym pos, Sym deprel) {
    const int id = slots_++;
    Node& n = Push(id);
    n.lemma = lemma;
    n.pos = pos;
    n.deprel = deprel;
    n.parent = -1;
    n.left.clear();
    n.right.clear();
    n.origin = 0;
    n.alive = true;
    return id;
  }
  void SetRoot(int id) {
    root_ = id;
    if (id >= 0) mutable_node(id).parent = -1;
  }
  void Detach(int id) {
    Node& n = mutable_node(id);
    if (n.parent < 0) return;
    const int parent = n.parent;
    n.parent = -1;
    Node& p = mutable_node(parent);
    for (auto* list : {&p.left, &p.right}) {
      auto it = std::find(list->begin(), list->end(), id);
      if (it != list->end()) {
        list->erase(it);
        return;
      }
    }
  }
  void AttachFarthest(int id, int parent, Side side) {
    auto& list = mutable_node(parent).children(side);
    if (side == Side::kLeft) {
      list.insert(list.begin(), id);
    } else {
      list.push_back(id);
    }
    mutable_node(id).parent = parent;
  }
  void AttachNearest(int id, int parent, Side side) {
    auto& list = mutable_node(parent).children(side);
    if (side == Side::kLeft) {
      list.push_back(id);
    } else {
      list.insert(list.begin(), id);
    }
    mutable_node(id).parent = parent;
  }
  void AttachAt(int id, int parent, Side side, std::size_t position) {
    auto& list = mutable_node(parent).children(side);
    position = std::min(position, list.size());
    list.insert(list.begin() + static_cast<std::ptrdiff_t>(position), id);
    mutable_node(id).parent = parent;
  }
  void Kill(int id) {
    Node& n = mutable_node(id);
    n.alive = false;
    n.left.clear();
    n.right.clear();
    n.parent = -1;
  }

 private:
  // No edit modifies more than four nodes; the fixed capacity keeps
  // references stable while an edit is being applied.
  static constexpr std::size_t kCapacity = 8;

  Node& Push(int id) {
    if (count_ == kCapacity) throw std::logic_error("overlay capacity exceeded");
    ids_[count_] = id;
    where_[static_cast<std::size_t>(id)] = static_cast<std::int8_t>(count_);
    return nodes_[count_++];
  }

  const ITree* base_ = nullptr;
  int root_ = -1;
  int slots_ = 0;
  std::array<int, kCapacity> ids_{};
  std::array<Node, kCapacity> nodes_{};
  std::size_t count_ = 0;
  std::vector<std::int8_t> where_;  // index into nodes_ by slot, or -1
};

std::uint64_t NodeHash(Sym lemma, Sym pos, Sym deprel) {
  std::uint64_t h = detail::HashMix(0x51ed270b27c1f2a3ULL, static_cast<std::uint64_t>(lemma));
  h = detail::HashMix(h, static_cast<std::uint64_t>(pos));
  return detail::HashMix(h, static_cast<std::uint64_t>(deprel));
}

// Merkle hash of the subtree at `id`; `child` supplies child hashes.
template <typename Tree, typename ChildHash>
std::uint64_t SubtreeHash(const Tree& t, int id, ChildHash&& child) {
  const auto& n = t.node(id);
  std::uint64_t h = NodeHash(n.lemma, n.pos, n.deprel);
  h = detail::HashMix(h, 0x4cULL + n.left.size());
  for (int c : n.left) h = detail::HashMix(h, child(c));
  h = detail::HashMix(h, 0x52ULL + n.right.size());
  for (int c : n.right) h = detail::HashMix(h, child(c));
  return h;
}

// Structure keys, the multiset behind the secondary ranking signal. Each
// live node owns (lemma,pos), (lemma,deprel) and, per child, (child lemma,
// lemma, side) and (child lemma, lemma, side, previous sibling lemma). The
// tree adds one root-lemma key.
template <typename Tree, typename Emit>
void OwnedKeys(const Tree& t, int id, Emit&& emit) {
  const auto& n = t.node(id);
  const auto lemma = static_cast<std::uint64_t>(n.lemma);
  emit(Key(1, lemma, static_cast<std::uint64_t>(n.pos)));
  emit(Key(2, lemma, static_cast<std::uint64_t>(n.deprel)));
  for (Side side : {Side::kLeft, Side::kRight}) {
    const auto& kids = n.children(side);
    const std::uint64_t s = side == Side::kLeft ? 1 : 2;
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const auto cl = static_cast<std::uint64_t>(t.node(kids[i]).lemma);
      emit(Key(3, cl, lemma, s));
      const std::uint64_t prev =
          i == 0 ? 0x7fff : static_cast<std::uint64_t>(t.node(kids[i - 1]).lemma);
      emit(Key(4, cl, lemma, s, prev));
    }
  }
}

std::uint64_t RootKey(Sym lemma) { return Key(5, static_cast<std::uint64_t>(lemma)); }

// Everything the search needs to know about the target.
struct TargetInfo {
  ITree tree;
  std::uint64_t hash = 0;
  Sym root_lemma = kNone;
  std::vector<int> lemma_count;  // indexed by symbol
  std::vector<std::tuple<Sym, Sym, Sym>> node_labels;  // distinct (lemma,pos,deprel)
  std::vector<std::pair<Sym, Sym>> lemma_pos;          // distinct (lemma,pos)
  std::map<Sym, std::vector<Sym>> deprels_of_lemma;
  // links[(child * symbols + parent) * 2 + side] is set when the target
  // has a child with that lemma under a parent with that lemma on that side.
  std::size_t symbols = 0;
  std::vector<std::uint8_t> links;
  std::vector<std::uint64_t> keys;  // sorted, with repeats

  std::size_t LinkIndex(Sym child, Sym parent, Side side) const {
    return (static_cast<std::size_t>(child) * symbols + static_cast<std::size_t>(parent)) * 2 +
           (side == Side::kLeft ? 0 : 1);
  }
  bool Linked(Sym child, Sym parent, Side side) const {
    return links[LinkIndex(child, parent, side)] != 0;
  }
};

std::uint64_t TreeHash(const ITree& t, std::vector<std::uint64_t>* per_node) {
  if (per_node != nullptr) per_node->assign(t.slot_count(), 0);
  auto rec = [&](auto&& self, int id) -> std::uint64_t {
    const std::uint64_t h = SubtreeHash(t, id, [&](int c) { return self(self, c); });
    if (per_node != nullptr) (*per_node)[static_cast<std::size_t>(id)] = h;
    return h;
  };
  return rec(rec, t.root());
}

TargetInfo DescribeTarget(const ITree& t, std::size_t symbols) {
  TargetInfo info;
  info.tree = t;
  info.hash = TreeHash(t, nullptr);
  info.root_lemma = t.node(t.root()).lemma;
  info.lemma_count.assign(symbols, 0);
  info.symbols = symbols;
  info.links.assign(symbols * symbols * 2, 0);
  std::set<std::tuple<Sym, Sym, Sym>> labels;
  std::set<std::pair<Sym, Sym>> pairs;
  std::map<Sym, std::set<Sym>> deprels;
  for (int id : t.AliveIds()) {
    const auto& n = t.node(id);
    ++info.lemma_count[static_cast<std::size_t>(n.lemma)];
    labels.emplace(n.lemma, n.pos, n.deprel);
    pairs.emplace(n.lemma, n.pos);
    deprels[n.lemma].insert(n.deprel);
    if (n.parent >= 0) {
      const Sym pl = t.node(n.parent).lemma;
      const Side side = t.SideOf(id);
      info.links[info.LinkIndex(n.lemma, pl, side)] = 1;
    }
    OwnedKeys(t, id, [&](std::uint64_t k) { info.keys.push_back(k); });
  }
  info.keys.push_back(RootKey(info.root_lemma));
  std::sort(info.keys.begin(), info.keys.end());
  info.node_labels.assign(labels.begin(), labels.end());
  info.lemma_pos.assign(pairs.begin(), pairs.end());
  for (auto& [lemma, set] : deprels) info.deprels_of_lemma[lemma].assign(set.begin(), set.end());
  return info;
}

// A beam state with the bookkeeping needed to score its successors
// incrementally.
struct State {
  ITree tree;
  std::vector<std::uint64_t> subtree_hash;  // by slot
  std::vector<int> lemma_diff;  // state count - target count, by symbol
  // State count minus target count per key, nonzero entries sorted by key.
  std::vector<std::pair<std::uint64_t, int>> key_diff;
  std::uint64_t hash = 0;
  int h = 0;  // sum |lemma_diff| + root-lemma mismatch
  int secondary = 0;  // sum |key_diff|
};

// Recomputes everything in `s` from s.tree, reusing its buffers.
void Refresh(State& s, const TargetInfo& target) {
  s.key_diff.clear();
  s.h = 0;
  s.secondary = 0;
  s.hash = TreeHash(s.tree, &s.subtree_hash);
  thread_local std::vector<std::uint64_t> keys;
  keys.clear();
  s.lemma_diff.assign(target.lemma_count.size(), 0);
  for (std::size_t l = 0; l < target.lemma_count.size(); ++l) s.lemma_diff[l] = -target.lemma_count[l];
  for (int id = 0; id < static_cast<int>(s.tree.slot_count()); ++id) {
    if (!s.tree.is_alive(id)) continue;
    ++s.lemma_diff[static_cast<std::size_t>(s.tree.node(id).lemma)];
    OwnedKeys(s.tree, id, [&](std::uint64_t k) { keys.push_back(k); });
  }
  keys.push_back(RootKey(s.tree.node(s.tree.root()).lemma));
  std::sort(keys.begin(), keys.end());
  const auto& want = target.keys;
  std::size_t i = 0, j = 0;
  while (i < keys.size() || j < want.size()) {
    const std::uint64_t k =
        j == want.size() || (i < keys.size() && keys[i] < want[j]) ? keys[i] : want[j];
    int d = 0;
    for (; i < keys.size() && keys[i] == k; ++i) ++d;
    for (; j < want.size() && want[j] == k; ++j) --d;
    if (d != 0) s.key_diff.emplace_back(k, d);
  }
  for (int d : s.lemma_diff) s.h += std::abs(d);
  if (s.tree.node(s.tree.root()).lemma != target.root_lemma) ++s.h;
  for (const auto& [k, d] : s.key_diff) s.secondary += std::abs(d);
}

struct Score {
  std::uint64_t hash;
  int h;
  int secondary;
};

class EditSearch {
 public:
  EditSearch(const TargetInfo& target, Sym root_label)
      : target_(target), root_label_(root_label), counts_(target.lemma_count.size(), 0) {}

  // Hash, heuristic and secondary signal of the state `op` leads to, without
  // materializing it. Returns nullopt when the edit is illegal.
  // `skip` rejects a successor by hash before the key deltas are computed.
  template <typename Skip>
  std::optional<Score> Evaluate(const State& state, const IOp& op, Skip&& skip) {
    const ITree& base = state.tree;
    if (EditViolation(base, op) != nullptr) return std::nullopt;
    Overlay& ov = overlay_;
    ov.Reset(base);
    ApplyEditInPlace(ov, op, root_label_);

    // Hash: recompute every touched node and its ancestors, reuse the rest.
    if (mark_.size() < base.slot_count() + 8) mark_.resize(base.slot_count() + 8, 0);
    ++epoch_;
    for (int id : ov.touched()) {
      if (!ov.node(id).alive) continue;
      for (int cur = id; cur >= 0 && mark_[static_cast<std::size_t>(cur)] != epoch_;
           cur = ov.node(cur).parent) {
        mark_[static_cast<std::size_t>(cur)] = epoch_;
      }
    }
    auto rec = [&](auto&& self, int id) -> std::uint64_t {
      if (mark_[static_cast<std::size_t>(id)] != epoch_) {
        return state.subtree_hash[static_cast<std::size_t>(id)];
      }
      return SubtreeHash(ov, id, [&](int c) { return self(self, c); });
    };
    Score score{rec(rec, ov.root()), 0, 0};
    if (skip(score.hash)) return std::nullopt;

    // Lemma counts and structure keys change only around touched nodes.
    lemma_delta_.clear();
    key_delta_.clear();
    owners_.clear();
    const int base_slots = static_cast<int>(base.slot_count());
    auto in_base = [&](int id) { return id < base_slots && base.is_alive(id); };
    auto add_owner = [&](int id) {
      if (id >= 0 && std::find(owners_.begin(), owners_.end(), id) == owners_.end()) {
        owners_.push_back(id);
      }
    };
    for (int id : ov.touched()) {
      if (in_base(id)) {
        lemma_delta_.emplace_back(base.node(id).lemma, -1);
        add_owner(base.node(id).parent);
      }
      if (ov.node(id).alive) {
        lemma_delta_.emplace_back(ov.node(id).lemma, 1);
        add_owner(ov.node(id).parent);
      }
      add_owner(id);
    }
    for (int id : owners_) {
      if (in_base(id)) OwnedKeys(base, id, [&](std::uint64_t k) { key_delta_.emplace_back(k, -1); });
      if (ov.is_alive(id)) OwnedKeys(ov, id, [&](std::uint64_t k) { key_delta_.emplace_back(k, 1); });
    }
    const Sym old_root = base.node(base.root()).lemma;
    const Sym new_root = ov.node(ov.root()).lemma;
    key_delta_.emplace_back(RootKey(old_root), -1);
    key_delta_.emplace_back(RootKey(new_root), 1);

    score.h = state.h + Collapse(lemma_delta_, [&](Sym l) {
                return state.lemma_diff[static_cast<std::size_t>(l)];
              });
    score.h += (new_root != target_.root_lemma) - (old_root != target_.root_lemma);
    score.secondary = state.secondary + Collapse(key_delta_, [&](std::uint64_t k) {
                        auto it = std::lower_bound(
                            state.key_diff.begin(), state.key_diff.end(),
                            std::pair<std::uint64_t, int>{k, std::numeric_limits<int>::min()});
                        return it != state.key_diff.end() && it->first == k ? it->second : 0;
                      });
    return score;
  }

  // The heuristic after `op`, assuming it is legal. Matches Evaluate's h.
  int QuickH(const State& state, const IOp& op) const {
    const ITree& t = state.tree;
    const auto& n = t.node(op.node);
    auto change = [&](Sym l, int d) {
      const int before = state.lemma_diff[static_cast<std::size_t>(l)];
      return std::abs(before + d) - std::abs(before);
    };
    auto root_term = [&](Sym l) { return l != target_.root_lemma ? 1 : 0; };
    const Sym root = t.node(t.root()).lemma;
    int h = state.h;
    switch (op.kind) {
      case EditKind::kInsertChild:
      case EditKind::kInsertParent:
        h += change(op.lemma, 1);
        break;
      case EditKind::kDeleteLeaf:
      case EditKind::kDeleteMerge:
        h += change(n.lemma, -1);
        break;
      case EditKind::kRelabelNode:
        if (op.lemma != n.lemma) {
          const int before = state.lemma_diff[static_cast<std::size_t>(n.lemma)];
          h += std::abs(before - 1) - std::abs(before) + change(op.lemma, 1);
        }
        if (op.node == t.root()) h += root_term(op.lemma) - root_term(root);
        break;
      case EditKind::kNewRoot:
        h += root_term(n.lemma) - root_term(root);
        break;
      case EditKind::kRelabelEdge:
      case EditKind::kMoveSubtree:
      case EditKind::kMoveSibling:
        break;
    }
    return h;
  }

  // Candidate edits. Label arguments come from the target; inserts must add
  // a lemma the state lacks and mirror a target attachment (or supply the
  // target root for a later NEW-ROOT); moves must create a target attachment
  // or park a subtree on a surplus leaf; NEW-ROOT must promote the target
  // root lemma.
  void Candidates(const ITree& t, std::vector<IOp>& out) {
    out.clear();
    std::fill(counts_.begin(), counts_.end(), 0);
    std::vector<int>& alive = alive_;
    alive.clear();
    for (int id = 0; id < static_cast<int>(t.slot_count()); ++id) {
      if (t.is_alive(id)) alive.push_back(id);
    }
    for (int id : alive) ++counts_[static_cast<std::size_t>(t.node(id).lemma)];
    auto deficient = [&](Sym l) {
      return counts_[static_cast<std::size_t>(l)] < target_.lemma_count[static_cast<std::size_t>(l)];
    };
    auto surplus = [&](Sym l) {
      return counts_[static_cast<std::size_t>(l)] > target_.lemma_count[static_cast<std::size_t>(l)];
    };
    const int root = t.root();
    const bool root_wrong = t.node(root).lemma != target_.root_lemma;

    for (int n : alive) {
      const auto& node = t.node(n);
      const bool is_root = n == root;

      for (const auto& [l, p, e] : target_.node_labels) {
        const bool new_top = is_root && root_wrong && l == target_.root_lemma && deficient(l);
        for (Side s : {Side::kLeft, Side::kRight}) {
          if (new_top || target_.Linked(l, node.lemma, s)) {
            out.push_back(IOp::InsertChild(n, l, p, e, s));
          }
          if (!is_root && target_.Linked(node.lemma, l, s)) {
            out.push_back(IOp::InsertParent(n, l, p, e, s));
          }
        }
      }

      if (!is_root && node.is_leaf()) out.push_back(IOp::DeleteLeaf(n));
      if (!is_root && node.child_count() == 1) out.push_back(IOp::DeleteMerge(n));

      for (const auto& [l, p] : target_.lemma_pos) {
        if (l != node.lemma || p != node.pos) out.push_back(IOp::RelabelNode(n, l, p));
      }

      if (auto it = target_.deprels_of_lemma.find(node.lemma);
          it != target_.deprels_of_lemma.end()) {
        for (Sym e : it->second) {
          if (e != node.deprel) out.push_back(IOp::RelabelEdge(n, e));
        }
      }

      if (is_root) continue;

      const Side cur_side = t.SideOf(n);
      const auto& siblings = t.node(node.parent).children(cur_side);
      const bool farthest = cur_side == Side::kLeft ? siblings.front() == n : siblings.back() == n;
      const bool nearest = cur_side == Side::kLeft ? siblings.back() == n : siblings.front() == n;

      for (int m : alive) {
        if (t.IsDescendant(m, n)) continue;
        const auto& dest = t.node(m);
        const bool merge_slot = dest.is_leaf() && surplus(dest.lemma);
        for (Side s : {Side::kLeft, Side::kRight}) {
          if (m == node.parent && s == cur_side && farthest) continue;
          if (merge_slot ||
              target_.Linked(node.lemma, dest.lemma, s)) {
            out.push_back(IOp::MoveSubtree(n, m, s));
          }
        }
      }

      if (node.lemma == target_.root_lemma) {
        out.push_back(IOp::NewRoot(n, Side::kLeft));
        out.push_back(IOp::NewRoot(n, Side::kRight));
      }

      for (Side s : {Side::kLeft, Side::kRight}) {
        for (SiblingEnd r : {SiblingEnd::kFirst, SiblingEnd::kLast}) {
          if (s == cur_side && ((r == SiblingEnd::kFirst && nearest) ||
                                (r == SiblingEnd::kLast && farthest))) {
            continue;
          }
          out.push_back(IOp::MoveSibling(n, s, r));
        }
      }
    }
  }

 private:
  // Sorts (key, delta) pairs and returns the change in sum |diff| they cause.
  template <typename K, typename Lookup>
  static int Collapse(std::vector<std::pair<K, int>>& deltas, Lookup&& diff_of) {
    std::sort(deltas.begin(), deltas.end());
    int change = 0;
    for (std::size_t i = 0; i < deltas.size();) {
      int d = 0;
      std::size_t j = i;
      for (; j < deltas.size() && deltas[j].first == deltas[i].first; ++j) d += deltas[j].second;
      if (d != 0) {
        const int before = diff_of(deltas[i].first);
        change += std::abs(before + d) - std::abs(before);
      }
      i = j;
    }
    return change;
  }

  const TargetInfo& target_;
  Sym root_label_;
  std::vector<int> counts_;
  Overlay overlay_;
  std::vector<std::uint32_t> mark_;
  std::uint32_t epoch_ = 0;
  std::vector<int> owners_;
  std::vector<int> alive_;
  std::vector<std::pair<Sym, int>> lemma_delta_;
  std::vector<std::pair<std::uint64_t, int>> key_delta_;
};

struct Candidate {
  int h;
  int secondary;
  std::size_t seq;
  std::uint64_t hash;
  std::size_t parent;
  IOp op;
};

struct Pending {
  int h;
  std::size_t parent;
  IOp op;
};

// Back-pointers for one depth; `parent` indexes the previous depth.
struct Layer {
  std::vector<std::size_t> parents;
  std::vector<IOp> ops;
};

}  // namespace

EditSequence FindEditSequence(const DepTree& source, const DepTree& target,
                              const SearchConfig& config) {
  EditSequence result;
  if (source.empty() || target.empty()) throw BadInput("edit search needs two non-empty trees");
  if (TreesEqual(source, target)) {
    result.found = true;
    result.source_unedited = CountUnedited(source, {});
    return result;
  }

  Interner interner;
  const Sym root_label = interner.Get(std::string(kRootLabel));
  ITree start = Intern(source, interner);
  const ITree goal = Intern(target, interner);
  const TargetInfo info = DescribeTarget(goal, interner.size());
  EditSearch search(info, root_label);

  const std::size_t width = std::max<std::size_t>(1, config.beam_width);
  const std::size_t max_depth =
      config.max_depth > 0 ? config.max_depth : 2 * (source.size() + target.size());

  std::vector<State> frontier;
  frontier.emplace_back();
  frontier[0].tree = std::move(start);
  Refresh(frontier[0], info);
  std::vector<Layer> layers(1);
  layers[0].parents.push_back(0);
  layers[0].ops.emplace_back();

  std::unordered_set<std::uint64_t> visited{frontier[0].hash};
  std::vector<Pending> pending;
  std::vector<Candidate> candidates;
  std::vector<std::uint64_t> fresh;  // distinct unvisited hashes seen so far
  std::vector<IOp> edits;
  std::vector<std::size_t> bucket_start, order;
  std::vector<State> next;

  auto finish = [&](std::size_t slot, const IOp& last) {
    std::vector<IOp> path{last};
    for (std::size_t d = layers.size() - 1; d > 0; --d) {
      path.push_back(layers[d].ops[slot]);
      slot = layers[d].parents[slot];
    }
    std::reverse(path.begin(), path.end());
    // Replay on the string tree to attach prior-label annotations.
    DepTree replay = source;
    const std::string rl(kRootLabel);
    for (const IOp& op : path) {
      EditOp ext = Externalize(op, interner);
      AnnotateEdit(replay, ext);
      ApplyEditInPlace(replay, ext, rl);
      result.ops.push_back(std::move(ext));
    }
    result.found = true;
    result.source_unedited = CountUnedited(source, result.ops);
  };

  for (std::size_t depth = 1; depth <= max_depth; ++depth) {
    // Lemma heuristic first: it is cheap, ranks ahead of the secondary
    // signal, and lets whole groups of worse edits go unscored.
    pending.clear();
    for (std::size_t slot = 0; slot < frontier.size(); ++slot) {
      if (++result.expansions > config.max_expansions) {
        result.source_unedited = CountUnedited(source, {});
        return result;
      }
      search.Candidates(frontier[slot].tree, edits);
      for (const IOp& op : edits) {
        pending.push_back(Pending{search.QuickH(frontier[slot], op), slot, op});
      }
    }
    int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
    for (const Pending& p : pending) {
      lo = std::min(lo, p.h);
      hi = std::max(hi, p.h);
    }

    // Bucket by h, keeping generation order within a bucket.
    bucket_start.assign(static_cast<std::size_t>(hi - lo + 2), 0);
    for (const Pending& p : pending) ++bucket_start[static_cast<std::size_t>(p.h - lo + 1)];
    for (std::size_t b = 1; b < bucket_start.size(); ++b) bucket_start[b] += bucket_start[b - 1];
    order.resize(pending.size());
    {
      std::vector<std::size_t> next_slot(bucket_start.begin(), bucket_start.end() - 1);
      for (std::size_t i = 0; i < pending.size(); ++i) {
        order[next_slot[static_cast<std::size_t>(pending[i].h - lo)]++] = i;
      }
    }

    candidates.clear();
    fresh.clear();
    std::size_t seq = 0;
    for (int group = lo; group <= hi && fresh.size() < width; ++group) {
      const std::size_t b = static_cast<std::size_t>(group - lo);
      for (std::size_t k = bucket_start[b]; k < bucket_start[b + 1]; ++k) {
        const auto& [h, slot, op] = pending[order[k]];
        const State& state = frontier[slot];
        const std::optional<Score> score =
            search.Evaluate(state, op, [&](std::uint64_t h) { return visited.contains(h); });
        if (!score) continue;
        if (score->hash == info.hash) {
          ITree child = state.tree;
          ApplyEditInPlace(child, op, root_label);
          if (TreesEqual(child, goal)) {
            finish(slot, op);
            return result;
          }
        }
        fresh.push_back(score->hash);
        candidates.push_back(Candidate{score->h, score->secondary, seq++, score->hash, slot, op});
      }
      std::sort(fresh.begin(), fresh.end());
      fresh.erase(std::unique(fresh.begin(), fresh.end()), fresh.end());
    }
    if (candidates.empty()) break;
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(a.h, a.secondary, a.seq) < std::tie(b.h, b.secondary, b.seq);
    });
    // States in `next` are recycled across depths so their buffers persist.
    std::size_t used = 0;
    Layer layer;
    for (const Candidate& c : candidates) {
      if (used >= width) break;
      if (!visited.insert(c.hash).second) continue;
      if (used == next.size()) next.emplace_back();
      State& child = next[used++];
      child.tree = frontier[c.parent].tree;
      ApplyEditInPlace(child.tree, c.op, root_label);
      Refresh(child, info);
      layer.parents.push_back(c.parent);
      layer.ops.push_back(c.op);
    }
    next.resize(used);
    std::swap(frontier, next);
    layers.push_back(std::move(layer));
  }
  result.source_unedited = CountUnedited(source, {});
  return result;
}

// ---------------------------------------------------------------- JSON

nlohmann::json EditOpToJson(const EditOp& op) {
  nlohmann::json j{{"op", EditKindName(op.kind)}, {"node", op.node}};
  switch (op.kind) {
    case EditKind::kInsertChild:
    case EditKind::kInsertParent:
      j["lemma"] = op.lemma;
      j["pos"] = op.pos;
      j["label"] = op.label;
      j["side"] = SideName(op.side);
      break;
    case EditKind::kDeleteLeaf:
    case EditKind::kDeleteMerge:
      break;
    case EditKind::kRelabelNode:
      j["lemma"] = op.lemma;
      j["pos"] = op.pos;
      break;
    case EditKind::kRelabelEdge:
      j["label"] = op.label;
      break;
    case EditKind::kMoveSubtree:
      j["destination"] = op.destination;
      j["side"] = SideName(op.side);
      break;
    case EditKind::kNewRoot:
      j["side"] = SideName(op.side);
      break;
    case EditKind::kMoveSibling:
      j["side"] = SideName(op.side);
      j["position"] = op.end == SiblingEnd::kFirst ? "first" : "last";
      break;
  }
  if (!op.prior_lemma.empty() || !op.prior_pos.empty() || !op.prior_deprel.empty()) {
    j["prior"] = {{"lemma", op.prior_lemma}, {"pos", op.prior_pos}, {"deprel", op.prior_deprel}};
  }
  return j;
}

namespace {

Side ParseSide(const std::string& s) {
  if (s == "left") return Side::kLeft;
  if (s == "right") return Side::kRight;
  throw BadInput("side must be left|right, got '" + s + "'");
}

}  // namespace

EditOp EditOpFromJson(const nlohmann::json& j) {
  try {
    EditOp op;
    op.kind = ParseEditKind(j.at("op").get<std::string>());
    op.node = j.at("node").get<int>();
    switch (op.kind) {
      case EditKind::kInsertChild:
      case EditKind::kInsertParent:
        op.lemma = j.at("lemma").get<std::string>();
        op.pos = j.at("pos").get<std::string>();
        op.label = j.at("label").get<std::string>();
        op.side = ParseSide(j.at("side").get<std::string>());
        break;
      case EditKind::kDeleteLeaf:
      case EditKind::kDeleteMerge:
        break;
      case EditKind::kRelabelNode:
        op.lemma = j.at("lemma").get<std::string>();
        op.pos = j.at("pos").get<std::string>();
        break;
      case EditKind::kRelabelEdge:
        op.label = j.at("label").get<std::string>();
        break;
      case EditKind::kMoveSubtree:
        op.destination = j.at("destination").get<int>();
        op.side = ParseSide(j.at("side").get<std::string>());
        break;
      case EditKind::kNewRoot:
        op.side = ParseSide(j.at("side").get<std::string>());
        break;
      case EditKind::kMoveSibling: {
        op.side = ParseSide(j.at("side").get<std::string>());
        const std::string pos = j.at("position").get<std::string>();
        if (pos != "first" && pos != "last") throw BadInput("position must be first|last");
        op.end = pos == "first" ? SiblingEnd::kFirst : SiblingEnd::kLast;
        break;
      }
    }
    if (j.contains("prior")) {
      const auto& p = j["prior"];
      op.prior_lemma = p.value("lemma", "");
      op.prior_pos = p.value("pos", "");
      op.prior_deprel = p.value("deprel", "");
    }
    return op;
  } catch (const nlohmann::json::exception& e) {
    throw BadInput(std::string("edit op: ") + e.what());
  }
}

nlohmann::json EditSequenceToJson(const EditSequence& seq) {
  nlohmann::json ops = nlohmann::json::array();
  for (const EditOp& op : seq.ops) ops.push_back(EditOpToJson(op));
  const auto& u = seq.source_unedited;
  return {{"found", seq.found},
          {"ops", std::move(ops)},
          {"unedited",
           {{"total", u.total},
            {"numeric", u.numeric},
            {"verbs", u.verbs},
            {"nouns", u.nouns},
            {"proper_nouns", u.proper_nouns}}}};
}

EditSequence EditSequenceFromJson(const nlohmann::json& j) {
  try {
    EditSequence seq;
    seq.found = j.at("found").get<bool>();
    for (const auto& op : j.at("ops")) seq.ops.push_back(EditOpFromJson(op));
    if (j.contains("unedited")) {
      const auto& u = j["unedited"];
      seq.source_unedited = UneditedCounts{u.value("total", 0), u.value("numeric", 0),
                                           u.value("verbs", 0), u.value("nouns", 0),
                                           u.value("proper_nouns", 0)};
    }
    return seq;
  } catch (const nlohmann::json::exception& e) {
    throw BadInput(std::string("edit sequence: ") + e.what());
  }
}

}  // namespace propmatch
