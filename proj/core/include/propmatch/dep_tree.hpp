#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace propmatch {

enum class Side : std::uint8_t { kLeft, kRight };

inline std::string_view SideName(Side side) { return side == Side::kLeft ? "left" : "right"; }

// A node of an ordered dependency tree. Children are split by side; each side
// list is kept in surface order, so the farthest left child is left.front()
// and the farthest right child is right.back().
template <typename Label>
struct BasicTreeNode {
  Label lemma{};
  Label pos{};
  Label deprel{};
  int parent = -1;
  std::vector<int> left;
  std::vector<int> right;
  // 1-based token index this node came from; 0 for nodes created by edits.
  int origin = 0;
  bool alive = true;

  std::vector<int>& children(Side side) { return side == Side::kLeft ? left : right; }
  const std::vector<int>& children(Side side) const {
    return side == Side::kLeft ? left : right;
  }
  bool is_leaf() const { return left.empty() && right.empty(); }
  std::size_t child_count() const { return left.size() + right.size(); }
};

namespace detail {

inline std::uint64_t HashMix(std::uint64_t h, std::uint64_t v) {
  std::uint64_t x = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Rooted ordered dependency tree with stable node ids. Ids index an
// append-only slot array; removed nodes stay behind as dead slots so ids
// recorded in an edit script stay valid when the script is replayed.
template <typename Label>
class BasicDepTree {
 public:
  using Node = BasicTreeNode<Label>;

  bool empty() const { return root_ < 0; }
  int root() const { return root_; }
  std::size_t size() const { return alive_count_; }
  std::size_t slot_count() const { return nodes_.size(); }

  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Node& mutable_node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  bool is_alive(int id) const {
    return id >= 0 && static_cast<std::size_t>(id) < nodes_.size() &&
           nodes_[static_cast<std::size_t>(id)].alive;
  }

  std::vector<int> AliveIds() const {
    std::vector<int> ids;
    ids.reserve(alive_count_);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].alive) ids.push_back(static_cast<int>(i));
    }
    return ids;
  }

  // Alive ids in surface order: left subtrees, node, right subtrees.
  std::vector<int> InOrder() const {
    std::vector<int> out;
    out.reserve(alive_count_);
    if (root_ >= 0) InOrderFrom(root_, out);
    return out;
  }

  bool IsDescendant(int id, int ancestor) const {
    for (int cur = id; cur >= 0; cur = node(cur).parent) {
      if (cur == ancestor) return true;
    }
    return false;
  }

  // Side of `id` under its parent; the root reports kLeft.
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

  // Structural hash consistent with TreesEqual; ignores ids and origins.
  std::uint64_t Hash() const { return root_ < 0 ? 0 : HashFrom(root_); }

  // Low-level mutators. They keep parent/child links consistent but do not
  // check edit preconditions.
  int AddNode(Label lemma, Label pos, Label deprel, int origin = 0) {
    Node n;
    n.lemma = std::move(lemma);
    n.pos = std::move(pos);
    n.deprel = std::move(deprel);
    n.origin = origin;
    nodes_.push_back(std::move(n));
    ++alive_count_;
    return static_cast<int>(nodes_.size()) - 1;
  }

  void SetRoot(int id) {
    root_ = id;
    if (id >= 0) mutable_node(id).parent = -1;
  }

  void Detach(int id) {
    Node& n = mutable_node(id);
    if (n.parent < 0) return;
    Node& p = mutable_node(n.parent);
    for (auto* list : {&p.left, &p.right}) {
      auto it = std::find(list->begin(), list->end(), id);
      if (it != list->end()) {
        list->erase(it);
        break;
      }
    }
    n.parent = -1;
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
    if (!n.alive) return;
    n.alive = false;
    n.left.clear();
    n.right.clear();
    n.parent = -1;
    --alive_count_;
  }

 private:
  void InOrderFrom(int id, std::vector<int>& out) const {
    const Node& n = node(id);
    for (int c : n.left) InOrderFrom(c, out);
    out.push_back(id);
    for (int c : n.right) InOrderFrom(c, out);
  }

  std::uint64_t HashFrom(int id) const {
    const Node& n = node(id);
    std::hash<Label> lh;
    std::uint64_t h = detail::HashMix(0x51ed270b27c1f2a3ULL, lh(n.lemma));
    h = detail::HashMix(h, lh(n.pos));
    h = detail::HashMix(h, lh(n.deprel));
    h = detail::HashMix(h, 0x4cULL + n.left.size());
    for (int c : n.left) h = detail::HashMix(h, HashFrom(c));
    h = detail::HashMix(h, 0x52ULL + n.right.size());
    for (int c : n.right) h = detail::HashMix(h, HashFrom(c));
    return h;
  }

  std::vector<Node> nodes_;
  int root_ = -1;
  std::size_t alive_count_ = 0;
};

namespace detail {

template <typename Label>
bool NodesEqual(const BasicDepTree<Label>& a, int ia, const BasicDepTree<Label>& b, int ib) {
  const auto& x = a.node(ia);
  const auto& y = b.node(ib);
  if (x.lemma != y.lemma || x.pos != y.pos || x.deprel != y.deprel) return false;
  if (x.left.size() != y.left.size() || x.right.size() != y.right.size()) return false;
  for (std::size_t i = 0; i < x.left.size(); ++i) {
    if (!NodesEqual(a, x.left[i], b, y.left[i])) return false;
  }
  for (std::size_t i = 0; i < x.right.size(); ++i) {
    if (!NodesEqual(a, x.right[i], b, y.right[i])) return false;
  }
  return true;
}

}  // namespace detail

// True iff both trees carry the same labels (lemma, pos, incoming deprel) and
// the same ordered left/right child lists, recursively from the root.
template <typename Label>
bool TreesEqual(const BasicDepTree<Label>& a, const BasicDepTree<Label>& b) {
  if (a.empty() || b.empty()) return a.empty() && b.empty();
  if (a.size() != b.size()) return false;
  return detail::NodesEqual(a, a.root(), b, b.root());
}

using TreeNode = BasicTreeNode<std::string>;
using DepTree = BasicDepTree<std::string>;

}  // namespace propmatch
