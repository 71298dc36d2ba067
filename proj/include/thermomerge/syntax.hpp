#pragma once

// Syntactic objects: the free commutative non-associative magma over a
// lexicon, realised as unordered binary rooted trees in canonical form.

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "thermomerge/error.hpp"

namespace thermomerge {

struct LexItem {
  std::string id;
  std::string label;

  friend bool operator==(const LexItem& a, const LexItem& b) { return a.id == b.id; }
  friend auto operator<=>(const LexItem& a, const LexItem& b) { return a.id <=> b.id; }
};

class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::vector<LexItem> items);

  // {"items":[{"id":"w1","label":"the"}, ...]}
  static Lexicon from_json_text(std::string_view text);
  static Lexicon load(const std::string& path);
  std::string to_json_text() const;

  const std::vector<LexItem>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  const LexItem* find(std::string_view id) const;
  const LexItem& at(std::string_view id) const;

 private:
  std::vector<LexItem> items_;
};

// Path-from-root address in canonical child order: "" is the root, "0" the
// first child, "01" the second child of the first child, and so on.
struct NodeId {
  std::string path;

  bool is_root() const { return path.empty(); }
  std::size_t depth() const { return path.size(); }
  NodeId child(int which) const { return NodeId{path + (which == 0 ? '0' : '1')}; }

  friend bool operator==(const NodeId&, const NodeId&) = default;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

std::string to_string(const NodeId& id);

class SynTree {
 public:
  static SynTree leaf(LexItem item);
  static SynTree leaf(std::string id) { return leaf(LexItem{id, id}); }

  bool is_leaf() const { return node_->item.has_value(); }
  const LexItem& item() const;
  // Children in canonical order (ascending canonical key).
  const SynTree& child(int which) const;

  // Recursive key with lexicographically sorted children; equal keys iff
  // equal as unordered trees.
  const std::string& key() const { return node_->key; }
  std::size_t leaf_count() const { return node_->leaves; }
  std::size_t vertex_count() const { return 2 * node_->leaves - 1; }
  std::size_t internal_count() const { return node_->leaves - 1; }

  // Leaf items in canonical left-to-right order.
  std::vector<LexItem> leaves() const;
  // All vertex ids in preorder.
  std::vector<NodeId> vertices() const;
  std::vector<NodeId> internal_vertices() const;
  std::vector<NodeId> leaf_vertices() const;

  bool contains(const NodeId& id) const;
  // Throws on unknown id.
  const SynTree& subtree(const NodeId& id) const;

  // Bracket notation over item ids, e.g. {a,{b,c}}.
  std::string to_string() const;
  std::string to_label_string() const;

  friend bool operator==(const SynTree& a, const SynTree& b) { return a.key() == b.key(); }
  friend bool operator<(const SynTree& a, const SynTree& b) { return a.key() < b.key(); }

 private:
  struct Node {
    std::optional<LexItem> item;
    std::vector<SynTree> children;  // empty or exactly two, canonical order
    std::string key;
    std::size_t leaves = 1;
  };
  explicit SynTree(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  friend SynTree merge(const SynTree&, const SynTree&);

  std::shared_ptr<const Node> node_;
};

SynTree merge(const SynTree& t1, const SynTree& t2);

// Parses bracket notation. Leaf tokens are item ids; when a lexicon is given
// they must be known to it, otherwise an item with id == label is created.
SynTree parse_tree(std::string_view text, const Lexicon* lexicon = nullptr);

// Accessible terms: the full subtrees at non-root vertices, in preorder.
// Leaves are included unless include_leaves is false.
std::vector<std::pair<NodeId, SynTree>> accessible_terms(const SynTree& t,
                                                         bool include_leaves = true);

// T/T_v: removes the subtree at v and contracts the unary parent. Returns
// nullopt for the formal unit (everything removed). Removing several
// vertex-disjoint subtrees at once is supported by the second overload.
std::optional<SynTree> quotient(const SynTree& t, const NodeId& v);
std::optional<SynTree> quotient(const SynTree& t, const std::vector<NodeId>& removed);

inline constexpr std::size_t kDefaultEnumerationCap = 7;

// All distinct unordered binary trees whose leaf multiset is `labels`, sorted
// by canonical key. Built by leaf insertion on every edge.
std::vector<SynTree> enumerate_trees(const std::vector<LexItem>& labels,
                                     std::size_t cap = kDefaultEnumerationCap);

// (2n-3)!! for n >= 2, 1 for n == 1.
unsigned long long count_binary_trees(std::size_t n);

// For every internal vertex, the canonical index (0/1) of the child lying
// toward the head.
class HeadMarking {
 public:
  HeadMarking() = default;
  explicit HeadMarking(std::map<NodeId, int> marks) : marks_(std::move(marks)) {}

  // Marks the first canonical child everywhere.
  static HeadMarking first_child(const SynTree& t);

  void validate(const SynTree& t) const;
  int mark(const NodeId& v) const;
  const std::map<NodeId, int>& marks() const { return marks_; }

  // h_T(v): the leaf reached by following marked edges from v.
  NodeId head_leaf(const SynTree& t, const NodeId& v) const;

 private:
  std::map<NodeId, int> marks_;
};

struct HeadPath {
  NodeId leaf;
  std::vector<NodeId> vertices;  // top-most vertex first, ends at leaf
};

// Partition of V(T) into maximal marked-edge paths, one per leaf, in leaf
// preorder.
std::vector<HeadPath> head_paths(const SynTree& t, const HeadMarking& h);

// A multiset of syntactic objects. Components are kept sorted by key so that
// equality is order independent; the empty workspace is the unit.
class Workspace {
 public:
  Workspace() = default;
  explicit Workspace(std::vector<SynTree> components);

  const std::vector<SynTree>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }
  bool empty() const { return components_.empty(); }
  std::size_t leaf_count() const;
  std::vector<LexItem> leaves() const;

  Workspace joined(const Workspace& other) const;
  Workspace with(const SynTree& t) const;

  std::string key() const;
  // Components separated by spaces; the empty workspace prints as "1".
  std::string to_string() const;

  friend bool operator==(const Workspace& a, const Workspace& b) {
    return a.components_ == b.components_;
  }
  friend bool operator<(const Workspace& a, const Workspace& b) { return a.key() < b.key(); }

 private:
  std::vector<SynTree> components_;
};

// Components separated by whitespace; "1" or "" is the empty workspace.
Workspace parse_workspace(std::string_view text, const Lexicon* lexicon = nullptr);

}  // namespace thermomerge
