#include "thermomerge/syntax.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace thermomerge {

namespace {

bool is_token_char(char c) {
  return c != '{' && c != '}' && c != ',' && !std::isspace(static_cast<unsigned char>(c));
}

void check_id(std::string_view id) {
  if (id.empty()) throw Error("lexical item id must be non-empty");
  for (char c : id) {
    if (!is_token_char(c)) {
      throw Error("lexical item id '" + std::string(id) +
                  "' may not contain braces, commas or whitespace");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Lexicon

Lexicon::Lexicon(std::vector<LexItem> items) : items_(std::move(items)) {
  std::set<std::string> seen;
  for (const auto& it : items_) {
    check_id(it.id);
    if (!seen.insert(it.id).second) throw Error("duplicate lexical item id '" + it.id + "'");
  }
}

Lexicon Lexicon::from_json_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("lexicon: invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("items") || !j["items"].is_array()) {
    throw Error("lexicon: expected an object with an \"items\" array");
  }
  std::vector<LexItem> items;
  for (const auto& e : j["items"]) {
    if (!e.contains("id") || !e["id"].is_string()) throw Error("lexicon: item without string id");
    LexItem it;
    it.id = e["id"].get<std::string>();
    it.label = e.contains("label") && e["label"].is_string() ? e["label"].get<std::string>() : it.id;
    items.push_back(std::move(it));
  }
  return Lexicon(std::move(items));
}

Lexicon Lexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lexicon file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string Lexicon::to_json_text() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& it : items_) arr.push_back({{"id", it.id}, {"label", it.label}});
  return nlohmann::json{{"items", arr}}.dump();
}

const LexItem* Lexicon::find(std::string_view id) const {
  for (const auto& it : items_) {
    if (it.id == id) return &it;
  }
  return nullptr;
}

const LexItem& Lexicon::at(std::string_view id) const {
  const LexItem* it = find(id);
  if (it == nullptr) throw Error("unknown lexical item '" + std::string(id) + "'");
  return *it;
}

std::string to_string(const NodeId& id) { return id.is_root() ? std::string("root") : id.path; }

// ---------------------------------------------------------------------------
// SynTree

SynTree SynTree::leaf(LexItem item) {
  check_id(item.id);
  auto n = std::make_shared<Node>();
  n->key = item.id;
  n->item = std::move(item);
  n->leaves = 1;
  return SynTree(std::move(n));
}

SynTree merge(const SynTree& t1, const SynTree& t2) {
  auto n = std::make_shared<SynTree::Node>();
  if (t2.key() < t1.key()) {
    n->children = {t2, t1};
  } else {
    n->children = {t1, t2};
  }
  n->key = "{" + n->children[0].key() + "," + n->children[1].key() + "}";
  n->leaves = t1.leaf_count() + t2.leaf_count();
  return SynTree(std::move(n));
}

const LexItem& SynTree::item() const {
  if (!is_leaf()) throw Error("item() called on an internal node");
  return *node_->item;
}

const SynTree& SynTree::child(int which) const {
  if (is_leaf()) throw Error("child() called on a leaf");
  if (which != 0 && which != 1) throw Error("child index must be 0 or 1");
  return node_->children[static_cast<std::size_t>(which)];
}

std::vector<LexItem> SynTree::leaves() const {
  std::vector<LexItem> out;
  out.reserve(leaf_count());
  std::vector<const SynTree*> stack{this};
  while (!stack.empty()) {
    const SynTree* t = stack.back();
    stack.pop_back();
    if (t->is_leaf()) {
      out.push_back(t->item());
    } else {
      stack.push_back(&t->child(1));
      stack.push_back(&t->child(0));
    }
  }
  return out;
}

namespace {

template <class Visit>
void preorder(const SynTree& t, const NodeId& id, Visit&& visit) {
  visit(id, t);
  if (!t.is_leaf()) {
    preorder(t.child(0), id.child(0), visit);
    preorder(t.child(1), id.child(1), visit);
  }
}

}  // namespace

std::vector<NodeId> SynTree::vertices() const {
  std::vector<NodeId> out;
  preorder(*this, NodeId{}, [&](const NodeId& id, const SynTree&) { out.push_back(id); });
  return out;
}

std::vector<NodeId> SynTree::internal_vertices() const {
  std::vector<NodeId> out;
  preorder(*this, NodeId{}, [&](const NodeId& id, const SynTree& s) {
    if (!s.is_leaf()) out.push_back(id);
  });
  return out;
}

std::vector<NodeId> SynTree::leaf_vertices() const {
  std::vector<NodeId> out;
  preorder(*this, NodeId{}, [&](const NodeId& id, const SynTree& s) {
    if (s.is_leaf()) out.push_back(id);
  });
  return out;
}

bool SynTree::contains(const NodeId& id) const {
  const SynTree* t = this;
  for (char c : id.path) {
    if (t->is_leaf() || (c != '0' && c != '1')) return false;
    t = &t->child(c == '0' ? 0 : 1);
  }
  return true;
}

const SynTree& SynTree::subtree(const NodeId& id) const {
  const SynTree* t = this;
  for (char c : id.path) {
    if (t->is_leaf() || (c != '0' && c != '1')) {
      throw Error("unknown node id '" + id.path + "' in tree " + to_string());
    }
    t = &t->child(c == '0' ? 0 : 1);
  }
  return *t;
}

std::string SynTree::to_string() const { return key(); }

std::string SynTree::to_label_string() const {
  if (is_leaf()) return item().label;
  return "{" + child(0).to_label_string() + "," + child(1).to_label_string() + "}";
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class BracketParser {
 public:
  BracketParser(std::string_view text, const Lexicon* lex) : s_(text), lex_(lex) {}

  SynTree parse_one() {
    skip_ws();
    SynTree t = parse_node();
    return t;
  }

  bool at_end() {
    skip_ws();
    return pos_ >= s_.size();
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error("bracket parse error at offset " + std::to_string(pos_) + ": " + what + " in '" +
                std::string(s_) + "'");
  }

  SynTree parse_node() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (s_[pos_] == '{') {
      ++pos_;
      SynTree a = parse_node();
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != ',') fail("expected ','");
      ++pos_;
      SynTree b = parse_node();
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != '}') fail("expected '}' (trees are strictly binary)");
      ++pos_;
      return merge(a, b);
    }
    std::size_t start = pos_;
    while (pos_ < s_.size() && is_token_char(s_[pos_])) ++pos_;
    if (start == pos_) fail("expected a leaf token");
    std::string tok(s_.substr(start, pos_ - start));
    if (lex_ != nullptr) return SynTree::leaf(lex_->at(tok));
    return SynTree::leaf(LexItem{tok, tok});
  }

  std::string_view s_;
  const Lexicon* lex_;
  std::size_t pos_ = 0;
};

}  // namespace

SynTree parse_tree(std::string_view text, const Lexicon* lexicon) {
  BracketParser p(text, lexicon);
  SynTree t = p.parse_one();
  if (!p.at_end()) throw Error("trailing input after tree in '" + std::string(text) + "'");
  return t;
}

Workspace parse_workspace(std::string_view text, const Lexicon* lexicon) {
  std::string trimmed(text);
  trimmed.erase(0, trimmed.find_first_not_of(" \t\n\r"));
  trimmed.erase(trimmed.find_last_not_of(" \t\n\r") + 1);
  if (trimmed.empty() || trimmed == "1") return Workspace{};
  BracketParser p(trimmed, lexicon);
  std::vector<SynTree> comps;
  while (!p.at_end()) comps.push_back(p.parse_one());
  return Workspace(std::move(comps));
}

// ---------------------------------------------------------------------------
// Accessible terms and quotients

std::vector<std::pair<NodeId, SynTree>> accessible_terms(const SynTree& t, bool include_leaves) {
  std::vector<std::pair<NodeId, SynTree>> out;
  preorder(t, NodeId{}, [&](const NodeId& id, const SynTree& s) {
    if (id.is_root()) return;
    if (s.is_leaf() && !include_leaves) return;
    out.emplace_back(id, s);
  });
  return out;
}

namespace {

bool is_prefix(const std::string& p, const std::string& s) {
  return p.size() <= s.size() && s.compare(0, p.size(), p) == 0;
}

std::optional<SynTree> rebuild_without(const SynTree& t, const NodeId& here,
                                       const std::set<NodeId>& removed) {
  if (removed.count(here) != 0) return std::nullopt;
  if (t.is_leaf()) return t;
  // Subtrees untouched by any removal are shared as-is.
  bool touched = std::any_of(removed.begin(), removed.end(),
                             [&](const NodeId& r) { return is_prefix(here.path, r.path); });
  if (!touched) return t;
  auto a = rebuild_without(t.child(0), here.child(0), removed);
  auto b = rebuild_without(t.child(1), here.child(1), removed);
  if (a && b) return merge(*a, *b);
  if (a) return a;
  if (b) return b;
  return std::nullopt;
}

}  // namespace

std::optional<SynTree> quotient(const SynTree& t, const std::vector<NodeId>& removed) {
  std::set<NodeId> rs;
  for (const auto& v : removed) {
    if (!t.contains(v)) throw Error("unknown node id '" + v.path + "' in tree " + t.to_string());
    if (v.is_root()) throw Error("quotient by the root is not an accessible-term quotient");
    rs.insert(v);
  }
  for (const auto& a : rs) {
    for (const auto& b : rs) {
      if (!(a == b) && is_prefix(a.path, b.path)) {
        throw Error("quotient: removed subtrees '" + a.path + "' and '" + b.path + "' are nested");
      }
    }
  }
  return rebuild_without(t, NodeId{}, rs);
}

std::optional<SynTree> quotient(const SynTree& t, const NodeId& v) {
  return quotient(t, std::vector<NodeId>{v});
}

// ---------------------------------------------------------------------------
// Enumeration

namespace {

void insert_everywhere(const SynTree& t, const SynTree& leaf, std::vector<SynTree>& out) {
  out.push_back(merge(t, leaf));
  if (t.is_leaf()) return;
  for (int i = 0; i < 2; ++i) {
    std::vector<SynTree> sub;
    insert_everywhere(t.child(i), leaf, sub);
    for (const auto& s : sub) out.push_back(merge(s, t.child(1 - i)));
  }
}

}  // namespace

std::vector<SynTree> enumerate_trees(const std::vector<LexItem>& labels, std::size_t cap) {
  if (labels.empty()) throw Error("enumerate_trees: need at least one label");
  if (labels.size() > cap) {
    throw Error("enumerate_trees: " + std::to_string(labels.size()) + " labels exceed the cap of " +
                std::to_string(cap));
  }
  std::vector<SynTree> current{SynTree::leaf(labels[0])};
  for (std::size_t k = 1; k < labels.size(); ++k) {
    SynTree leaf = SynTree::leaf(labels[k]);
    std::map<std::string, SynTree> next;
    for (const auto& t : current) {
      std::vector<SynTree> grown;
      insert_everywhere(t, leaf, grown);
      for (auto& g : grown) next.emplace(g.key(), std::move(g));
    }
    current.clear();
    for (auto& [k2, t] : next) current.push_back(t);
  }
  return current;
}

unsigned long long count_binary_trees(std::size_t n) {
  unsigned long long r = 1;
  for (std::size_t k = 3; k + 1 <= 2 * n - 2 && n >= 2; k += 2) r *= k;
  return r;
}

// ---------------------------------------------------------------------------
// Head markings

HeadMarking HeadMarking::first_child(const SynTree& t) {
  std::map<NodeId, int> m;
  for (const auto& v : t.internal_vertices()) m.emplace(v, 0);
  return HeadMarking(std::move(m));
}

void HeadMarking::validate(const SynTree& t) const {
  auto internal = t.internal_vertices();
  for (const auto& v : internal) {
    auto it = marks_.find(v);
    if (it == marks_.end()) throw Error("head marking: no mark at internal vertex " + to_string(v));
    if (it->second != 0 && it->second != 1) {
      throw Error("head marking: mark at " + to_string(v) + " must be 0 or 1");
    }
  }
  if (marks_.size() != internal.size()) {
    throw Error("head marking: marks given for vertices that are not internal vertices of " +
                t.to_string());
  }
}

int HeadMarking::mark(const NodeId& v) const {
  auto it = marks_.find(v);
  if (it == marks_.end()) throw Error("head marking: no mark at " + to_string(v));
  return it->second;
}

NodeId HeadMarking::head_leaf(const SynTree& t, const NodeId& v) const {
  NodeId cur = v;
  const SynTree* s = &t.subtree(v);
  while (!s->is_leaf()) {
    int m = mark(cur);
    cur = cur.child(m);
    s = &s->child(m);
  }
  return cur;
}

std::vector<HeadPath> head_paths(const SynTree& t, const HeadMarking& h) {
  h.validate(t);
  std::map<NodeId, std::vector<NodeId>> by_leaf;
  for (const auto& v : t.vertices()) by_leaf[h.head_leaf(t, v)].push_back(v);
  std::vector<HeadPath> out;
  for (const auto& leaf : t.leaf_vertices()) {
    auto& vs = by_leaf[leaf];
    std::sort(vs.begin(), vs.end(),
              [](const NodeId& a, const NodeId& b) { return a.depth() < b.depth(); });
    out.push_back(HeadPath{leaf, vs});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Workspaces

Workspace::Workspace(std::vector<SynTree> components) : components_(std::move(components)) {
  std::sort(components_.begin(), components_.end());
}

std::size_t Workspace::leaf_count() const {
  std::size_t n = 0;
  for (const auto& c : components_) n += c.leaf_count();
  return n;
}

std::vector<LexItem> Workspace::leaves() const {
  std::vector<LexItem> out;
  for (const auto& c : components_) {
    auto l = c.leaves();
    out.insert(out.end(), l.begin(), l.end());
  }
  return out;
}

Workspace Workspace::joined(const Workspace& other) const {
  std::vector<SynTree> all = components_;
  all.insert(all.end(), other.components_.begin(), other.components_.end());
  return Workspace(std::move(all));
}

Workspace Workspace::with(const SynTree& t) const {
  std::vector<SynTree> all = components_;
  all.push_back(t);
  return Workspace(std::move(all));
}

std::string Workspace::key() const {
  std::string k = "[";
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (i) k += ' ';
    k += components_[i].key();
  }
  return k + "]";
}

std::string Workspace::to_string() const {
  if (components_.empty()) return "1";
  std::string s;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (i) s += ' ';
    s += components_[i].to_string();
  }
  return s;
}

}  // namespace thermomerge
