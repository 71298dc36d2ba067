#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "thermomerge/workspace.hpp"

using namespace thermomerge;

namespace {

ThermoParams ry2(double beta) { return ThermoParams(InfoMeasure::renyi2(), beta); }

std::vector<LexItem> labels(std::size_t n) {
  std::vector<LexItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string id(1, static_cast<char>('a' + i));
    out.push_back({id, id});
  }
  return out;
}

// Every forest on the given distinct leaves: set partitions times shapes.
std::vector<Workspace> all_workspaces(const std::vector<LexItem>& items) {
  if (items.empty()) return {Workspace()};
  std::vector<Workspace> out;
  const std::size_t n = items.size();
  // block holding items[0]
  for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
    std::vector<LexItem> block{items[0]}, rest;
    for (std::size_t i = 1; i < n; ++i) ((mask >> (i - 1)) & 1u ? block : rest).push_back(items[i]);
    for (const auto& t : enumerate_trees(block))
      for (const auto& w : all_workspaces(rest)) out.push_back(w.with(t));
  }
  return out;
}

struct Vertex {
  std::size_t comp;
  NodeId id;
};

bool is_prefix(const std::string& a, const std::string& b) { return b.compare(0, a.size(), a) == 0; }

std::optional<SynTree> remove_marked(const SynTree& t, const std::set<std::string>& cut, const std::string& at) {
  if (cut.count(at)) return std::nullopt;
  if (t.is_leaf()) return t;
  auto l = remove_marked(t.child(0), cut, at + "0");
  auto r = remove_marked(t.child(1), cut, at + "1");
  if (l && r) return merge(*l, *r);
  return l ? l : r;
}

// All vertex subsets with no ancestor pair, by brute force over the powerset.
std::vector<CoproductTerm> oracle_coproduct(const Workspace& f, bool leaves) {
  std::vector<Vertex> vs;
  for (std::size_t c = 0; c < f.size(); ++c) {
    for (const auto& v : f.components()[c].vertices()) {
      if (!leaves && !v.is_root() && f.components()[c].subtree(v).is_leaf()) continue;
      vs.push_back({c, v});
    }
  }
  std::vector<CoproductTerm> out;
  for (unsigned long mask = 0; mask < (1ul << vs.size()); ++mask) {
    bool ok = true;
    for (std::size_t i = 0; i < vs.size() && ok; ++i)
      for (std::size_t j = 0; j < vs.size() && ok; ++j)
        if (i != j && ((mask >> i) & 1ul) && ((mask >> j) & 1ul) && vs[i].comp == vs[j].comp &&
            is_prefix(vs[i].id.path, vs[j].id.path))
          ok = false;
    if (!ok) continue;
    std::vector<SynTree> left, right;
    std::vector<std::set<std::string>> cuts(f.size());
    for (std::size_t i = 0; i < vs.size(); ++i)
      if ((mask >> i) & 1ul) {
        left.push_back(f.components()[vs[i].comp].subtree(vs[i].id));
        cuts[vs[i].comp].insert(vs[i].id.path);
      }
    for (std::size_t c = 0; c < f.size(); ++c)
      if (auto r = remove_marked(f.components()[c], cuts[c], "")) right.push_back(*r);
    out.push_back({Workspace(left), Workspace(right)});
  }
  return out;
}

std::multiset<std::string> term_keys(const std::vector<CoproductTerm>& ts) {
  std::multiset<std::string> s;
  for (const auto& t : ts) s.insert(t.left.key() + " | " + t.right.key());
  return s;
}

std::multiset<std::string> leaf_ids(const Workspace& w) {
  std::multiset<std::string> s;
  for (const auto& it : w.leaves()) s.insert(it.id);
  return s;
}

}  // namespace

TEST(Coproduct, CherryHasFiveTerms) {
  auto terms = coproduct(parse_workspace("{a,b}"));
  ASSERT_EQ(terms.size(), 5u);
  std::multiset<std::string> want{"{a,b} | 1", "1 | {a,b}", "a | b", "b | a", "a b | 1"};
  std::multiset<std::string> got;
  for (const auto& t : terms) got.insert(t.left.to_string() + " | " + t.right.to_string());
  EXPECT_EQ(got, want);
}

TEST(Coproduct, LeafHasPrimitivesOnly) {
  auto terms = coproduct(parse_workspace("a"));
  ASSERT_EQ(terms.size(), 2u);
  EXPECT_EQ(term_keys(terms), term_keys({{Workspace(), parse_workspace("a")}, {parse_workspace("a"), Workspace()}}));
  EXPECT_EQ(coproduct(Workspace()).size(), 1u);
}

TEST(Coproduct, MatchesBruteForceUpToSixLeaves) {
  std::size_t checked = 0;
  for (std::size_t n = 1; n <= 6; ++n) {
    for (const auto& w : all_workspaces(labels(n))) {
      auto got = coproduct(w);
      auto want = oracle_coproduct(w, true);
      ASSERT_EQ(got.size(), want.size()) << w.to_string();
      if (n <= 4) EXPECT_EQ(term_keys(got), term_keys(want)) << w.to_string();
      for (const auto& t : got) {
        auto u = leaf_ids(t.left);
        auto r = leaf_ids(t.right);
        u.insert(r.begin(), r.end());
        ASSERT_EQ(u, leaf_ids(w)) << w.to_string();
      }
      ++checked;
    }
  }
  EXPECT_EQ(checked, 1u + 2u + 7u + 37u + 266u + 2431u);
}

TEST(Coproduct, NoLeavesOption) {
  CoproductOptions opt;
  opt.leaves_accessible = false;
  for (std::size_t n = 1; n <= 5; ++n) {
    for (const auto& w : all_workspaces(labels(n))) {
      EXPECT_EQ(term_keys(coproduct(w, opt)), term_keys(oracle_coproduct(w, false))) << w.to_string();
    }
  }
  EXPECT_EQ(coproduct(parse_workspace("{a,b}"), opt).size(), 2u);
}

TEST(Pi2, Examples) {
  auto p = pi2(coproduct(parse_workspace("{a,b}")));
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].left, parse_workspace("a b"));
  EXPECT_TRUE(p[0].right.empty());
  EXPECT_TRUE(pi2(coproduct(parse_workspace("a"))).empty());

  auto q = pi2(coproduct(parse_workspace("{a,b} {c,d}")));
  bool cross = false;
  for (const auto& t : q) {
    EXPECT_EQ(t.left.size(), 2u);
    cross = cross || (t.left == parse_workspace("a c") && t.right == parse_workspace("b d"));
  }
  EXPECT_TRUE(cross);
}

TEST(Pi2, ReorderInvariant) {
  std::vector<SynTree> comps{parse_tree("{a,{b,c}}"), parse_tree("d"), parse_tree("{e,f}")};
  const auto base = term_keys(pi2(coproduct(Workspace(comps))));
  std::sort(comps.begin(), comps.end(), [](const SynTree& x, const SynTree& y) { return y < x; });
  do {
    EXPECT_EQ(term_keys(pi2(coproduct(Workspace(comps)))), base);
  } while (std::next_permutation(comps.begin(), comps.end()));
}

TEST(MergeChain, Examples) {
  auto k = merge_chain_step(parse_workspace("{a,b}"));
  EXPECT_EQ(k.multiplicity(parse_workspace("{a,b}")), 1u);

  auto ext = merge_chain_step(parse_workspace("a b"));
  ASSERT_EQ(ext.size(), 1u);
  EXPECT_EQ(ext.terms()[0].workspace, parse_workspace("{a,b}"));

  auto in = merge_chain_step(parse_workspace("{a,{b,c}}"));
  EXPECT_GE(in.multiplicity(parse_workspace("{a,{b,c}}")), 1u);
  // b and c merged back together
  EXPECT_EQ(in.multiplicity(parse_workspace("{b,c} a")), 1u);
  EXPECT_EQ(in.multiplicity(parse_workspace("{a,b} c")), 1u);

  EXPECT_TRUE(merge_chain_step(parse_workspace("a")).empty());
}

TEST(MergeChain, MultiplicitiesAgreeWithPi2) {
  for (const auto& w : all_workspaces(labels(4))) {
    auto k = merge_chain_step(w);
    std::map<std::string, std::uint64_t> want;
    for (const auto& t : pi2(coproduct(w))) {
      want[t.right.with(merge(t.left.components()[0], t.left.components()[1])).key()]++;
    }
    std::uint64_t total = 0;
    for (const auto& [key, m] : want) total += m;
    EXPECT_EQ(k.total_multiplicity(), total);
    EXPECT_EQ(k.size(), want.size());
    for (const auto& e : k.terms()) EXPECT_EQ(e.multiplicity, want.at(e.workspace.key()));
    for (std::size_t i = 1; i < k.size(); ++i) EXPECT_LT(k.terms()[i - 1].workspace.key(), k.terms()[i].workspace.key());
  }
}

TEST(TargetedMerge, Examples) {
  auto ab = targeted_merge(parse_workspace("a b"), parse_tree("a"), parse_tree("b"));
  ASSERT_EQ(ab.size(), 1u);
  EXPECT_EQ(ab.terms()[0].workspace, parse_workspace("{a,b}"));
  EXPECT_EQ(ab.terms()[0].multiplicity, 1u);

  EXPECT_TRUE(targeted_merge(parse_workspace("a b"), parse_tree("a"), parse_tree("z")).empty());

  auto im = targeted_merge(parse_workspace("{a,{b,c}}"), parse_tree("{b,c}"), parse_tree("a"));
  ASSERT_EQ(im.size(), 1u);
  EXPECT_EQ(im.terms()[0].workspace, Workspace({merge(parse_tree("{b,c}"), parse_tree("a"))}));
  // order of the pair does not matter
  auto im2 = targeted_merge(parse_workspace("{a,{b,c}}"), parse_tree("a"), parse_tree("{b,c}"));
  EXPECT_EQ(im2.terms()[0].workspace, im.terms()[0].workspace);
}

TEST(WorkspaceSumType, AddAggregates) {
  WorkspaceSum s;
  s.add(parse_workspace("b"), 2);
  s.add(parse_workspace("a"));
  s.add(parse_workspace("b"));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.terms()[0].workspace, parse_workspace("a"));
  EXPECT_EQ(s.multiplicity(parse_workspace("b")), 3u);
  EXPECT_EQ(s.total_multiplicity(), 4u);
  EXPECT_THROW(s.add(parse_workspace("c"), 0), Error);
}

TEST(Markov, Examples) {
  auto dead = markov_sample(parse_workspace("a"), 1, 5);
  EXPECT_EQ(dead.states.size(), 1u);
  EXPECT_TRUE(dead.dead_end);

  auto zero = markov_sample(parse_workspace("a b"), 1, 0);
  EXPECT_EQ(zero.states.size(), 1u);
  EXPECT_FALSE(zero.dead_end);

  auto one = markov_sample(parse_workspace("a b"), 1, 1);
  ASSERT_EQ(one.states.size(), 2u);
  EXPECT_EQ(one.states[1], parse_workspace("{a,b}"));
}

TEST(Markov, DeterministicUnderSeed) {
  const auto start = parse_workspace("a b c d");
  auto t1 = markov_sample(start, 99, 6);
  auto t2 = markov_sample(start, 99, 6);
  ASSERT_EQ(t1.states.size(), t2.states.size());
  for (std::size_t i = 0; i < t1.states.size(); ++i) EXPECT_EQ(t1.states[i], t2.states[i]);
  EXPECT_EQ(t1.states.size(), 7u);
  bool differs = false;
  for (std::uint64_t s = 0; s < 20 && !differs; ++s) differs = !(markov_sample(start, s, 1).states[1] == t1.states[1]);
  EXPECT_TRUE(differs);
}

TEST(Markov, WeightedFrequencies) {
  const auto start = parse_workspace("a b c");
  const auto fav = parse_workspace("{a,b} c");
  TransitionWeight w = [&](const Workspace&, const Workspace& to) { return to == fav ? 2.0 : 1.0; };
  const int n = 4000;
  int hits = 0;
  for (int s = 0; s < n; ++s) hits += markov_sample(start, static_cast<std::uint64_t>(s), 1, w).states[1] == fav;
  // three successors with weights 2, 1, 1
  EXPECT_NEAR(hits / static_cast<double>(n), 0.5, 0.04);

  int uni = 0;
  for (int s = 0; s < n; ++s) uni += markov_sample(start, static_cast<std::uint64_t>(s), 1).states[1] == fav;
  EXPECT_NEAR(uni / static_cast<double>(n), 1.0 / 3.0, 0.04);
}

TEST(Circuit, Values) {
  Lexicon lex(labels(4));
  auto e = generate_embedding(lex, SampleGrid(64), RandomFourier{}, 8);
  const auto p = ry2(0.5 * high_temp_beta(e).beta);
  EXPECT_TRUE(circuit_value(Workspace(), p, e).empty());
  auto single = circuit_value(parse_workspace("c"), p, e);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].samples, e.at("c").samples);
  EXPECT_THROW(circuit_value(parse_workspace("q"), p, e), Error);

  for (const auto& start : {parse_workspace("a {b,c} d"), parse_workspace("{a,{b,c}} d")}) {
    for (const auto& t : pi2(coproduct(start))) {
      const auto& t1 = t.left.components()[0];
      const auto& t2 = t.left.components()[1];
      const auto v1 = embed_tree(t1, p, e), v2 = embed_tree(t2, p, e);
      auto merged = targeted_merge(start, t1, t2);
      ASSERT_FALSE(merged.empty());
      const auto m = merge(t1, t2);
      for (const auto& entry : merged.terms()) {
        auto vals = circuit_value(entry.workspace, p, e);
        const auto& comps = entry.workspace.components();
        auto it = std::find(comps.begin(), comps.end(), m);
        ASSERT_NE(it, comps.end());
        const auto& v = vals[static_cast<std::size_t>(it - comps.begin())];
        for (std::size_t i = 0; i < v.samples.size(); ++i) ASSERT_EQ(v[i], oplus(p, v1[i], v2[i]));
      }
    }
  }
}
