#include "thermomerge/workspace.hpp"

#include <algorithm>

namespace thermomerge {

namespace {

// Every antichain of vertices under `here`, the empty one included.
void antichains(const SynTree& t, const NodeId& here, bool is_root, bool leaves_accessible,
                std::vector<std::vector<NodeId>>& out) {
  out.push_back({});
  if (!(t.is_leaf() && !is_root && !leaves_accessible)) out.push_back({here});
  if (t.is_leaf()) return;
  std::vector<std::vector<NodeId>> a, b;
  antichains(t.child(0), here.child(0), false, leaves_accessible, a);
  antichains(t.child(1), here.child(1), false, leaves_accessible, b);
  for (const auto& x : a) {
    for (const auto& y : b) {
      if (x.empty() && y.empty()) continue;
      std::vector<NodeId> s = x;
      s.insert(s.end(), y.begin(), y.end());
      out.push_back(std::move(s));
    }
  }
}

struct Piece {
  std::vector<SynTree> left;
  std::optional<SynTree> right;
};

std::vector<Piece> component_pieces(const SynTree& t, const CoproductOptions& opt) {
  std::vector<std::vector<NodeId>> sels;
  antichains(t, NodeId{}, true, opt.leaves_accessible, sels);
  std::vector<Piece> out;
  out.reserve(sels.size());
  for (const auto& s : sels) {
    Piece p;
    if (s.empty()) {
      p.right = t;
    } else if (s.size() == 1 && s[0].is_root()) {
      p.left.push_back(t);
    } else {
      for (const auto& v : s) p.left.push_back(t.subtree(v));
      p.right = quotient(t, s);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

std::vector<CoproductTerm> coproduct(const Workspace& f, const CoproductOptions& opt) {
  struct Partial {
    std::vector<SynTree> left, right;
  };
  std::vector<Partial> acc{Partial{}};
  for (const auto& comp : f.components()) {
    auto pieces = component_pieces(comp, opt);
    std::vector<Partial> next;
    next.reserve(acc.size() * pieces.size());
    for (const auto& a : acc) {
      for (const auto& p : pieces) {
        Partial n = a;
        n.left.insert(n.left.end(), p.left.begin(), p.left.end());
        if (p.right) n.right.push_back(*p.right);
        next.push_back(std::move(n));
      }
    }
    acc = std::move(next);
  }
  std::vector<CoproductTerm> out;
  out.reserve(acc.size());
  for (auto& a : acc) out.push_back({Workspace(std::move(a.left)), Workspace(std::move(a.right))});
  return out;
}

std::vector<CoproductTerm> pi2(const std::vector<CoproductTerm>& terms) {
  std::vector<CoproductTerm> out;
  std::copy_if(terms.begin(), terms.end(), std::back_inserter(out),
               [](const CoproductTerm& t) { return t.left.size() == 2; });
  return out;
}

void WorkspaceSum::add(const Workspace& w, std::uint64_t multiplicity) {
  if (multiplicity == 0) throw Error("workspace sum: multiplicity must be positive");
  auto it = std::lower_bound(terms_.begin(), terms_.end(), w,
                             [](const Entry& e, const Workspace& x) { return e.workspace < x; });
  if (it != terms_.end() && it->workspace == w) {
    it->multiplicity += multiplicity;
  } else {
    terms_.insert(it, Entry{w, multiplicity});
  }
}

std::uint64_t WorkspaceSum::total_multiplicity() const {
  std::uint64_t s = 0;
  for (const auto& e : terms_) s += e.multiplicity;
  return s;
}

std::uint64_t WorkspaceSum::multiplicity(const Workspace& w) const {
  for (const auto& e : terms_) {
    if (e.workspace == w) return e.multiplicity;
  }
  return 0;
}

namespace {

WorkspaceSum merge_terms(const std::vector<CoproductTerm>& terms) {
  WorkspaceSum out;
  for (const auto& t : terms) {
    const auto& c = t.left.components();
    out.add(t.right.with(merge(c[0], c[1])));
  }
  return out;
}

}  // namespace

WorkspaceSum merge_chain_step(const Workspace& f, const CoproductOptions& opt) {
  return merge_terms(pi2(coproduct(f, opt)));
}

WorkspaceSum targeted_merge(const Workspace& f, const SynTree& t1, const SynTree& t2,
                            const CoproductOptions& opt) {
  const Workspace want({t1, t2});
  auto terms = pi2(coproduct(f, opt));
  std::erase_if(terms, [&](const CoproductTerm& t) { return !(t.left == want); });
  return merge_terms(terms);
}

MarkovTrajectory markov_sample(const Workspace& start, std::uint64_t seed, std::size_t steps,
                               const TransitionWeight& weight, const CoproductOptions& opt) {
  MarkovTrajectory tr;
  tr.states.push_back(start);
  Rng rng(seed);
  for (std::size_t s = 0; s < steps; ++s) {
    const Workspace& cur = tr.states.back();
    auto sum = merge_chain_step(cur, opt);
    std::vector<double> w;
    double total = 0.0;
    for (const auto& e : sum.terms()) {
      double x = static_cast<double>(e.multiplicity);
      if (weight) {
        const double h = weight(cur, e.workspace);
        if (!(h >= 0.0)) throw Error("markov_sample: transition weights must be nonnegative");
        x *= h;
      }
      w.push_back(x);
      total += x;
    }
    if (sum.empty() || !(total > 0.0)) {
      tr.dead_end = true;
      break;
    }
    double r = rng.uniform() * total;
    std::size_t pick = 0;
    for (; pick + 1 < w.size(); ++pick) {
      if (r < w[pick]) break;
      r -= w[pick];
    }
    tr.states.push_back(sum.terms()[pick].workspace);
  }
  return tr;
}

std::vector<FuncVec> circuit_value(const Workspace& f, const ThermoParams& p, const LexEmbedding& e) {
  std::vector<FuncVec> out;
  for (const auto& c : f.components()) out.push_back(embed_tree(c, p, e));
  return out;
}

}  // namespace thermomerge
