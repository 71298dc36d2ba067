#include "thermomerge/tree_eval.hpp"

#include <cmath>

namespace thermomerge {

namespace {

double leaf_value(const SynTree& leaf, const LeafValues& xs) {
  auto it = xs.find(leaf.item().id);
  if (it == xs.end()) throw Error("no value for leaf '" + leaf.item().id + "'");
  return it->second;
}

}  // namespace

void LambdaAssignment::validate(const SynTree& t) const {
  auto internal = t.internal_vertices();
  for (const auto& v : internal) {
    auto it = values.find(v);
    if (it == values.end()) throw Error("lambda assignment: missing lambda at " + to_string(v));
    if (!(it->second >= 0.0 && it->second <= 1.0)) {
      throw Error("lambda assignment: lambda at " + to_string(v) + " outside [0,1]");
    }
  }
  if (values.size() != internal.size()) {
    throw Error("lambda assignment: entries for vertices that are not internal");
  }
}

double LambdaAssignment::at(const NodeId& v) const {
  auto it = values.find(v);
  if (it == values.end()) throw Error("lambda assignment: missing lambda at " + to_string(v));
  return it->second;
}

double LeafDistribution::total() const {
  double s = 0.0;
  for (const auto& [id, a] : probs) s += a;
  return s;
}

LeafDistribution coeffs(const SynTree& t, const HeadMarking& h, const LambdaAssignment& lam) {
  h.validate(t);
  lam.validate(t);
  LeafDistribution out;
  auto walk = [&](auto&& self, const SynTree& s, const NodeId& id, double weight) -> void {
    if (s.is_leaf()) {
      out.probs[s.item().id] += weight;
      return;
    }
    const double l = lam.at(id);
    const int head = h.mark(id);
    self(self, s.child(head), id.child(head), weight * l);
    self(self, s.child(1 - head), id.child(1 - head), weight * (1.0 - l));
  };
  walk(walk, t, NodeId{}, 1.0);
  return out;
}

double bracket_eval_lambda(const SynTree& t, const ThermoParams& p, const LeafValues& xs,
                           const LambdaAssignment& lam) {
  lam.validate(t);
  auto eval = [&](auto&& self, const SynTree& s, const NodeId& id) -> double {
    if (s.is_leaf()) return leaf_value(s, xs);
    const double l = lam.at(id);
    const double a = self(self, s.child(0), id.child(0));
    const double b = self(self, s.child(1), id.child(1));
    return l * a + (1.0 - l) * b - entropy(p.measure, l) / p.beta;
  };
  return eval(eval, t, NodeId{});
}

double bracket_eval(const SynTree& t, const ThermoParams& p, const LeafValues& xs) {
  if (t.is_leaf()) return leaf_value(t, xs);
  return oplus(p, bracket_eval(t.child(0), p, xs), bracket_eval(t.child(1), p, xs));
}

double tree_entropy(const SynTree& t, const InfoMeasure& m, const LeafDistribution& a) {
  for (const auto& [id, v] : a.probs) {
    if (!(v >= 0.0)) throw Error("tree_entropy: negative probability for '" + id + "'");
  }
  if (std::abs(a.total() - 1.0) > 1e-9) throw Error("tree_entropy: distribution does not sum to 1");
  auto mass = [&](auto&& self, const SynTree& s) -> double {
    if (s.is_leaf()) {
      auto it = a.probs.find(s.item().id);
      if (it == a.probs.end()) throw Error("tree_entropy: no probability for '" + s.item().id + "'");
      return it->second;
    }
    return self(self, s.child(0)) + self(self, s.child(1));
  };
  // Returns S_T of the conditional distribution on the leaves of s.
  auto rec = [&](auto&& self, const SynTree& s) -> double {
    if (s.is_leaf()) return 0.0;
    const double m0 = mass(mass, s.child(0));
    const double m1 = mass(mass, s.child(1));
    if (!(m0 > 0.0) || !(m1 > 0.0)) {
      throw Error("tree_entropy: zero-mass subtree under " + s.to_string());
    }
    const double l = m0 / (m0 + m1);
    return entropy(m, l) + l * self(self, s.child(0)) + (1.0 - l) * self(self, s.child(1));
  };
  return rec(rec, t);
}

double bracket_eval_distribution(const SynTree& t, const ThermoParams& p, const LeafValues& xs,
                                 const LeafDistribution& a) {
  double lin = 0.0;
  for (const auto& item : t.leaves()) {
    auto it = a.probs.find(item.id);
    if (it == a.probs.end()) throw Error("no probability for leaf '" + item.id + "'");
    auto xt = xs.find(item.id);
    if (xt == xs.end()) throw Error("no value for leaf '" + item.id + "'");
    lin += it->second * xt->second;
  }
  return lin - tree_entropy(t, p.measure, a) / p.beta;
}

LambdaAssignment argmin_lambda(const SynTree& t, const ThermoParams& p, const LeafValues& xs) {
  LambdaAssignment out;
  auto rec = [&](auto&& self, const SynTree& s, const NodeId& id) -> double {
    if (s.is_leaf()) return leaf_value(s, xs);
    const double a = self(self, s.child(0), id.child(0));
    const double b = self(self, s.child(1), id.child(1));
    const double l = optimal_lambda(p, a, b);
    out.values[id] = l;
    return oplus(p, a, b);
  };
  rec(rec, t, NodeId{});
  return out;
}

}  // namespace thermomerge
