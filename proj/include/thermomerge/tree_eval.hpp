#pragma once

// Evaluation of syntactic objects in a thermodynamic semiring: leaf
// coefficient polynomials a_l(Lambda), the tree-bracketed sums, the tree
// entropy S_T and the optimal Lambda.
//
// Convention: at an internal vertex v with canonical children (c0, c1) the
// weight lambda_v multiplies the value of c0, so
//   B_v = lambda_v B_c0 + (1 - lambda_v) B_c1 - S(lambda_v) / beta.
// Leaf data is keyed by lexical item id.

#include <map>
#include <string>

#include "thermomerge/semiring.hpp"
#include "thermomerge/syntax.hpp"

namespace thermomerge {

using LeafValues = std::map<std::string, double>;

struct LambdaAssignment {
  std::map<NodeId, double> values;

  // One entry per internal vertex of t, each in [0,1].
  void validate(const SynTree& t) const;
  double at(const NodeId& v) const;
};

struct LeafDistribution {
  std::map<std::string, double> probs;

  double total() const;
};

// a_l = prod over the root-to-l path of lambda_v (edge toward the head) or
// 1 - lambda_v (the other edge).
LeafDistribution coeffs(const SynTree& t, const HeadMarking& h, const LambdaAssignment& lam);

double bracket_eval_lambda(const SynTree& t, const ThermoParams& p, const LeafValues& xs,
                           const LambdaAssignment& lam);

// Recursive (+)_{S,beta} over the tree; independent of any planar structure.
double bracket_eval(const SynTree& t, const ThermoParams& p, const LeafValues& xs);

// S_T(A) via S_{M(T1,T2)} = S(l) + l S_T1 + (1-l) S_T2 with l the mass of
// the first child. Every subtree must carry positive mass.
double tree_entropy(const SynTree& t, const InfoMeasure& m, const LeafDistribution& a);

// sum_l a_l x_l - S_T(A)/beta
double bracket_eval_distribution(const SynTree& t, const ThermoParams& p, const LeafValues& xs,
                                 const LeafDistribution& a);

// Bottom-up per-vertex minimiser; plugging it into bracket_eval_lambda gives
// bracket_eval.
LambdaAssignment argmin_lambda(const SynTree& t, const ThermoParams& p, const LeafValues& xs);

}  // namespace thermomerge
