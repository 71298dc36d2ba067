#pragma once

// Workspace coproduct, the two-component projection, targeted Merge and the
// Merge Markov chain built from them.
//
// A coproduct term selects a set of pairwise vertex-disjoint accessible
// subtrees across the components (a component's root counts as selectable,
// which is how whole components move left). The empty selection gives
// 1 (x) F and selecting every root gives F (x) 1.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "thermomerge/embed.hpp"
#include "thermomerge/semiring.hpp"
#include "thermomerge/syntax.hpp"

namespace thermomerge {

struct CoproductTerm {
  Workspace left;   // extracted forest
  Workspace right;  // quotient; empty means the unit
};

struct CoproductOptions {
  // Whether single leaves below a root may be extracted.
  bool leaves_accessible = true;
};

std::vector<CoproductTerm> coproduct(const Workspace& f, const CoproductOptions& opt = {});

// Terms whose left workspace has exactly two components.
std::vector<CoproductTerm> pi2(const std::vector<CoproductTerm>& terms);

// Formal sum of workspaces with positive integer multiplicities, kept sorted
// by canonical key.
class WorkspaceSum {
 public:
  struct Entry {
    Workspace workspace;
    std::uint64_t multiplicity;
  };

  void add(const Workspace& w, std::uint64_t multiplicity = 1);
  const std::vector<Entry>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }
  std::uint64_t total_multiplicity() const;
  // 0 when absent.
  std::uint64_t multiplicity(const Workspace& w) const;

 private:
  std::vector<Entry> terms_;
};

// mu o ((- (+) -) (x) id) o Pi2 o Delta: every (T1 u T2) (x) F' becomes
// M(T1, T2) u F'.
WorkspaceSum merge_chain_step(const Workspace& f, const CoproductOptions& opt = {});

// As merge_chain_step, keeping only left channels equal to {t1, t2}.
WorkspaceSum targeted_merge(const Workspace& f, const SynTree& t1, const SynTree& t2,
                            const CoproductOptions& opt = {});

// Relative weight of a successor workspace; the default chain uses 1.
using TransitionWeight = std::function<double(const Workspace& from, const Workspace& to)>;

struct MarkovTrajectory {
  std::vector<Workspace> states;  // starts with the initial workspace
  bool dead_end = false;          // stopped early on an empty sum
};

// Samples successors with probability proportional to multiplicity times
// weight.
MarkovTrajectory markov_sample(const Workspace& start, std::uint64_t seed, std::size_t steps,
                               const TransitionWeight& weight = {},
                               const CoproductOptions& opt = {});

// The circuit monomial of f as the list of its component values.
std::vector<FuncVec> circuit_value(const Workspace& f, const ThermoParams& p, const LexEmbedding& e);

}  // namespace thermomerge
