#pragma once

// Sampled function space over X = [0,1], lexicon embeddings phi, the
// pointwise tree embedding phi_{S,beta}(T), and empirical audits of its
// injectivity and of single wall crossings.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "thermomerge/semiring.hpp"
#include "thermomerge/syntax.hpp"
#include "thermomerge/tree_eval.hpp"

namespace thermomerge {

// Uniform grid t_i = i/(n-1) on [0,1].
class SampleGrid {
 public:
  explicit SampleGrid(std::size_t n_samples = 256);
  std::size_t size() const { return n_; }
  double point(std::size_t i) const;
  std::vector<double> points() const;
  friend bool operator==(const SampleGrid&, const SampleGrid&) = default;

 private:
  std::size_t n_;
};

struct FuncVec {
  SampleGrid grid;
  std::vector<double> samples;

  FuncVec(SampleGrid g, std::vector<double> s);
  double sup_norm() const;
  double operator[](std::size_t i) const { return samples[i]; }
};

double sup_distance(const FuncVec& a, const FuncVec& b);

struct RandomFourier {
  int modes = 5;
  double amplitude = 1.0;  // bound on every coefficient
};

struct FromFile {
  std::string path;
};

using EmbeddingGenerator = std::variant<RandomFourier, FromFile>;

class LexEmbedding {
 public:
  // Validates that every function lives on `grid` and that the sample matrix
  // has full row rank (relative singular value tolerance 1e-8).
  LexEmbedding(SampleGrid grid, std::vector<LexItem> items, std::map<std::string, FuncVec> funcs,
               std::uint64_t seed);

  const SampleGrid& grid() const { return grid_; }
  const std::vector<LexItem>& items() const { return items_; }
  const FuncVec& at(const std::string& id) const;
  bool contains(const std::string& id) const { return funcs_.count(id) != 0; }
  std::uint64_t seed() const { return seed_; }

  // Pointwise leaf values at grid index i.
  LeafValues values_at(std::size_t i) const;

  // CSV with header t,item1,item2,...
  std::string to_csv() const;

 private:
  friend LexEmbedding make_unchecked_embedding(SampleGrid, std::vector<LexItem>,
                                               std::map<std::string, FuncVec>);
  struct Unchecked {};
  LexEmbedding(Unchecked, SampleGrid grid, std::vector<LexItem> items,
               std::map<std::string, FuncVec> funcs);

  SampleGrid grid_;
  std::vector<LexItem> items_;
  std::map<std::string, FuncVec> funcs_;
  std::uint64_t seed_;
};

// Skips the rank check; used for deliberately degenerate test embeddings.
LexEmbedding make_unchecked_embedding(SampleGrid grid, std::vector<LexItem> items,
                                      std::map<std::string, FuncVec> funcs);

// Numerical rank of the item-by-sample matrix.
std::size_t embedding_rank(const std::map<std::string, FuncVec>& funcs, double rel_tol = 1e-8);

LexEmbedding generate_embedding(const Lexicon& lexicon, const SampleGrid& grid,
                                const EmbeddingGenerator& gen, std::uint64_t seed);

// Reads the CSV format written by LexEmbedding::to_csv. Columns must name
// lexicon items; the t column must be the uniform grid on [0,1]. With
// check_rank false degenerate embeddings are accepted (for audits).
LexEmbedding load_embedding_csv(const std::string& path, const Lexicon& lexicon,
                                bool check_rank = true);
LexEmbedding parse_embedding_csv(const std::string& text, const Lexicon& lexicon,
                                 bool check_rank = true);

struct HighTempBound {
  double sup_bound;  // M_L
  double beta;       // beta_L = 1 / M_L
};

// Over `subset` (default: every item).
HighTempBound high_temp_beta(const LexEmbedding& e,
                             const std::optional<std::vector<std::string>>& subset = std::nullopt);

// max over pairs and grid points of |beta/2 (phi_a(t) - phi_b(t))|.
double max_pairwise_u(const LexEmbedding& e, double beta);

FuncVec embed_tree(const SynTree& t, const ThermoParams& p, const LexEmbedding& e);

// Pointwise optimal lambda_v(t) for every internal vertex.
std::map<NodeId, FuncVec> optimal_lambda_field(const SynTree& t, const ThermoParams& p,
                                               const LexEmbedding& e);

struct AuditConfig {
  std::size_t n_max = 4;
  std::size_t max_label_sets = 0;  // per size; 0 means every subset
  double threshold = 1e-9;
  unsigned threads = 1;
};

struct AuditFailure {
  std::vector<std::string> labels;
  std::string tree_a;
  std::string tree_b;
  double gap;
};

struct AuditSizeReport {
  std::size_t n = 0;
  std::size_t label_sets = 0;
  std::size_t shapes = 0;  // per label set
  std::size_t pairs = 0;   // total over label sets
  std::optional<double> min_gap;  // empty when no pairs (n <= 2)
  std::vector<AuditFailure> failures;
};

struct AuditReport {
  double beta = 0.0;
  double beta_bound = 0.0;
  bool high_temperature = false;
  double threshold = 0.0;
  std::vector<AuditSizeReport> sizes;
  std::vector<std::string> warnings;

  bool passed() const;
  std::optional<double> min_gap() const;
};

AuditReport injectivity_audit(const LexEmbedding& e, const ThermoParams& p, const AuditConfig& cfg);

// The five leaves of the compared pair
//   {{{a,b},c},{d,e}}  vs  {{a,{b,c}},{d,e}}
// which differ by a single wall crossing at the vertex above a, b, c.
struct WallCrossingConfig {
  std::string a, b, c, d, e;
  double threshold = 1e-9;

  static WallCrossingConfig from_lexicon(const std::vector<LexItem>& items);
};

struct WallCrossingReport {
  std::string tree_left;
  std::string tree_right;
  double sup_gap = 0.0;
  double max_defect = 0.0;      // of the local associativity defect at the vertex
  double defect_fraction = 0.0; // grid points where the local defect exceeds threshold
};

WallCrossingReport wall_crossing_check(const LexEmbedding& e, const ThermoParams& p,
                                       const WallCrossingConfig& cfg);

std::string audit_report_json(const AuditReport& report,
                              const std::optional<WallCrossingReport>& wall = std::nullopt);

// Seeded generator shared by every randomised component. The engine output
// is fixed by the standard; the mapping to doubles is done here rather than
// through <random> distributions, whose outputs vary between libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  std::uint64_t next() { return eng_(); }
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }  // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace thermomerge
