#include "thermomerge/embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include <Eigen/Dense>

#include "json.hpp"

namespace thermomerge {

// ---------------------------------------------------------------------------
// Grid and sampled functions

SampleGrid::SampleGrid(std::size_t n_samples) : n_(n_samples) {
  if (n_samples < 2) throw Error("sample grid needs at least 2 points");
}

double SampleGrid::point(std::size_t i) const {
  return static_cast<double>(i) / static_cast<double>(n_ - 1);
}

std::vector<double> SampleGrid::points() const {
  std::vector<double> out(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = point(i);
  return out;
}

FuncVec::FuncVec(SampleGrid g, std::vector<double> s) : grid(g), samples(std::move(s)) {
  if (samples.size() != grid.size()) {
    throw Error("function has " + std::to_string(samples.size()) + " samples on a grid of " +
                std::to_string(grid.size()));
  }
}

double FuncVec::sup_norm() const {
  double m = 0.0;
  for (double v : samples) m = std::max(m, std::abs(v));
  return m;
}

double sup_distance(const FuncVec& a, const FuncVec& b) {
  if (!(a.grid == b.grid)) throw Error("sup_distance: functions on different grids");
  double m = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------------------
// Embeddings

std::size_t embedding_rank(const std::map<std::string, FuncVec>& funcs, double rel_tol) {
  if (funcs.empty()) return 0;
  const auto cols = static_cast<Eigen::Index>(funcs.begin()->second.samples.size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(funcs.size()), cols);
  Eigen::Index r = 0;
  for (const auto& [id, f] : funcs) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f.samples[static_cast<std::size_t>(c)];
    ++r;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * sv(0)) ++rank;
  }
  return rank;
}

namespace {

void check_shapes(const SampleGrid& grid, const std::vector<LexItem>& items,
                  const std::map<std::string, FuncVec>& funcs) {
  for (const auto& it : items) {
    auto f = funcs.find(it.id);
    if (f == funcs.end()) throw Error("embedding: no function for item '" + it.id + "'");
    if (!(f->second.grid == grid)) throw Error("embedding: function for '" + it.id + "' on a different grid");
  }
  if (funcs.size() != items.size()) throw Error("embedding: functions for unknown items");
}

}  // namespace

LexEmbedding::LexEmbedding(SampleGrid grid, std::vector<LexItem> items,
                           std::map<std::string, FuncVec> funcs, std::uint64_t seed)
    : grid_(grid), items_(std::move(items)), funcs_(std::move(funcs)), seed_(seed) {
  check_shapes(grid_, items_, funcs_);
  if (embedding_rank(funcs_) == funcs_.size()) return;
  // Report the items whose functions add nothing to the span of earlier ones.
  std::vector<std::string> offending;
  std::map<std::string, FuncVec> prefix;
  for (const auto& it : items_) {
    prefix.emplace(it.id, funcs_.at(it.id));
    if (embedding_rank(prefix) < prefix.size()) {
      offending.push_back(it.id);
      prefix.erase(it.id);
    }
  }
  std::string msg = "embedding is rank deficient; dependent items:";
  for (const auto& id : offending) msg += " " + id;
  throw Error(msg);
}

LexEmbedding::LexEmbedding(Unchecked, SampleGrid grid, std::vector<LexItem> items,
                           std::map<std::string, FuncVec> funcs)
    : grid_(grid), items_(std::move(items)), funcs_(std::move(funcs)), seed_(0) {
  check_shapes(grid_, items_, funcs_);
}

LexEmbedding make_unchecked_embedding(SampleGrid grid, std::vector<LexItem> items,
                                      std::map<std::string, FuncVec> funcs) {
  return LexEmbedding(LexEmbedding::Unchecked{}, grid, std::move(items), std::move(funcs));
}

const FuncVec& LexEmbedding::at(const std::string& id) const {
  auto it = funcs_.find(id);
  if (it == funcs_.end()) throw Error("embedding has no function for item '" + id + "'");
  return it->second;
}

LeafValues LexEmbedding::values_at(std::size_t i) const {
  LeafValues v;
  for (const auto& [id, f] : funcs_) v.emplace(id, f[i]);
  return v;
}

std::string LexEmbedding::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "t";
  for (const auto& it : items_) os << "," << it.id;
  os << "\n";
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    os << grid_.point(i);
    for (const auto& it : items_) os << "," << funcs_.at(it.id)[i];
    os << "\n";
  }
  return os.str();
}

LexEmbedding generate_embedding(const Lexicon& lexicon, const SampleGrid& grid,
                                const EmbeddingGenerator& gen, std::uint64_t seed) {
  if (const auto* ff = std::get_if<FromFile>(&gen)) return load_embedding_csv(ff->path, lexicon);
  const auto& rf = std::get<RandomFourier>(gen);
  if (rf.modes < 1) throw Error("random-fourier generator needs at least one mode");
  if (!(rf.amplitude > 0.0)) throw Error("random-fourier amplitude must be positive");
  Rng rng(seed);
  std::map<std::string, FuncVec> funcs;
  const auto pts = grid.points();
  for (const auto& it : lexicon.items()) {
    std::vector<double> a(static_cast<std::size_t>(rf.modes) + 1), b(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double scale = rf.amplitude / static_cast<double>(std::max<std::size_t>(k, 1));
      a[k] = rng.uniform(-scale, scale);
      b[k] = rng.uniform(-scale, scale);
    }
    std::vector<double> s(grid.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double v = a[0];
      for (std::size_t k = 1; k < a.size(); ++k) {
        const double w = 2.0 * std::numbers::pi * static_cast<double>(k) * pts[i];
        v += a[k] * std::cos(w) + b[k] * std::sin(w);
      }
      s[i] = v;
    }
    funcs.emplace(it.id, FuncVec(grid, std::move(s)));
  }
  return LexEmbedding(grid, lexicon.items(), std::move(funcs), seed);
}

LexEmbedding parse_embedding_csv(const std::string& text, const Lexicon& lexicon, bool check_rank) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("embedding CSV is empty");
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string c;
    while (std::getline(ss, c, ',')) {
      c.erase(0, c.find_first_not_of(" \t\r"));
      c.erase(c.find_last_not_of(" \t\r") + 1);
      cells.push_back(c);
    }
    return cells;
  };
  auto header = split(line);
  if (header.size() < 2 || header[0] != "t") throw Error("embedding CSV header must be t,item1,...");
  std::vector<LexItem> items;
  for (std::size_t c = 1; c < header.size(); ++c) items.push_back(lexicon.at(header[c]));
  std::vector<std::vector<double>> cols(header.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split(line);
    if (cells.size() != header.size()) {
      throw Error("embedding CSV row " + std::to_string(row + 2) + " has " +
                  std::to_string(cells.size()) + " cells, expected " + std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      try {
        cols[c].push_back(std::stod(cells[c]));
      } catch (...) {
        throw Error("embedding CSV: bad number '" + cells[c] + "'");
      }
    }
    ++row;
  }
  SampleGrid grid(row);
  for (std::size_t i = 0; i < row; ++i) {
    if (std::abs(cols[0][i] - grid.point(i)) > 1e-9) {
      throw Error("embedding CSV: t column is not the uniform grid on [0,1]");
    }
  }
  std::map<std::string, FuncVec> funcs;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (!funcs.emplace(header[c], FuncVec(grid, cols[c])).second) {
      throw Error("embedding CSV: duplicate column '" + header[c] + "'");
    }
  }
  if (!check_rank) return make_unchecked_embedding(grid, std::move(items), std::move(funcs));
  return LexEmbedding(grid, std::move(items), std::move(funcs), 0);
}

LexEmbedding load_embedding_csv(const std::string& path, const Lexicon& lexicon, bool check_rank) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_embedding_csv(ss.str(), lexicon, check_rank);
}

// ---------------------------------------------------------------------------
// High-temperature regime

HighTempBound high_temp_beta(const LexEmbedding& e,
                             const std::optional<std::vector<std::string>>& subset) {
  std::vector<std::string> ids;
  if (subset) {
    ids = *subset;
  } else {
    for (const auto& it : e.items()) ids.push_back(it.id);
  }
  if (ids.empty()) throw Error("high_temp_beta: empty embedding");
  double m = 0.0;
  for (const auto& id : ids) m = std::max(m, e.at(id).sup_norm());
  if (!(m > 0.0)) throw Error("high_temp_beta: all functions vanish, no finite beta bound");
  return {m, 1.0 / m};
}

double max_pairwise_u(const LexEmbedding& e, double beta) {
  double m = 0.0;
  const auto& items = e.items();
  for (std::size_t a = 0; a < items.size(); ++a) {
    for (std::size_t b = a + 1; b < items.size(); ++b) {
      const auto& fa = e.at(items[a].id);
      const auto& fb = e.at(items[b].id);
      for (std::size_t i = 0; i < fa.samples.size(); ++i) {
        m = std::max(m, 0.5 * beta * std::abs(fa[i] - fb[i]));
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Tree embedding

FuncVec embed_tree(const SynTree& t, const ThermoParams& p, const LexEmbedding& e) {
  if (t.is_leaf()) return e.at(t.item().id);
  FuncVec a = embed_tree(t.child(0), p, e);
  FuncVec b = embed_tree(t.child(1), p, e);
  for (std::size_t i = 0; i < a.samples.size(); ++i) a.samples[i] = oplus(p, a[i], b[i]);
  return a;
}

std::map<NodeId, FuncVec> optimal_lambda_field(const SynTree& t, const ThermoParams& p,
                                               const LexEmbedding& e) {
  std::map<NodeId, FuncVec> out;
  const auto internal = t.internal_vertices();
  for (const auto& v : internal) out.emplace(v, FuncVec(e.grid(), std::vector<double>(e.grid().size())));
  for (std::size_t i = 0; i < e.grid().size(); ++i) {
    auto lam = argmin_lambda(t, p, e.values_at(i));
    for (const auto& [v, l] : lam.values) out.at(v).samples[i] = l;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Audits

namespace {

std::vector<std::vector<std::size_t>> combinations(std::size_t n, std::size_t k, std::size_t limit) {
  std::vector<std::vector<std::size_t>> out;
  if (k > n) return out;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    out.push_back(idx);
    if (limit != 0 && out.size() >= limit) break;
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

struct LabelSetResult {
  std::size_t shapes = 0;
  std::size_t pairs = 0;
  std::optional<double> min_gap;
  std::vector<AuditFailure> failures;
};

LabelSetResult audit_label_set(const LexEmbedding& e, const ThermoParams& p,
                               const std::vector<LexItem>& labels, double threshold) {
  LabelSetResult r;
  auto trees = enumerate_trees(labels);
  r.shapes = trees.size();
  std::vector<FuncVec> emb;
  emb.reserve(trees.size());
  for (const auto& t : trees) emb.push_back(embed_tree(t, p, e));
  std::vector<std::string> ids;
  for (const auto& l : labels) ids.push_back(l.id);
  for (std::size_t a = 0; a < trees.size(); ++a) {
    for (std::size_t b = a + 1; b < trees.size(); ++b) {
      const double g = sup_distance(emb[a], emb[b]);
      ++r.pairs;
      if (!r.min_gap || g < *r.min_gap) r.min_gap = g;
      if (!(g > threshold)) r.failures.push_back({ids, trees[a].to_string(), trees[b].to_string(), g});
    }
  }
  return r;
}

}  // namespace

bool AuditReport::passed() const {
  for (const auto& s : sizes) {
    if (!s.failures.empty()) return false;
  }
  return true;
}

std::optional<double> AuditReport::min_gap() const {
  std::optional<double> m;
  for (const auto& s : sizes) {
    if (s.min_gap && (!m || *s.min_gap < *m)) m = s.min_gap;
  }
  return m;
}

AuditReport injectivity_audit(const LexEmbedding& e, const ThermoParams& p, const AuditConfig& cfg) {
  if (cfg.n_max > 6) throw Error("injectivity_audit: n_max " + std::to_string(cfg.n_max) + " exceeds the cap of 6");
  AuditReport rep;
  rep.beta = p.beta;
  rep.threshold = cfg.threshold;
  try {
    rep.beta_bound = high_temp_beta(e).beta;
    rep.high_temperature = p.beta < rep.beta_bound;
  } catch (const Error&) {
    rep.beta_bound = std::numeric_limits<double>::infinity();
    rep.high_temperature = true;
  }
  if (!rep.high_temperature) {
    rep.warnings.push_back("beta is outside the global high-temperature regime (beta >= beta_L)");
  }
  const auto& items = e.items();
  const std::size_t n_top = std::min(cfg.n_max, items.size());
  for (std::size_t n = 1; n <= n_top; ++n) {
    AuditSizeReport sr;
    sr.n = n;
    auto sets = combinations(items.size(), n, cfg.max_label_sets);
    sr.label_sets = sets.size();
    std::vector<LabelSetResult> results(sets.size());
    auto work = [&](std::size_t begin, std::size_t step) {
      for (std::size_t s = begin; s < sets.size(); s += step) {
        std::vector<LexItem> labels;
        for (auto i : sets[s]) labels.push_back(items[i]);
        results[s] = audit_label_set(e, p, labels, cfg.threshold);
      }
    };
    const unsigned threads = std::max(1u, cfg.threads);
    if (threads == 1 || sets.size() < 2) {
      work(0, 1);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    }
    for (auto& r : results) {
      sr.shapes = r.shapes;
      sr.pairs += r.pairs;
      if (r.min_gap && (!sr.min_gap || *r.min_gap < *sr.min_gap)) sr.min_gap = r.min_gap;
      for (auto& f : r.failures) sr.failures.push_back(std::move(f));
    }
    rep.sizes.push_back(std::move(sr));
  }
  if (cfg.n_max > items.size()) {
    rep.warnings.push_back("n_max exceeds the lexicon size; larger sizes skipped");
  }
  return rep;
}

WallCrossingConfig WallCrossingConfig::from_lexicon(const std::vector<LexItem>& items) {
  if (items.size() < 5) throw Error("wall crossing check needs at least 5 lexical items");
  return {items[0].id, items[1].id, items[2].id, items[3].id, items[4].id};
}

WallCrossingReport wall_crossing_check(const LexEmbedding& e, const ThermoParams& p,
                                       const WallCrossingConfig& cfg) {
  auto leaf = [&](const std::string& id) {
    for (const auto& it : e.items()) {
      if (it.id == id) return SynTree::leaf(it);
    }
    throw Error("wall crossing: unknown item '" + id + "'");
  };
  const SynTree a = leaf(cfg.a), b = leaf(cfg.b), c = leaf(cfg.c), d = leaf(cfg.d), ee = leaf(cfg.e);
  const SynTree rest = merge(d, ee);
  const SynTree left = merge(merge(merge(a, b), c), rest);
  const SynTree right = merge(merge(a, merge(b, c)), rest);

  WallCrossingReport rep;
  rep.tree_left = left.to_string();
  rep.tree_right = right.to_string();
  rep.sup_gap = sup_distance(embed_tree(left, p, e), embed_tree(right, p, e));
  const auto& fa = e.at(cfg.a);
  const auto& fb = e.at(cfg.b);
  const auto& fc = e.at(cfg.c);
  std::size_t over = 0;
  for (std::size_t i = 0; i < fa.samples.size(); ++i) {
    const double lhs = oplus(p, oplus(p, fa[i], fb[i]), fc[i]);
    const double rhs = oplus(p, fa[i], oplus(p, fb[i], fc[i]));
    const double defect = std::abs(lhs - rhs);
    rep.max_defect = std::max(rep.max_defect, defect);
    if (defect > cfg.threshold) ++over;
  }
  rep.defect_fraction = static_cast<double>(over) / static_cast<double>(fa.samples.size());
  return rep;
}

std::string audit_report_json(const AuditReport& report, const std::optional<WallCrossingReport>& wall) {
  using nlohmann::json;
  json j;
  j["beta"] = report.beta;
  j["beta_bound"] = std::isfinite(report.beta_bound) ? json(report.beta_bound) : json(nullptr);
  j["high_temperature"] = report.high_temperature;
  j["threshold"] = report.threshold;
  j["passed"] = report.passed() && (!wall || wall->sup_gap > report.threshold);
  json sizes = json::array();
  for (const auto& s : report.sizes) {
    json fs = json::array();
    for (const auto& f : s.failures) {
      fs.push_back({{"labels", f.labels}, {"tree_a", f.tree_a}, {"tree_b", f.tree_b}, {"gap", f.gap}});
    }
    sizes.push_back({{"n", s.n},
                     {"label_sets", s.label_sets},
                     {"shapes", s.shapes},
                     {"pairs", s.pairs},
                     {"min_gap", s.min_gap ? json(*s.min_gap) : json(nullptr)},
                     {"failures", fs}});
  }
  j["sizes"] = sizes;
  j["warnings"] = report.warnings;
  if (wall) {
    j["wall_crossing"] = {{"tree_left", wall->tree_left},
                          {"tree_right", wall->tree_right},
                          {"sup_gap", wall->sup_gap},
                          {"max_defect", wall->max_defect},
                          {"defect_fraction", wall->defect_fraction}};
  }
  return j.dump(2);
}

}  // namespace thermomerge
