#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "thermomerge/embed.hpp"

using namespace thermomerge;

namespace {

const double kLog2 = std::log(2.0);

ThermoParams ry2(double beta) { return ThermoParams(InfoMeasure::renyi2(), beta); }

Lexicon lexicon(std::size_t n) {
  std::vector<LexItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    std::string id(1, static_cast<char>('a' + i));
    items.push_back({id, id});
  }
  return Lexicon(items);
}

FuncVec constant(const SampleGrid& g, double c) { return FuncVec(g, std::vector<double>(g.size(), c)); }

// Rank by Gram-Schmidt with re-orthogonalisation; independent of the SVD used
// by the library.
std::size_t gram_schmidt_rank(std::vector<std::vector<double>> rows, double rel_tol) {
  std::vector<std::vector<double>> basis;
  double scale = 0;
  for (const auto& r : rows)
    for (double v : r) scale = std::max(scale, std::abs(v));
  for (auto r : rows) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) {
        double d = 0;
        for (std::size_t i = 0; i < r.size(); ++i) d += r[i] * q[i];
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= d * q[i];
      }
    double n = 0;
    for (double v : r) n += v * v;
    n = std::sqrt(n);
    if (n > rel_tol * scale * std::sqrt(static_cast<double>(r.size()))) {
      for (double& v : r) v /= n;
      basis.push_back(r);
    }
  }
  return basis.size();
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("thermomerge_test_" + name)).string();
}

}  // namespace

TEST(Grid, Basics) {
  EXPECT_THROW(SampleGrid(1), Error);
  SampleGrid g(5);
  EXPECT_EQ(g.point(0), 0.0);
  EXPECT_EQ(g.point(4), 1.0);
  auto pts = g.points();
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_LT(pts[i - 1], pts[i]);
  EXPECT_THROW(FuncVec(g, {1.0, 2.0}), Error);
  EXPECT_THROW(sup_distance(constant(g, 0), constant(SampleGrid(6), 0)), Error);
  EXPECT_EQ(sup_distance(constant(g, 1), constant(g, -0.5)), 1.5);
}

TEST(Generate, RankAndDeterminism) {
  const SampleGrid g(256);
  auto e1 = generate_embedding(lexicon(4), g, RandomFourier{5, 1.0}, 42);
  auto e2 = generate_embedding(lexicon(4), g, RandomFourier{5, 1.0}, 42);
  std::vector<std::vector<double>> rows;
  for (const auto& it : e1.items()) {
    rows.push_back(e1.at(it.id).samples);
    EXPECT_EQ(e1.at(it.id).samples, e2.at(it.id).samples);
  }
  EXPECT_EQ(gram_schmidt_rank(rows, 1e-8), 4u);
  std::map<std::string, FuncVec> funcs;
  for (const auto& it : e1.items()) funcs.emplace(it.id, e1.at(it.id));
  EXPECT_EQ(embedding_rank(funcs), 4u);
  EXPECT_EQ(e1.seed(), 42u);

  auto e3 = generate_embedding(lexicon(4), g, RandomFourier{5, 1.0}, 43);
  EXPECT_NE(e1.at("a").samples, e3.at("a").samples);
}

TEST(Generate, SmoothAndBounded) {
  const SampleGrid g(512);
  auto e = generate_embedding(lexicon(3), g, RandomFourier{5, 1.0}, 7);
  // |a0| + sum_k (|a_k| + |b_k|) <= 1 + 2 sum_{k=1..5} 1/k
  double bound = 1.0;
  for (int k = 1; k <= 5; ++k) bound += 2.0 / k;
  for (const auto& it : e.items()) {
    const auto& f = e.at(it.id);
    EXPECT_LE(f.sup_norm(), bound);
    // derivative bounded by 2 pi sum_k k (|a_k| + |b_k|) <= 2 pi * 10
    for (std::size_t i = 1; i < g.size(); ++i) {
      EXPECT_LE(std::abs(f[i] - f[i - 1]) * static_cast<double>(g.size() - 1), 2 * M_PI * 10 + 1e-9);
    }
  }
}

TEST(Generate, ProportionalRowsFromFileRejected) {
  const SampleGrid g(16);
  std::ostringstream csv;
  csv.precision(17);
  csv << "t,a,b\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = std::sin(3 * g.point(i)) + 0.2;
    csv << g.point(i) << "," << v << "," << 2 * v << "\n";
  }
  const auto path = temp_path("prop.csv");
  std::ofstream(path) << csv.str();
  try {
    generate_embedding(lexicon(2), g, FromFile{path}, 0);
    FAIL() << "rank deficiency accepted";
  } catch (const Error& ex) {
    const std::string msg = ex.what();
    EXPECT_NE(msg.find("rank"), std::string::npos) << msg;
    EXPECT_NE(msg.find('b'), std::string::npos) << msg;
  }
  auto loose = load_embedding_csv(path, lexicon(2), false);
  EXPECT_EQ(loose.at("b")[3], 2 * loose.at("a")[3]);
  std::remove(path.c_str());
}

TEST(Csv, RoundTripAndErrors) {
  const SampleGrid g(64);
  auto e = generate_embedding(lexicon(3), g, RandomFourier{}, 5);
  auto back = parse_embedding_csv(e.to_csv(), lexicon(3));
  for (const auto& it : e.items()) EXPECT_EQ(back.at(it.id).samples, e.at(it.id).samples);

  EXPECT_THROW(parse_embedding_csv("", lexicon(2)), Error);
  EXPECT_THROW(parse_embedding_csv("x,a\n0,1\n1,2\n", lexicon(2)), Error);
  EXPECT_THROW(parse_embedding_csv("t,a,a\n0,1,2\n1,2,1\n", lexicon(2)), Error);
  EXPECT_THROW(parse_embedding_csv("t,a\n0,1\n0.7,2\n", lexicon(2)), Error);
  EXPECT_THROW(parse_embedding_csv("t,q\n0,1\n1,2\n", lexicon(2)), Error);
  EXPECT_THROW(parse_embedding_csv("t,a\n0,zz\n1,2\n", lexicon(2)), Error);
}

TEST(HighTemp, Bounds) {
  const SampleGrid g(8);
  auto zero = make_unchecked_embedding(g, lexicon(2).items(), {{"a", constant(g, 0)}, {"b", constant(g, 0)}});
  EXPECT_THROW(high_temp_beta(zero), Error);

  auto e = make_unchecked_embedding(g, lexicon(2).items(), {{"a", constant(g, 2.5)}, {"b", constant(g, -1)}});
  auto hb = high_temp_beta(e);
  EXPECT_EQ(hb.sup_bound, 2.5);
  EXPECT_EQ(hb.beta, 0.4);
  EXPECT_EQ(high_temp_beta(e, std::vector<std::string>{"b"}).beta, 1.0);
  EXPECT_THROW(high_temp_beta(e, std::vector<std::string>{}), Error);
}

TEST(HighTemp, BoundOnRandomEmbeddings) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const SampleGrid g(256);
    auto e = generate_embedding(lexicon(5), g, RandomFourier{}, seed);
    const double b = 0.9 * high_temp_beta(e).beta;
    double worst = 0;
    for (const auto& x : e.items())
      for (const auto& y : e.items())
        for (std::size_t i = 0; i < g.size(); ++i)
          worst = std::max(worst, std::abs(b / 2 * (e.at(x.id)[i] - e.at(y.id)[i])));
    EXPECT_LT(worst, 1.0);
    EXPECT_NEAR(max_pairwise_u(e, b), worst, 1e-15);
  }
}

TEST(EmbedTree, LeafAndConstants) {
  const SampleGrid g(32);
  auto e = generate_embedding(lexicon(3), g, RandomFourier{}, 3);
  EXPECT_EQ(embed_tree(SynTree::leaf(LexItem{"b", "b"}), ry2(0.5), e).samples, e.at("b").samples);

  auto z = make_unchecked_embedding(g, lexicon(2).items(), {{"a", constant(g, 0)}, {"b", constant(g, 0)}});
  for (double b : {0.3, 1.0}) {
    auto f = embed_tree(parse_tree("{a,b}"), ry2(b), z);
    for (double v : f.samples) EXPECT_NEAR(v, -kLog2 / b, 1e-14);
  }
  EXPECT_THROW(embed_tree(parse_tree("{a,q}"), ry2(1), e), Error);
}

TEST(EmbedTree, PointwiseHomomorphismExact) {
  const SampleGrid g(256);
  auto e = generate_embedding(lexicon(6), g, RandomFourier{}, 11);
  Rng rng(1);
  const auto p = ry2(0.5 * high_temp_beta(e).beta);
  auto items = e.items();
  for (int k = 0; k < 50; ++k) {
    const std::size_t cut = 1 + rng.below(5);
    std::vector<LexItem> a(items.begin(), items.begin() + static_cast<long>(cut));
    std::vector<LexItem> b(items.begin() + static_cast<long>(cut), items.end());
    auto ta = enumerate_trees(a);
    auto tb = enumerate_trees(b);
    const auto& t1 = ta[rng.below(ta.size())];
    const auto& t2 = tb[rng.below(tb.size())];
    auto f1 = embed_tree(t1, p, e), f2 = embed_tree(t2, p, e), f = embed_tree(merge(t1, t2), p, e);
    for (std::size_t i = 0; i < g.size(); ++i) ASSERT_EQ(f[i], oplus(p, f1[i], f2[i]));
    // and against a direct pointwise evaluation
    for (std::size_t i = 0; i < g.size(); i += 37) ASSERT_EQ(f[i], bracket_eval(merge(t1, t2), p, e.values_at(i)));
  }
}

TEST(EmbedTree, LambdaField) {
  const SampleGrid g(64);
  auto e = generate_embedding(lexicon(3), g, RandomFourier{}, 2);
  auto t = parse_tree("{a,{b,c}}");
  const auto p = ry2(0.4);
  auto field = optimal_lambda_field(t, p, e);
  ASSERT_EQ(field.size(), 2u);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto lam = argmin_lambda(t, p, e.values_at(i));
    for (const auto& [v, f] : field) EXPECT_EQ(f[i], lam.at(v));
  }
}

TEST(Audit, SmallSizesAndSeed42) {
  const SampleGrid g(256);
  auto e = generate_embedding(lexicon(4), g, RandomFourier{}, 42);
  const auto p = ry2(0.5 * high_temp_beta(e).beta);
  AuditConfig cfg;
  cfg.n_max = 3;
  auto r = injectivity_audit(e, p, cfg);
  ASSERT_EQ(r.sizes.size(), 3u);
  EXPECT_FALSE(r.sizes[1].min_gap.has_value());
  EXPECT_EQ(r.sizes[1].shapes, 1u);
  EXPECT_EQ(r.sizes[2].shapes, 3u);
  EXPECT_EQ(r.sizes[2].label_sets, 4u);
  EXPECT_EQ(r.sizes[2].pairs, 12u);
  ASSERT_TRUE(r.sizes[2].min_gap.has_value());
  EXPECT_GT(*r.sizes[2].min_gap, 0.0);
  EXPECT_TRUE(r.passed());
  EXPECT_TRUE(r.high_temperature);
  EXPECT_TRUE(r.warnings.empty());

  // the reported gap is the smallest sup distance among the three shapes
  double want = 1e300;
  for (const auto& set : {std::vector<std::string>{"a", "b", "c"}, {"a", "b", "d"}, {"a", "c", "d"}, {"b", "c", "d"}}) {
    std::vector<LexItem> ls;
    for (const auto& s : set) ls.push_back({s, s});
    auto ts = enumerate_trees(ls);
    for (std::size_t i = 0; i < ts.size(); ++i)
      for (std::size_t j = i + 1; j < ts.size(); ++j)
        want = std::min(want, sup_distance(embed_tree(ts[i], p, e), embed_tree(ts[j], p, e)));
  }
  EXPECT_EQ(*r.sizes[2].min_gap, want);

  cfg.n_max = 7;
  EXPECT_THROW(injectivity_audit(e, p, cfg), Error);
}

TEST(Audit, AdversarialDuplicates) {
  const SampleGrid g(64);
  FuncVec f(g, generate_embedding(lexicon(1), g, RandomFourier{}, 1).at("a").samples);
  auto e = make_unchecked_embedding(g, lexicon(3).items(), {{"a", f}, {"b", f}, {"c", f}});
  AuditConfig cfg;
  cfg.n_max = 3;
  auto r = injectivity_audit(e, ry2(0.1), cfg);
  EXPECT_FALSE(r.passed());
  ASSERT_TRUE(r.min_gap().has_value());
  EXPECT_EQ(*r.min_gap(), 0.0);
  EXPECT_EQ(r.sizes[2].failures.size(), 3u);
  EXPECT_NE(audit_report_json(r).find("\"passed\": false"), std::string::npos);
}

TEST(Audit, WarnsOutsideHighTemperature) {
  const SampleGrid g(32);
  auto e = generate_embedding(lexicon(3), g, RandomFourier{}, 4);
  AuditConfig cfg;
  cfg.n_max = 2;
  auto r = injectivity_audit(e, ry2(2 * high_temp_beta(e).beta), cfg);
  EXPECT_FALSE(r.high_temperature);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Audit, DeterministicAcrossRunsAndThreads) {
  const SampleGrid g(128);
  auto e = generate_embedding(lexicon(5), g, RandomFourier{}, 42);
  const auto p = ry2(0.5 * high_temp_beta(e).beta);
  AuditConfig cfg;
  cfg.n_max = 4;
  auto wc = WallCrossingConfig::from_lexicon(e.items());
  const auto j1 = audit_report_json(injectivity_audit(e, p, cfg), wall_crossing_check(e, p, wc));
  cfg.threads = 4;
  const auto j2 = audit_report_json(injectivity_audit(e, p, cfg), wall_crossing_check(e, p, wc));
  auto e2 = generate_embedding(lexicon(5), g, RandomFourier{}, 42);
  cfg.threads = 1;
  const auto j3 = audit_report_json(injectivity_audit(e2, p, cfg), wall_crossing_check(e2, p, wc));
  EXPECT_EQ(j1, j2);
  EXPECT_EQ(j1, j3);
}

TEST(Audit, GenericSeedsSeparate) {
  int pass = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto e = generate_embedding(lexicon(4), SampleGrid(256), RandomFourier{}, seed);
    AuditConfig cfg;
    auto r = injectivity_audit(e, ry2(0.5 * high_temp_beta(e).beta), cfg);
    if (r.passed() && r.min_gap() && *r.min_gap() > 1e-9) ++pass;
  }
  EXPECT_GE(pass, 19);
}

TEST(WallCrossing, ShannonVersusRy2) {
  const SampleGrid g(256);
  auto e = generate_embedding(lexicon(5), g, RandomFourier{}, 42);
  const double b = 0.5 * high_temp_beta(e).beta;
  auto wc = WallCrossingConfig::from_lexicon(e.items());
  auto sh = wall_crossing_check(e, ThermoParams(InfoMeasure::shannon(), b), wc);
  EXPECT_LE(sh.sup_gap, 1e-8);
  EXPECT_LE(sh.max_defect, 1e-8);
  auto ry = wall_crossing_check(e, ry2(b), wc);
  EXPECT_GT(ry.sup_gap, 1e-6);
  EXPECT_GT(ry.defect_fraction, 0.5);
  EXPECT_EQ(ry.tree_left, parse_tree("{{{a,b},c},{d,e}}").to_string());
  EXPECT_EQ(ry.tree_right, parse_tree("{{a,{b,c}},{d,e}}").to_string());
  EXPECT_THROW(WallCrossingConfig::from_lexicon(lexicon(4).items()), Error);
}

TEST(WallCrossing, EqualConstantInputs) {
  const SampleGrid g(16);
  const auto lex = lexicon(5);
  std::map<std::string, FuncVec> funcs;
  for (const auto& it : lex.items()) funcs.emplace(it.id, constant(g, 0.3));
  auto e = make_unchecked_embedding(g, lex.items(), funcs);
  auto r = wall_crossing_check(e, ry2(1), WallCrossingConfig::from_lexicon(e.items()));
  EXPECT_EQ(r.max_defect, 0.0);
  EXPECT_EQ(r.defect_fraction, 0.0);
}

TEST(Rng, Reproducible) {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  std::mt19937_64 ref(5);
  Rng c(5);
  EXPECT_EQ(c.next(), ref());
}
