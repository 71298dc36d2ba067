#include "commands.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "thermomerge/embed.hpp"
#include "thermomerge/semiring.hpp"
#include "thermomerge/syntax.hpp"
#include "thermomerge/tree_eval.hpp"
#include "thermomerge/wave.hpp"
#include "thermomerge/workspace.hpp"

#ifndef THERMOMERGE_DATA_DIR
#define THERMOMERGE_DATA_DIR "data"
#endif

namespace thermomerge::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// Bad arguments detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path.string() + "'");
  out << text;
}

fs::path resolve_out(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("THERMOMERGE_OUT"); env != nullptr && *env != '\0') return env;
  return "thermomerge_out";
}

// Evenly spaced values with exact endpoints and an exact midpoint.
std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(n - 1);
    out[static_cast<std::size_t>(i)] = lo * (1.0 - f) + hi * f;
  }
  return out;
}

Lexicon numbered_lexicon(int n) {
  if (n < 1) throw UsageError("--items must be at least 1");
  std::vector<LexItem> items;
  for (int i = 1; i <= n; ++i) items.push_back({"w" + std::to_string(i), "w" + std::to_string(i)});
  return Lexicon(items);
}

ojson wave_json(const Wave& w) {
  return {{"A", w.amplitude}, {"nu", to_string(w.frequency)}, {"omega", w.phase}};
}

ojson sync_node_json(const SyncNode& n) {
  ojson j{{"ref_frequency", to_string(n.ref_frequency)}, {"phase", n.phase}};
  if (!n.children.empty()) {
    j["beta"] = n.beta;
    j["multipliers"] = {n.m1, n.m2};
    j["children"] = {sync_node_json(n.children[0]), sync_node_json(n.children[1])};
  }
  return j;
}

BetaAssignment parse_betas(const std::string& text, const SynTree& t) {
  BetaAssignment out;
  if (text.empty()) return out;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("--betas: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw UsageError("--betas: expected an object {\"root\": b, \"0\": b, ...}");
  for (const auto& [k, v] : j.items()) {
    NodeId id{k == "root" ? "" : k};
    if (!t.contains(id) || t.subtree(id).is_leaf()) throw UsageError("--betas: '" + k + "' is not an internal vertex");
    out[id] = v.get<double>();
  }
  return out;
}

// Distinct default betas beta/(k+1) in preorder, overridden per vertex.
BetaAssignment default_betas(const SynTree& t, double beta, const BetaAssignment& overrides) {
  BetaAssignment out;
  double k = 1.0;
  for (const auto& v : t.internal_vertices()) {
    out[v] = beta / k;
    k += 1.0;
  }
  for (const auto& [v, b] : overrides) out[v] = b;
  return out;
}

struct LeafCheck {
  double max_error = 0.0;
  ojson detail = ojson::object();
};

// Compares recovered leaf phases with the truth; for ambiguous sibling pairs
// the better of the two assignments counts.
LeafCheck check_leaves(const SynTree& t, const LexWaves& waves, const MultiBetaResult& r) {
  LeafCheck c;
  auto truth = [&](const NodeId& v) { return waves.at(t.subtree(v).item().id).phase; };
  for (const auto& v : t.leaf_vertices()) {
    if (v.is_root()) continue;
    const NodeId parent{v.path.substr(0, v.path.size() - 1)};
    double err = std::abs(r.phases.at(v) - truth(v));
    auto alt = r.alternative.find(parent);
    if (alt != r.alternative.end()) {
      const double a0 = std::abs(alt->second.first - truth(parent.child(0)));
      const double a1 = std::abs(alt->second.second - truth(parent.child(1)));
      const double p0 = std::abs(r.phases.at(parent.child(0)) - truth(parent.child(0)));
      const double p1 = std::abs(r.phases.at(parent.child(1)) - truth(parent.child(1)));
      const bool use_alt = std::max(a0, a1) < std::max(p0, p1);
      if (use_alt) err = v.path.back() == '0' ? a0 : a1;
    }
    c.max_error = std::max(c.max_error, err);
    c.detail[t.subtree(v).item().id] = {{"recovered", r.phases.at(v)}, {"true", truth(v)}, {"error", err}};
  }
  return c;
}

ojson phases_json(const SynTree& t, const MultiBetaResult& r) {
  ojson j = ojson::object();
  for (const auto& [v, x] : r.phases) {
    j[v.is_root() ? std::string("root") : v.path] = {{"subtree", t.subtree(v).to_string()}, {"phase", x}};
  }
  ojson amb = ojson::array();
  for (const auto& v : r.ambiguous) {
    const auto& a = r.alternative.at(v);
    amb.push_back({{"vertex", to_string(v)}, {"alternative", {a.first, a.second}}});
  }
  return {{"phases", j}, {"ambiguous", amb}};
}

struct Stage {
  std::string name;
  bool passed;
  std::string note;
};

// ---------------------------------------------------------------------------

struct Options {
  std::string out_dir;
  double beta = 1.0;
  std::string measure = "renyi2";
  std::uint64_t seed = 42;
  unsigned threads = 1;

  // semiring
  double u_min = -1.5, u_max = 1.5;
  int u_points = 301;
  std::optional<double> x_min, x_max;
  int x_points = 401;

  // trees and workspaces
  std::string tree;
  std::string xs;
  std::string xs_file;
  std::string labels;
  int n = 0;
  int cap = static_cast<int>(kDefaultEnumerationCap);
  std::string workspace;
  bool no_leaves = false;
  bool only_pi2 = false;
  int steps = 3;

  // embeddings and audits
  std::string lexicon;
  int items = 5;
  int samples = 256;
  int modes = 5;
  double amplitude = 1.0;
  std::string embedding;
  int n_max = 4;
  int max_label_sets = 0;
  std::optional<double> audit_beta;
  double threshold = 1e-9;
  bool no_wall = false;

  // waves
  std::string t1, t2;
  std::string signal;
  double duration = 4.0;
  int wave_samples = 4096;
  double window_center = 0.0;
  std::string observations;
  std::string betas;
  double tol = 1e-3;
};

ThermoParams params(const Options& o) {
  if (!(o.beta > 0.0) || !std::isfinite(o.beta)) throw UsageError("--beta must be positive");
  try {
    return ThermoParams(InfoMeasure::parse(o.measure), o.beta);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

ojson base_config(const std::string& cmd, const Options& o) {
  return {{"command", cmd}, {"beta", o.beta}, {"measure", o.measure}, {"seed", o.seed}};
}

// ---------------------------------------------------------------------------
// Commands

int cmd_semiring(const Options& o, std::ostream& out) {
  const ThermoParams p = params(o);
  if (o.u_points < 2 || o.x_points < 2) throw UsageError("--u-points and --x-points need at least 2");
  if (!(o.u_min < o.u_max)) throw UsageError("--u-min must be below --u-max");
  const double x_min = o.x_min.value_or(-4.0 / p.beta);
  const double x_max = o.x_max.value_or(4.0 / p.beta);
  if (!(x_min < x_max)) throw UsageError("--x-min must be below --x-max");
  const fs::path dir = resolve_out(o.out_dir);

  std::ostringstream lam;
  lam.precision(17);
  lam << "u,lambda_min\n";
  for (double u : linspace(o.u_min, o.u_max, o.u_points)) {
    lam << u << "," << lambda_min_ry2(0.0, 2.0 * u / p.beta, p.beta) << "\n";
  }
  std::ostringstream ups;
  ups.precision(17);
  ups << "x,upsilon,branch\n";
  for (double x : linspace(x_min, x_max, o.x_points)) {
    const double u = p.beta * x / 2.0;
    const char* branch = u <= -1.0 ? "identity" : (u >= 1.0 ? "zero" : "interior");
    ups << x << "," << successor(p, x) << "," << branch << "\n";
  }
  write_file(dir / "lambda_min.csv", lam.str());
  write_file(dir / "upsilon.csv", ups.str());
  ojson cfg = base_config("semiring", o);
  cfg["u_range"] = {o.u_min, o.u_max, o.u_points};
  cfg["x_range"] = {x_min, x_max, o.x_points};
  write_file(dir / "semiring.config.json", cfg.dump(2) + "\n");
  ojson res{{"lambda_min_csv", (dir / "lambda_min.csv").string()},
            {"upsilon_csv", (dir / "upsilon.csv").string()},
            {"upsilon_at_zero", successor(p, 0.0)}};
  out << res.dump(2) << "\n";
  return kOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const ThermoParams p = params(o);
  if (o.tree.empty()) throw UsageError("--tree is required");
  const SynTree t = parse_tree(o.tree);
  const std::string xs_text = !o.xs_file.empty() ? read_file(o.xs_file) : o.xs;
  if (xs_text.empty()) throw UsageError("--xs or --xs-file is required");
  LeafValues xs;
  try {
    auto j = nlohmann::json::parse(xs_text);
    for (const auto& [k, v] : j.items()) xs[k] = v.get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("--xs: ") + e.what());
  }
  const double value = bracket_eval(t, p, xs);
  const auto lam = argmin_lambda(t, p, xs);
  const auto a = coeffs(t, HeadMarking::first_child(t), lam);
  const double s_t = tree_entropy(t, p.measure, a);
  const double via_lambda = bracket_eval_lambda(t, p, xs, lam);
  ojson lj = ojson::object();
  for (const auto& [v, l] : lam.values) lj[to_string(v)] = l;
  ojson aj = ojson::object();
  for (const auto& [id, x] : a.probs) aj[id] = x;
  ojson cfg = base_config("eval", o);
  cfg["tree"] = o.tree;
  cfg["xs"] = ojson::parse(xs_text);
  ojson res{{"config", cfg},
            {"tree", t.to_string()},
            {"value", value},
            {"value_at_optimal_lambda", via_lambda},
            {"optimal_lambda", lj},
            {"leaf_distribution", aj},
            {"tree_entropy", s_t}};
  out << res.dump(2) << "\n";
  return std::abs(via_lambda - value) <= 1e-9 * std::max(1.0, std::abs(value)) ? kOk : kCheckFailed;
}

int cmd_gen_trees(const Options& o, std::ostream& out) {
  std::vector<LexItem> labels;
  if (!o.labels.empty()) {
    std::stringstream ss(o.labels);
    std::string id;
    while (std::getline(ss, id, ',')) labels.push_back({id, id});
  } else if (o.n > 0) {
    labels = numbered_lexicon(o.n).items();
  } else {
    throw UsageError("give --labels or --n");
  }
  auto trees = enumerate_trees(labels, static_cast<std::size_t>(o.cap));
  const auto expected = count_binary_trees(labels.size());
  ojson tj = ojson::array();
  for (const auto& t : trees) tj.push_back(t.to_string());
  ojson ids = ojson::array();
  for (const auto& l : labels) ids.push_back(l.id);
  ojson cfg{{"command", "gen-trees"}, {"labels", ids}, {"cap", o.cap}};
  ojson res{{"config", cfg}, {"count", trees.size()}, {"expected", expected}, {"trees", tj}};
  out << res.dump(2) << "\n";
  return trees.size() == expected ? kOk : kCheckFailed;
}

Lexicon load_or_number(const Options& o) {
  return o.lexicon.empty() ? numbered_lexicon(o.items) : Lexicon::from_json_text(read_file(o.lexicon));
}

int cmd_embed(const Options& o, std::ostream& out) {
  if (o.samples < 2) throw UsageError("--samples needs at least 2");
  const Lexicon lex = load_or_number(o);
  const SampleGrid grid(static_cast<std::size_t>(o.samples));
  auto e = generate_embedding(lex, grid, RandomFourier{o.modes, o.amplitude}, o.seed);
  const fs::path dir = resolve_out(o.out_dir);
  write_file(dir / "embedding.csv", e.to_csv());
  ojson cfg = base_config("embed", o);
  cfg["lexicon"] = o.lexicon.empty() ? ojson(o.items) : ojson(o.lexicon);
  cfg["samples"] = o.samples;
  cfg["generator"] = {{"kind", "random-fourier"}, {"modes", o.modes}, {"amplitude", o.amplitude}};
  write_file(dir / "embed.config.json", cfg.dump(2) + "\n");
  const auto hb = high_temp_beta(e);
  std::map<std::string, FuncVec> funcs;
  for (const auto& it : e.items()) funcs.emplace(it.id, e.at(it.id));
  ojson res{{"embedding_csv", (dir / "embedding.csv").string()},
            {"items", e.items().size()},
            {"samples", grid.size()},
            {"rank", embedding_rank(funcs)},
            {"sup_bound", hb.sup_bound},
            {"beta_L", hb.beta}};
  out << res.dump(2) << "\n";
  return kOk;
}

int cmd_audit(const Options& o, std::ostream& out) {
  if (o.samples < 2) throw UsageError("--samples needs at least 2");
  if (o.n_max < 1) throw UsageError("--n-max must be at least 1");
  const Lexicon lex = load_or_number(o);
  const SampleGrid grid(static_cast<std::size_t>(o.samples));
  const LexEmbedding e = o.embedding.empty()
                             ? generate_embedding(lex, grid, RandomFourier{o.modes, o.amplitude}, o.seed)
                             : load_embedding_csv(o.embedding, lex, false);
  double beta = 0.0;
  if (o.audit_beta) {
    beta = *o.audit_beta;
  } else {
    try {
      beta = 0.5 * high_temp_beta(e).beta;
    } catch (const Error&) {
      beta = 1.0;
    }
  }
  const ThermoParams p(InfoMeasure::parse(o.measure), beta);
  AuditConfig ac;
  ac.n_max = static_cast<std::size_t>(o.n_max);
  ac.max_label_sets = static_cast<std::size_t>(o.max_label_sets);
  ac.threshold = o.threshold;
  ac.threads = o.threads;
  AuditReport rep = injectivity_audit(e, p, ac);
  std::map<std::string, FuncVec> funcs;
  for (const auto& it : e.items()) funcs.emplace(it.id, e.at(it.id));
  const auto rank = embedding_rank(funcs);
  if (rank < funcs.size()) {
    rep.warnings.push_back("embedding has rank " + std::to_string(rank) + " < " + std::to_string(funcs.size()));
  }
  std::optional<WallCrossingReport> wall;
  if (!o.no_wall) {
    if (e.items().size() >= 5) {
      auto wc = WallCrossingConfig::from_lexicon(e.items());
      wc.threshold = o.threshold;
      wall = wall_crossing_check(e, p, wc);
    } else {
      rep.warnings.push_back("wall crossing check skipped: needs 5 items");
    }
  }
  const std::string report = audit_report_json(rep, wall);
  const fs::path dir = resolve_out(o.out_dir);
  write_file(dir / "audit.json", report + "\n");
  ojson cfg = base_config("audit", o);
  cfg["beta"] = beta;
  cfg["lexicon"] = o.lexicon.empty() ? ojson(o.items) : ojson(o.lexicon);
  cfg["embedding"] = o.embedding.empty() ? ojson({{"kind", "random-fourier"}, {"modes", o.modes},
                                                   {"amplitude", o.amplitude}})
                                         : ojson(o.embedding);
  cfg["samples"] = o.samples;
  cfg["n_max"] = o.n_max;
  cfg["max_label_sets"] = o.max_label_sets;
  cfg["threshold"] = o.threshold;
  cfg["wall_crossing"] = !o.no_wall;
  write_file(dir / "audit.config.json", cfg.dump(2) + "\n");
  out << report << "\n";
  const bool ok = rep.passed() && (!wall || wall->sup_gap > o.threshold);
  return ok ? kOk : kCheckFailed;
}

Workspace need_workspace(const Options& o) {
  if (o.workspace.empty()) throw UsageError("--workspace is required");
  return parse_workspace(o.workspace);
}

int cmd_coproduct(const Options& o, std::ostream& out) {
  const Workspace f = need_workspace(o);
  CoproductOptions opt;
  opt.leaves_accessible = !o.no_leaves;
  auto terms = coproduct(f, opt);
  if (o.only_pi2) terms = pi2(terms);
  ojson tj = ojson::array();
  for (const auto& t : terms) tj.push_back({{"left", t.left.to_string()}, {"right", t.right.to_string()}});
  ojson cfg{{"command", "coproduct"}, {"workspace", f.to_string()}, {"leaves_accessible", opt.leaves_accessible},
            {"pi2", o.only_pi2}};
  ojson res{{"config", cfg}, {"count", terms.size()}, {"terms", tj}};
  out << res.dump(2) << "\n";
  return kOk;
}

int cmd_markov(const Options& o, std::ostream& out) {
  const Workspace f = need_workspace(o);
  if (o.steps < 0) throw UsageError("--steps must be nonnegative");
  CoproductOptions opt;
  opt.leaves_accessible = !o.no_leaves;
  auto tr = markov_sample(f, o.seed, static_cast<std::size_t>(o.steps), {}, opt);
  ojson states = ojson::array();
  for (std::size_t i = 1; i < tr.states.size(); ++i) states.push_back(tr.states[i].to_string());
  ojson cfg{{"command", "markov"}, {"workspace", f.to_string()}, {"steps", o.steps}, {"seed", o.seed},
            {"leaves_accessible", opt.leaves_accessible}, {"weighting", "uniform"}};
  ojson res{{"config", cfg}, {"start", f.to_string()}, {"trajectory", states}, {"dead_end", tr.dead_end}};
  out << res.dump(2) << "\n";
  return kOk;
}

struct WaveInputs {
  Lexicon lexicon;
  LexWaves waves;
};

WaveInputs load_waves(const std::string& path) {
  if (path.empty()) throw UsageError("--lexicon is required");
  const std::string text = read_file(path);
  return {Lexicon::from_json_text(text), lexicon_waves_from_json_text(text)};
}

std::vector<double> read_signal(const std::string& path, const TimeGrid& grid) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw UsageError("signal CSV: expected t,value rows");
    out.push_back(std::stod(line.substr(comma + 1)));
  }
  if (out.size() != grid.samples) {
    throw UsageError("signal CSV has " + std::to_string(out.size()) + " rows; --samples is " +
                     std::to_string(grid.samples));
  }
  return out;
}

int cmd_wave_merge(const Options& o, std::ostream& out) {
  const ThermoParams p = params(o);
  const auto in = load_waves(o.lexicon);
  const Workspace f = parse_workspace(o.workspace, &in.lexicon);
  if (o.t1.empty() || o.t2.empty()) throw UsageError("--t1 and --t2 are required");
  const SynTree t1 = parse_tree(o.t1, &in.lexicon);
  const SynTree t2 = parse_tree(o.t2, &in.lexicon);
  if (o.wave_samples < 2) throw UsageError("--samples needs at least 2");
  const TimeGrid grid{o.duration, static_cast<std::size_t>(o.wave_samples)};
  PhaseRecoveryConfig pc;
  pc.window_center = o.window_center;
  const auto before = o.signal.empty() ? workspace_wave(workspace_representatives(f, in.waves, p), grid)
                                       : read_signal(o.signal, grid);
  const auto res = wave_merge_operator(f, t1, t2, p, in.waves, before, grid, pc);
  const fs::path dir = resolve_out(o.out_dir);
  write_file(dir / "signal_in.csv", signal_to_csv(before, grid));
  write_file(dir / "signal_out.csv", signal_to_csv(res.signal, grid));

  ojson j{{"merged", res.merged}, {"workspace_in", f.to_string()}, {"workspace_out", res.workspace.to_string()}};
  j["recovered_phases"] = res.recovered_phases;
  ojson reps = ojson::array();
  for (const auto& w : res.representatives) reps.push_back(wave_json(w));
  j["representatives"] = reps;
  bool ok = true;
  if (res.merged) {
    const auto sym = sync_tree(merge(t1, t2), in.waves, p);
    const double diff = std::abs(res.merged_phase - sym.root.phase);
    j["merged_phase"] = res.merged_phase;
    j["symbolic_phase"] = sym.root.phase;
    j["diagram_difference"] = diff;
    j["packet"] = ojson::parse(packet_to_json(sym.packet));
    ok = diff <= 1e-3;
  }
  ojson cfg = base_config("wave-merge", o);
  cfg["lexicon"] = o.lexicon;
  cfg["workspace"] = f.to_string();
  cfg["t1"] = t1.to_string();
  cfg["t2"] = t2.to_string();
  cfg["duration"] = o.duration;
  cfg["samples"] = o.wave_samples;
  cfg["window_center"] = o.window_center;
  cfg["signal"] = o.signal.empty() ? ojson("synthesised") : ojson(o.signal);
  write_file(dir / "wave_merge.json", j.dump(2) + "\n");
  write_file(dir / "wave_merge.config.json", cfg.dump(2) + "\n");
  out << j.dump(2) << "\n";
  return ok ? kOk : kCheckFailed;
}

int cmd_wave_extract(const Options& o, std::ostream& out) {
  ExtractConfig ec;
  ec.tol = o.tol;
  if (!o.observations.empty()) {
    std::istringstream in(read_file(o.observations));
    std::string line;
    std::getline(in, line);
    std::map<double, double> obs;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw UsageError("observations CSV: expected beta,omega rows");
      obs[std::stod(line.substr(0, comma))] = std::stod(line.substr(comma + 1));
    }
    ec.betas.clear();
    for (const auto& [b, w] : obs) ec.betas.push_back(b);
    ec.max_rescales = 0;
    auto pe = extract_pair([&](double b) { return obs.at(b); }, ec);
    ojson cfg{{"command", "wave-extract"}, {"observations", o.observations}, {"tol", o.tol}};
    ojson res{{"config", cfg}, {"lo", pe.lo}, {"hi", pe.hi}, {"midpoint", pe.midpoint}, {"residual", pe.residual}};
    out << res.dump(2) << "\n";
    return kOk;
  }
  const ThermoParams p = params(o);
  const auto in = load_waves(o.lexicon);
  if (o.tree.empty()) throw UsageError("--tree or --observations is required");
  const SynTree t = parse_tree(o.tree, &in.lexicon);
  const BetaAssignment base = default_betas(t, p.beta, parse_betas(o.betas, t));
  std::map<std::string, Rational> freqs;
  for (const auto& [id, w] : in.waves) freqs[id] = w.frequency;
  auto r = multibeta_extract(t, freqs, base, [&](const BetaAssignment& b) { return sync_tree(t, in.waves, p, b).root.phase; }, ec);
  auto check = check_leaves(t, in.waves, r);
  ojson bj = ojson::object();
  for (const auto& [v, b] : base) bj[to_string(v)] = b;
  ojson cfg = base_config("wave-extract", o);
  cfg["lexicon"] = o.lexicon;
  cfg["tree"] = t.to_string();
  cfg["betas"] = bj;
  cfg["sweep"] = ec.betas;
  cfg["tol"] = o.tol;
  ojson res = phases_json(t, r);
  res["config"] = cfg;
  res["leaves"] = check.detail;
  res["max_leaf_error"] = check.max_error;
  out << res.dump(2) << "\n";
  return check.max_error <= o.tol ? kOk : kCheckFailed;
}

int cmd_pipeline(const Options& o, std::ostream& out) {
  const ThermoParams p = params(o);
  const std::string path = o.lexicon.empty() ? default_data_dir() + "/demo_lexicon.json" : o.lexicon;
  if (!fs::exists(path)) throw UsageError("lexicon file not found: " + path);
  const auto in = load_waves(path);
  const auto& items = in.lexicon.items();
  if (items.size() < 3) throw UsageError("pipeline needs at least 3 lexical items");
  auto leaf = [&](std::size_t i) { return SynTree::leaf(items[i]); };

  std::vector<Stage> stages;
  ojson report;
  auto run_stage = [&](const std::string& name, auto&& body) {
    try {
      auto [ok, note] = body();
      stages.push_back({name, ok, note});
    } catch (const std::exception& e) {
      stages.push_back({name, false, e.what()});
    }
  };

  // Structure used for synchronisation and multi-beta extraction.
  const SynTree t = items.size() >= 4 ? merge(merge(leaf(0), leaf(1)), merge(leaf(2), leaf(3)))
                                      : merge(leaf(0), merge(leaf(1), leaf(2)));
  const BetaAssignment base = default_betas(t, p.beta, {});

  run_stage("sync", [&]() -> std::pair<bool, std::string> {
    auto s = sync_tree(t, in.waves, p, base);
    bool coherent = true;
    auto walk = [&](auto&& self, const SyncNode& n) -> void {
      if (n.children.empty()) return;
      coherent = coherent && n.children[0].ref_frequency * n.m1 == n.children[1].ref_frequency * n.m2;
      self(self, n.children[0]);
      self(self, n.children[1]);
    };
    walk(walk, s.root);
    report["sync"] = {{"tree", t.to_string()}, {"root", sync_node_json(s.root)}};
    return {coherent, "root phase " + std::to_string(s.root.phase)};
  });

  run_stage("extract", [&]() -> std::pair<bool, std::string> {
    std::map<std::string, Rational> freqs;
    for (const auto& [id, w] : in.waves) freqs[id] = w.frequency;
    ExtractConfig ec;
    ec.tol = o.tol;
    auto r = multibeta_extract(t, freqs, base, [&](const BetaAssignment& b) { return sync_tree(t, in.waves, p, b).root.phase; }, ec);
    auto c = check_leaves(t, in.waves, r);
    report["extract"] = phases_json(t, r);
    report["extract"]["leaves"] = c.detail;
    return {c.max_error <= o.tol, "max leaf error " + std::to_string(c.max_error)};
  });

  const Workspace f({leaf(0), leaf(1), leaf(2)});
  const TimeGrid grid{o.duration, static_cast<std::size_t>(o.wave_samples)};
  PhaseRecoveryConfig pc;
  pc.window_center = o.window_center;
  std::vector<double> product;
  run_stage("product", [&]() -> std::pair<bool, std::string> {
    product = workspace_wave(workspace_representatives(f, in.waves, p), grid);
    return {product.size() == grid.samples, "workspace " + f.to_string()};
  });

  run_stage("fft", [&]() -> std::pair<bool, std::string> {
    auto reps = workspace_representatives(f, in.waves, p);
    std::vector<Rational> freqs;
    for (const auto& w : reps) freqs.push_back(w.frequency);
    auto ph = fft_phase_recovery(product, grid, freqs, pc);
    double err = 0.0;
    for (std::size_t i = 0; i < ph.size(); ++i) err = std::max(err, std::abs(ph[i] - reps[i].phase));
    report["fft"] = {{"recovered", ph}, {"max_error", err}};
    return {err <= o.tol, "max phase error " + std::to_string(err)};
  });

  run_stage("diagram", [&]() -> std::pair<bool, std::string> {
    auto res = wave_merge_operator(f, leaf(0), leaf(1), p, in.waves, product, grid, pc);
    const auto sym = sync_tree(merge(leaf(0), leaf(1)), in.waves, p);
    const double diff = std::abs(res.merged_phase - sym.root.phase);
    // The re-synthesised product must carry the symbolic phases as well.
    std::vector<Rational> freqs;
    for (const auto& w : res.representatives) freqs.push_back(w.frequency);
    auto again = fft_phase_recovery(res.signal, grid, freqs, pc);
    auto sym_reps = workspace_representatives(res.workspace, in.waves, p);
    double err = 0.0;
    for (std::size_t i = 0; i < again.size(); ++i) err = std::max(err, std::abs(again[i] - sym_reps[i].phase));
    report["diagram"] = {{"workspace_out", res.workspace.to_string()},
                         {"merged_phase", res.merged_phase},
                         {"symbolic_phase", sym.root.phase},
                         {"difference", diff},
                         {"resynthesised_error", err}};
    return {res.merged && diff <= 1e-3 && err <= 1e-3, "phase difference " + std::to_string(diff)};
  });

  run_stage("markov", [&]() -> std::pair<bool, std::string> {
    std::vector<SynTree> comps;
    for (std::size_t i = 0; i < items.size(); ++i) comps.push_back(leaf(i));
    auto tr = markov_sample(Workspace(comps), o.seed, static_cast<std::size_t>(std::max(0, o.steps)));
    ojson st = ojson::array();
    for (std::size_t i = 1; i < tr.states.size(); ++i) st.push_back(tr.states[i].to_string());
    report["markov"] = {{"start", Workspace(comps).to_string()}, {"trajectory", st}, {"dead_end", tr.dead_end}};
    return {tr.states.size() == static_cast<std::size_t>(o.steps) + 1 || tr.dead_end,
            std::to_string(tr.states.size() - 1) + " steps"};
  });

  bool all = true;
  ojson sj = ojson::array();
  for (const auto& s : stages) {
    out << s.name << ": " << (s.passed ? "PASS" : "FAIL") << " (" << s.note << ")\n";
    sj.push_back({{"stage", s.name}, {"passed", s.passed}, {"note", s.note}});
    all = all && s.passed;
  }
  if (report.contains("markov")) {
    for (const auto& w : report["markov"]["trajectory"]) out << "  " << w.get<std::string>() << "\n";
  }
  report["stages"] = sj;
  const fs::path dir = resolve_out(o.out_dir);
  ojson cfg = base_config("pipeline", o);
  cfg["lexicon"] = path;
  cfg["steps"] = o.steps;
  cfg["duration"] = o.duration;
  cfg["samples"] = o.wave_samples;
  cfg["window_center"] = o.window_center;
  cfg["tol"] = o.tol;
  write_file(dir / "pipeline.json", report.dump(2) + "\n");
  write_file(dir / "pipeline.config.json", cfg.dump(2) + "\n");
  return all ? kOk : kCheckFailed;
}

}  // namespace

std::string default_data_dir() { return THERMOMERGE_DATA_DIR; }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Thermodynamic semirings, syntax trees and Merge as phase synchronisation"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* s) {
    s->add_option("--out", o.out_dir, "Output directory (default $THERMOMERGE_OUT or ./thermomerge_out)");
    s->add_option("--beta", o.beta, "Inverse temperature");
    s->add_option("--measure", o.measure, "shannon | renyi2 | renyi:<a> | tsallis:<q>");
    s->add_option("--seed", o.seed, "Random seed");
  };

  auto* semiring = app.add_subcommand("semiring", "Tables of lambda_min(u) and the successor function");
  common(semiring);
  semiring->add_option("--u-min", o.u_min);
  semiring->add_option("--u-max", o.u_max);
  semiring->add_option("--u-points", o.u_points);
  semiring->add_option("--x-min", o.x_min);
  semiring->add_option("--x-max", o.x_max);
  semiring->add_option("--x-points", o.x_points);

  auto* eval = app.add_subcommand("eval", "Evaluate a tree on leaf values");
  common(eval);
  eval->add_option("--tree", o.tree, "Bracket string, e.g. {a,{b,c}}");
  eval->add_option("--xs", o.xs, "JSON object of leaf values");
  eval->add_option("--xs-file", o.xs_file, "File holding the JSON leaf values");

  auto* gen = app.add_subcommand("gen-trees", "Enumerate the binary trees on a label set");
  gen->add_option("--labels", o.labels, "Comma separated ids");
  gen->add_option("--n", o.n, "Use ids w1..wN");
  gen->add_option("--cap", o.cap, "Largest label count allowed");

  auto* embed = app.add_subcommand("embed", "Generate a lexicon embedding");
  common(embed);
  embed->add_option("--lexicon", o.lexicon, "Lexicon JSON");
  embed->add_option("--items", o.items, "Number of generated items when no lexicon is given");
  embed->add_option("--samples", o.samples);
  embed->add_option("--modes", o.modes);
  embed->add_option("--amplitude", o.amplitude);

  auto* audit = app.add_subcommand("audit", "Injectivity and wall-crossing audits");
  common(audit);
  audit->add_option("--lexicon", o.lexicon);
  audit->add_option("--items", o.items);
  audit->add_option("--embedding", o.embedding, "Embedding CSV instead of a generated one");
  audit->add_option("--samples", o.samples);
  audit->add_option("--modes", o.modes);
  audit->add_option("--amplitude", o.amplitude);
  audit->add_option("--n-max", o.n_max);
  audit->add_option("--max-label-sets", o.max_label_sets, "Per size; 0 means all");
  audit->add_option("--audit-beta", o.audit_beta, "Beta for the audit (default beta_L / 2)");
  audit->add_option("--threshold", o.threshold);
  audit->add_option("--threads", o.threads);
  audit->add_flag("--no-wall", o.no_wall, "Skip the wall-crossing check");

  auto* cop = app.add_subcommand("coproduct", "All coproduct terms of a workspace");
  cop->add_option("--workspace", o.workspace, "Components separated by spaces");
  cop->add_flag("--no-leaves", o.no_leaves, "Leaves below a root are not accessible");
  cop->add_flag("--pi2", o.only_pi2, "Keep only two-component left channels");

  auto* markov = app.add_subcommand("markov", "Sample the Merge Markov chain");
  markov->add_option("--workspace", o.workspace);
  markov->add_option("--steps", o.steps);
  markov->add_option("--seed", o.seed);
  markov->add_flag("--no-leaves", o.no_leaves);

  auto* wm = app.add_subcommand("wave-merge", "Merge two components of a workspace wave");
  common(wm);
  wm->add_option("--lexicon", o.lexicon, "Lexicon JSON with waves");
  wm->add_option("--workspace", o.workspace);
  wm->add_option("--t1", o.t1);
  wm->add_option("--t2", o.t2);
  wm->add_option("--signal", o.signal, "CSV t,value; synthesised when absent");
  wm->add_option("--duration", o.duration);
  wm->add_option("--samples", o.wave_samples);
  wm->add_option("--window-center", o.window_center);

  auto* we = app.add_subcommand("wave-extract", "Recover merged phases from beta sweeps");
  common(we);
  we->add_option("--observations", o.observations, "CSV beta,omega for a single Merge");
  we->add_option("--lexicon", o.lexicon, "Lexicon JSON with waves");
  we->add_option("--tree", o.tree);
  we->add_option("--betas", o.betas, "JSON per-vertex betas, e.g. {\"root\":0.5,\"1\":0.25}");
  we->add_option("--tol", o.tol);

  auto* pipe = app.add_subcommand("pipeline", "End-to-end demo on a lexicon with waves");
  common(pipe);
  pipe->add_option("--lexicon", o.lexicon, "Default: bundled demo lexicon");
  pipe->add_option("--steps", o.steps);
  pipe->add_option("--duration", o.duration);
  pipe->add_option("--samples", o.wave_samples);
  pipe->add_option("--window-center", o.window_center);
  pipe->add_option("--tol", o.tol);

  for (auto* s : {semiring, eval, embed, wm, we, pipe}) s->add_option("--threads", o.threads);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kUsage;
  }

  try {
    if (semiring->parsed()) return cmd_semiring(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (gen->parsed()) return cmd_gen_trees(o, out);
    if (embed->parsed()) return cmd_embed(o, out);
    if (audit->parsed()) return cmd_audit(o, out);
    if (cop->parsed()) return cmd_coproduct(o, out);
    if (markov->parsed()) return cmd_markov(o, out);
    if (wm->parsed()) return cmd_wave_merge(o, out);
    if (we->parsed()) return cmd_wave_extract(o, out);
    if (pipe->parsed()) return cmd_pipeline(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace thermomerge::cli
