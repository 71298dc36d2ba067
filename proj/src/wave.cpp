#include "thermomerge/wave.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "json.hpp"

namespace thermomerge {

namespace {

constexpr double kPi = std::numbers::pi;

// Into (-pi, pi].
double wrap_pi(double x) {
  double r = std::remainder(x, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

Wave wave_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("A") || !j.contains("nu") || !j.contains("omega")) {
    throw Error("wave: expected {\"A\":..., \"nu\":\"p/q\", \"omega\":...}");
  }
  Wave w;
  w.amplitude = j["A"].get<double>();
  w.frequency = j["nu"].is_string() ? parse_rational(j["nu"].get<std::string>())
                                    : Rational(j["nu"].get<std::int64_t>());
  w.phase = j["omega"].get<double>();
  w.validate();
  return w;
}

}  // namespace

void Wave::validate() const {
  if (!(amplitude > 0.0)) throw Error("wave amplitude must be positive");
  if (frequency <= Rational(0)) throw Error("wave frequency must be positive, got " + to_string(frequency));
}

double Wave::value(double t) const {
  return amplitude * std::sin(2.0 * kPi * to_double(frequency) * t + phase);
}

double WavePacket::value(double t) const {
  double s = 0.0;
  for (const auto& w : waves) s += w.value(t);
  return s;
}

LexWaves lexicon_waves_from_json_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("lexicon: invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("items") || !j["items"].is_array()) {
    throw Error("lexicon: expected an object with an \"items\" array");
  }
  LexWaves out;
  try {
    for (const auto& e : j["items"]) {
      const auto id = e.at("id").get<std::string>();
      if (!e.contains("wave")) throw Error("lexicon item '" + id + "' has no wave");
      out.emplace(id, wave_from_json(e["wave"]));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("lexicon: ") + e.what());
  }
  return out;
}

std::string packet_to_json(const WavePacket& p) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& w : p.waves) {
    arr.push_back({{"A", w.amplitude}, {"nu", to_string(w.frequency)}, {"omega", w.phase}});
  }
  return arr.dump(2);
}

WavePacket packet_from_json(std::string_view text) {
  WavePacket p;
  try {
    auto j = nlohmann::json::parse(text);
    if (!j.is_array()) throw Error("packet: expected a JSON array");
    for (const auto& e : j) p.waves.push_back(wave_from_json(e));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("packet: ") + e.what());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Synchronisation

std::pair<std::int64_t, std::int64_t> freq_multipliers(const Rational& nu1, const Rational& nu2) {
  if (nu1 <= Rational(0) || nu2 <= Rational(0)) {
    throw Error("freq_multipliers: frequencies must be positive, got " + to_string(nu1) + " and " +
                to_string(nu2));
  }
  const Rational r = nu2 / nu1;
  return {r.numerator(), r.denominator()};
}

SyncPairResult sync_pair(const Wave& w1, const Wave& w2, const ThermoParams& p) {
  w1.validate();
  w2.validate();
  auto [n12, n21] = freq_multipliers(w1.frequency, w2.frequency);
  const double omega = oplus(p, static_cast<double>(n12) * w1.phase, static_cast<double>(n21) * w2.phase);
  WavePacket pk{{Wave{w1.amplitude, w1.frequency, omega}, Wave{w2.amplitude, w2.frequency, omega}}};
  return {omega, pk, n12, n21};
}

namespace {

SyncNode sync_rec(const SynTree& s, const NodeId& id, const LexWaves& waves, const ThermoParams& p,
                  const BetaAssignment& betas) {
  SyncNode n;
  if (s.is_leaf()) {
    auto it = waves.find(s.item().id);
    if (it == waves.end()) throw Error("no wave for leaf '" + s.item().id + "'");
    it->second.validate();
    n.ref_frequency = it->second.frequency;
    n.phase = it->second.phase;
    return n;
  }
  SyncNode a = sync_rec(s.child(0), id.child(0), waves, p, betas);
  SyncNode b = sync_rec(s.child(1), id.child(1), waves, p, betas);
  auto [m1, m2] = freq_multipliers(a.ref_frequency, b.ref_frequency);
  auto bt = betas.find(id);
  n.beta = bt == betas.end() ? p.beta : bt->second;
  n.m1 = m1;
  n.m2 = m2;
  n.ref_frequency = a.ref_frequency * m1;
  n.phase = oplus(p.with_beta(n.beta), static_cast<double>(m1) * a.phase, static_cast<double>(m2) * b.phase);
  n.children.push_back(std::move(a));
  n.children.push_back(std::move(b));
  return n;
}

}  // namespace

SyncTreeResult sync_tree(const SynTree& t, const LexWaves& waves, const ThermoParams& p,
                         const BetaAssignment& betas) {
  SyncTreeResult r;
  r.root = sync_rec(t, NodeId{}, waves, p, betas);
  for (const auto& item : t.leaves()) {
    const Wave& w = waves.at(item.id);
    r.packet.waves.push_back(Wave{w.amplitude, w.frequency, r.root.phase});
  }
  return r;
}

const SyncNode& sync_node_at(const SyncNode& root, const NodeId& v) {
  const SyncNode* n = &root;
  for (char c : v.path) {
    if (n->children.empty()) throw Error("sync tree has no vertex '" + v.path + "'");
    n = &n->children[c == '0' ? 0 : 1];
  }
  return *n;
}

// ---------------------------------------------------------------------------
// Extraction by beta sweeps

namespace {

struct FitOutcome {
  bool ok = false;
  std::string why;
  PairExtraction result{};
};

FitOutcome fit_single_merge(const std::function<double(double)>& omega_of_beta,
                            const std::vector<double>& betas, double tol) {
  FitOutcome out;
  const auto n = static_cast<Eigen::Index>(betas.size());
  Eigen::VectorXd obs(n);
  for (Eigen::Index i = 0; i < n; ++i) obs(i) = omega_of_beta(betas[static_cast<std::size_t>(i)]);
  if (!obs.allFinite()) {
    out.why = "non-finite observation";
    return out;
  }
  std::vector<std::size_t> order(betas.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return betas[a] < betas[b]; });

  // Starting midpoint: linear extrapolation of omega + log2/beta to beta = 0
  // over the three smallest sweep values.
  Eigen::Matrix<double, 3, 2> design;
  Eigen::Vector3d shifted;
  for (int k = 0; k < 3; ++k) {
    const std::size_t i = order[static_cast<std::size_t>(k)];
    design(k, 0) = 1.0;
    design(k, 1) = betas[i];
    shifted(k) = obs(static_cast<Eigen::Index>(i)) + std::log(2.0) / betas[i];
  }
  double m = design.colPivHouseholderQr().solve(shifted)(0);

  // Starting d = lo - hi <= 0 from the largest sweep value, where
  // omega - m = Upsilon(d) - d/2 is decreasing in |d|.
  const std::size_t top = order.back();
  const ThermoParams p0(InfoMeasure::renyi2(), betas[top]);
  auto h = [&](double d) { return successor(p0, d) - d / 2.0; };
  const double target = obs(static_cast<Eigen::Index>(top)) - m;
  double d = 0.0;
  if (target < h(0.0)) {
    double left = -1.0;
    for (int k = 0; k < 200 && h(left) > target; ++k) left *= 2.0;
    double right = 0.0;
    for (int it = 0; it < 200 && right - left > 1e-15 * std::max(1.0, -left); ++it) {
      const double mid = 0.5 * (left + right);
      if (h(mid) > target) right = mid; else left = mid;
    }
    d = 0.5 * (left + right);
  }

  // Gauss-Newton on (m, d) with the exact model omega = m - d/2 + Upsilon(d),
  // valid on every branch.
  auto model = [&](double mm, double dd, double b) {
    return mm - dd / 2.0 + successor(ThermoParams(InfoMeasure::renyi2(), b), dd);
  };
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd r(n);
    Eigen::MatrixXd jac(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double b = betas[static_cast<std::size_t>(i)];
      r(i) = obs(i) - model(m, d, b);
      jac(i, 0) = 1.0;
      jac(i, 1) = lambda_min_ry2(d, 0.0, b) - 0.5;
    }
    Eigen::Vector2d step = jac.completeOrthogonalDecomposition().solve(r);
    m += step(0);
    d = std::min(0.0, d + step(1));
    const double scale = std::max(1.0, std::abs(m) + std::abs(d));
    if (std::abs(step(0)) < 1e-15 * scale && std::abs(step(1)) < 1e-13 * scale) break;
  }
  // With fewer than three sweep values inside |u| < 1 the larger phase is
  // not identified.
  int interior = 0;
  double residual = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double b = betas[static_cast<std::size_t>(i)];
    if (std::abs(b * d / 2.0) < 1.0) ++interior;
    residual = std::max(residual, std::abs(obs(i) - model(m, d, b)));
  }
  if (!(residual <= tol)) {
    out.why = "model residual " + std::to_string(residual) + " exceeds tol";
    return out;
  }
  if (interior < 3) {
    out.why = "only " + std::to_string(interior) + " sweep values inside |u| < 1";
    return out;
  }
  out.ok = true;
  out.result = {m + d / 2.0, m - d / 2.0, m, residual};
  return out;
}

}  // namespace

PairExtraction extract_pair(const std::function<double(double)>& omega_of_beta, const ExtractConfig& cfg) {
  if (cfg.betas.size() < 8) throw Error("extract_pair: need at least 8 sweep points");
  for (double b : cfg.betas) {
    if (!(b > 0.0)) throw Error("extract_pair: sweep values must be positive");
  }
  // A sweep lying on the identity branch does not see the larger phase;
  // shrinking it brings any single Merge into the interior, while deeper
  // compositions keep an extra -log2/beta pole at every scale.
  std::vector<double> betas = cfg.betas;
  std::string why;
  for (int attempt = 0; attempt <= cfg.max_rescales; ++attempt) {
    auto fit = fit_single_merge(omega_of_beta, betas, cfg.tol);
    if (fit.ok) return fit.result;
    why = fit.why;
    for (double& b : betas) b *= cfg.rescale_factor;
  }
  throw Error("extract_pair: " + why + "; the observations do not come from a single Merge");
}

namespace {

NodeId parent_of(const NodeId& v) { return NodeId{v.path.substr(0, v.path.size() - 1)}; }
int last_step(const NodeId& v) { return v.path.back() == '0' ? 0 : 1; }

class Peeler {
 public:
  Peeler(const SynTree& t, const SyncNode& mult, const BetaAssignment& base,
         const MultiBetaObservation& observe, const ExtractConfig& cfg)
      : t_(t), mult_(mult), base_(base), observe_(observe), cfg_(cfg) {}

  MultiBetaResult run() {
    MultiBetaResult res;
    base_values_[NodeId{}] = observe_(base_);
    for (const auto& v : t_.internal_vertices()) peel(v, res);
    res.phases = base_values_;
    return res;
  }

 private:
  // Multiplier-scaled phases merged at v under betas b, with beta_v swept.
  PairExtraction pair_at(const NodeId& v, const BetaAssignment& b) {
    return extract_pair(
        [&](double beta) {
          BetaAssignment b2 = b;
          b2[v] = beta;
          return value(v, b2);
        },
        cfg_);
  }

  // omega_{T_v} under betas b; b may differ from base only inside T_v.
  double value(const NodeId& v, const BetaAssignment& b) {
    if (v.is_root()) return observe_(b);
    const NodeId par = parent_of(v);
    const int k = last_step(v);
    const SyncNode& pn = sync_node_at(mult_, par);
    const double m_self = static_cast<double>(k == 0 ? pn.m1 : pn.m2);
    const double m_sib = static_cast<double>(k == 0 ? pn.m2 : pn.m1);
    const double sib = m_sib * base_values_.at(par.child(1 - k));
    auto pe = pair_at(par, b);
    const double pick = std::abs(pe.lo - sib) > std::abs(pe.hi - sib) ? pe.lo : pe.hi;
    return pick / m_self;
  }

  void peel(const NodeId& v, MultiBetaResult& res) {
    const SyncNode& node = sync_node_at(mult_, v);
    const double m1 = static_cast<double>(node.m1);
    const double m2 = static_cast<double>(node.m2);
    auto pe = pair_at(v, base_);
    const SynTree& sub = t_.subtree(v);
    double s0 = pe.lo, s1 = pe.hi;  // scaled values for child 0 and child 1
    if (pe.hi - pe.lo > 1e-12 * std::max(1.0, std::abs(pe.hi))) {
      const int probe = !sub.child(0).is_leaf() ? 0 : (!sub.child(1).is_leaf() ? 1 : -1);
      if (probe < 0) {
        res.ambiguous.push_back(v);
        res.alternative[v] = {pe.hi / m1, pe.lo / m2};
      } else {
        // Moving the probe child's own beta moves only its value. On the
        // identity branch it does not move at all, so keep shrinking.
        BetaAssignment moved = base_;
        double factor = 0.5;
        double d_lo = 0.0, d_hi = 0.0;
        for (int attempt = 0; attempt <= cfg_.max_rescales; ++attempt) {
          moved[v.child(probe)] = factor * base_.at(v.child(probe));
          auto pm = pair_at(v, moved);
          auto nearest = [&](double x) { return std::min(std::abs(x - pm.lo), std::abs(x - pm.hi)); };
          d_lo = nearest(pe.lo);
          d_hi = nearest(pe.hi);
          if (std::max(d_lo, d_hi) > cfg_.tol) break;
          factor *= cfg_.rescale_factor;
        }
        if (!(std::max(d_lo, d_hi) > cfg_.tol)) {
          throw Error("multibeta_extract: moving the beta at " + to_string(v.child(probe)) +
                      " does not move its value");
        }
        const double changed = d_lo > d_hi ? pe.lo : pe.hi;
        const double kept = changed == pe.lo ? pe.hi : pe.lo;
        s0 = probe == 0 ? changed : kept;
        s1 = probe == 0 ? kept : changed;
      }
    }
    base_values_[v.child(0)] = s0 / m1;
    base_values_[v.child(1)] = s1 / m2;
  }

  const SynTree& t_;
  const SyncNode& mult_;
  const BetaAssignment& base_;
  const MultiBetaObservation& observe_;
  const ExtractConfig& cfg_;
  std::map<NodeId, double> base_values_;
};

}  // namespace

MultiBetaResult multibeta_extract(const SynTree& t, const std::map<std::string, Rational>& freqs,
                                  const BetaAssignment& base, const MultiBetaObservation& observe,
                                  const ExtractConfig& cfg) {
  std::set<double> seen;
  for (const auto& v : t.internal_vertices()) {
    auto it = base.find(v);
    if (it == base.end()) throw Error("multibeta_extract: no beta for vertex " + to_string(v));
    if (!(it->second > 0.0)) throw Error("multibeta_extract: beta at " + to_string(v) + " must be positive");
    if (!seen.insert(it->second).second) {
      throw Error("multibeta_extract: beta collision at vertex " + to_string(v) +
                  "; every internal vertex needs its own beta");
    }
  }
  LexWaves probe;
  for (const auto& item : t.leaves()) {
    auto it = freqs.find(item.id);
    if (it == freqs.end()) throw Error("multibeta_extract: no frequency for leaf '" + item.id + "'");
    probe[item.id] = Wave{1.0, it->second, 0.0};
  }
  const SyncNode mult = sync_tree(t, probe, ThermoParams(), base).root;
  return Peeler(t, mult, base, observe, cfg).run();
}

// ---------------------------------------------------------------------------
// Workspace waves and Fourier recovery

double TimeGrid::point(std::size_t i) const {
  return duration * static_cast<double>(i) / static_cast<double>(samples);
}

Wave representative_wave(const SynTree& t, const LexWaves& waves, const ThermoParams& p,
                         const BetaAssignment& betas) {
  if (t.is_leaf()) {
    auto it = waves.find(t.item().id);
    if (it == waves.end()) throw Error("no wave for leaf '" + t.item().id + "'");
    return it->second;
  }
  auto s = sync_tree(t, waves, p, betas);
  double amp = 0.0;
  for (const auto& w : s.packet.waves) amp += w.amplitude;
  return Wave{amp / static_cast<double>(s.packet.waves.size()), s.root.ref_frequency, s.root.phase};
}

std::vector<Wave> workspace_representatives(const Workspace& f, const LexWaves& waves,
                                            const ThermoParams& p) {
  std::vector<Wave> out;
  for (const auto& c : f.components()) out.push_back(representative_wave(c, waves, p));
  return out;
}

std::vector<double> workspace_wave(const std::vector<Wave>& components, const TimeGrid& grid) {
  std::set<Rational> freqs;
  for (const auto& w : components) {
    w.validate();
    if (!freqs.insert(w.frequency).second) {
      throw Error("workspace_wave: duplicate component frequency " + to_string(w.frequency));
    }
  }
  std::vector<double> out(grid.samples, 1.0);
  for (std::size_t i = 0; i < grid.samples; ++i) {
    const double t = grid.point(i);
    for (const auto& w : components) out[i] *= w.value(t);
  }
  return out;
}

std::vector<double> fft_phase_recovery(const std::vector<double>& samples, const TimeGrid& grid,
                                       const std::vector<Rational>& freqs, const PhaseRecoveryConfig& cfg) {
  const std::size_t n = freqs.size();
  if (n == 0 || n > 3) throw Error("fft_phase_recovery: supports 1 to 3 factors");
  if (samples.size() != grid.samples) throw Error("fft_phase_recovery: sample count does not match the grid");
  if (!(grid.duration > 0.0)) throw Error("fft_phase_recovery: duration must be positive");
  for (std::size_t i = 0; i < n; ++i) {
    if (freqs[i] <= Rational(0)) throw Error("fft_phase_recovery: frequencies must be positive");
    for (std::size_t j = 0; j < i; ++j) {
      if (freqs[i] == freqs[j]) throw Error("fft_phase_recovery: equal frequencies " + to_string(freqs[i]));
    }
  }

  // Lines sum_i s_i nu_i with s_0 = +1, stored with positive frequency.
  struct Line {
    unsigned mask;  // bit i set: s_i = -1
    bool negated;   // stored line is -s
    double freq;
  };
  std::vector<Line> lines;
  for (unsigned mask = 0; mask < (1u << n); mask += 2) {
    Rational f(0);
    for (std::size_t i = 0; i < n; ++i) f += (mask >> i & 1u) ? -freqs[i] : freqs[i];
    if (f == Rational(0)) throw Error("fft_phase_recovery: a combination line falls at frequency 0");
    lines.push_back({mask, f < Rational(0), std::abs(to_double(f))});
  }
  const double nyquist = static_cast<double>(grid.samples) / (2.0 * grid.duration);
  const double resolution = 2.0 / grid.duration;
  for (std::size_t a = 0; a < lines.size(); ++a) {
    if (lines[a].freq >= nyquist) {
      throw Error("fft_phase_recovery: line at " + std::to_string(lines[a].freq) + " is above Nyquist");
    }
    if (lines[a].freq < resolution) {
      throw Error("fft_phase_recovery: line at " + std::to_string(lines[a].freq) +
                  " is closer to 0 than 2/duration; lengthen the record");
    }
    for (std::size_t b = 0; b < a; ++b) {
      if (std::abs(lines[a].freq - lines[b].freq) < resolution) {
        throw Error("fft_phase_recovery: lines at " + std::to_string(lines[a].freq) + " and " +
                    std::to_string(lines[b].freq) + " are not resolved");
      }
    }
  }

  // Least-squares fit of every line's cosine and sine; this is the DFT bin
  // reading when the lines sit on bins and stays exact when they do not.
  const auto rows = static_cast<Eigen::Index>(samples.size());
  const auto cols = static_cast<Eigen::Index>(2 * lines.size());
  Eigen::MatrixXd design(rows, cols);
  Eigen::VectorXd y(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double t = grid.point(static_cast<std::size_t>(r));
    y(r) = samples[static_cast<std::size_t>(r)];
    for (std::size_t k = 0; k < lines.size(); ++k) {
      const double w = 2.0 * kPi * lines[k].freq * t;
      design(r, static_cast<Eigen::Index>(2 * k)) = std::cos(w);
      design(r, static_cast<Eigen::Index>(2 * k + 1)) = std::sin(w);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > 0.0) || sv(0) / sv(sv.size() - 1) > cfg.max_condition) {
    throw Error("fft_phase_recovery: spectral lines are not resolvable on this grid");
  }
  Eigen::VectorXd coef = svd.solve(y);

  // P(s) = sum_i s_i omega_i from the complex amplitude of e^{+i 2 pi f t}:
  // c_s = (2i)^{-n} prod(A) prod(s) e^{i sum s omega}.
  auto phase_of = [&](unsigned mask) {
    const bool negate = (mask & 1u) != 0;
    const unsigned stored = negate ? (~mask & ((1u << n) - 1)) : mask;
    std::size_t k = 0;
    while (lines[k].mask != stored) ++k;
    const double a = coef(static_cast<Eigen::Index>(2 * k));
    const double b = coef(static_cast<Eigen::Index>(2 * k + 1));
    // Coefficient of e^{+i 2 pi |f| t} is (a - i b)/2; for a negative line
    // the positive-exponent coefficient belongs to -s.
    std::complex<double> c(a / 2.0, -b / 2.0);
    if (lines[k].negated) c = std::conj(c);
    const int minus = std::popcount(stored);
    double ph = std::arg(c) + static_cast<double>(n) * kPi / 2.0 - (minus % 2 == 1 ? kPi : 0.0);
    return negate ? -ph : ph;
  };

  const unsigned all = (1u << n) - 1;
  const double p_all = phase_of(0);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned others = all & ~(1u << i);
    const double half = 0.5 * (p_all + phase_of(others));
    // half is omega_i mod pi; move it into the window.
    double w = half - kPi * std::ceil((half - (cfg.window_center + kPi / 2.0)) / kPi);
    out[i] = w;
  }
  double total = 0.0;
  for (double w : out) total += w;
  if (std::abs(wrap_pi(p_all - total)) > kPi / 2.0) out[n - 1] += kPi;
  for (double& w : out) w = wrap_pi(w);
  return out;
}

// ---------------------------------------------------------------------------
// Merge in the wave picture

WaveMergeResult wave_merge_operator(const Workspace& f, const SynTree& t1, const SynTree& t2,
                                    const ThermoParams& p, const LexWaves& waves,
                                    const std::vector<double>& signal, const TimeGrid& grid,
                                    const PhaseRecoveryConfig& cfg) {
  WaveMergeResult res;
  res.workspace = f;
  res.signal = signal;
  res.representatives = workspace_representatives(f, waves, p);
  auto channel = targeted_merge(f, t1, t2);
  if (channel.empty()) return res;

  const auto& comps = f.components();
  auto find = [&](const SynTree& x, std::size_t skip) {
    for (std::size_t i = 0; i < comps.size(); ++i) {
      if (i != skip && comps[i] == x) return i;
    }
    return comps.size();
  };
  const std::size_t i1 = find(t1, comps.size());
  const std::size_t i2 = i1 == comps.size() ? comps.size() : find(t2, i1);
  if (i1 == comps.size() || i2 == comps.size()) {
    throw Error("wave_merge_operator: only External Merge of two whole components is supported; " +
                t1.to_string() + " and " + t2.to_string() + " are not both components of " + f.to_string());
  }

  std::vector<Rational> freqs;
  for (const auto& w : res.representatives) freqs.push_back(w.frequency);
  res.recovered_phases = fft_phase_recovery(signal, grid, freqs, cfg);

  const Wave& r1 = res.representatives[i1];
  const Wave& r2 = res.representatives[i2];
  auto [m1, m2] = freq_multipliers(r1.frequency, r2.frequency);
  res.merged_phase = oplus(p, static_cast<double>(m1) * res.recovered_phases[i1],
                           static_cast<double>(m2) * res.recovered_phases[i2]);
  const SynTree merged = merge(t1, t2);
  double amp = 0.0;
  for (const auto& item : merged.leaves()) amp += waves.at(item.id).amplitude;
  amp /= static_cast<double>(merged.leaf_count());
  const Wave merged_wave{amp, r1.frequency * m1, res.merged_phase};

  std::vector<SynTree> rest;
  std::vector<Wave> reps;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    if (i == i1 || i == i2) continue;
    rest.push_back(comps[i]);
  }
  res.workspace = Workspace(rest).with(merged);
  // Representatives follow the canonical component order of the new workspace.
  for (const auto& c : res.workspace.components()) {
    if (c == merged) {
      reps.push_back(merged_wave);
      continue;
    }
    const std::size_t j = find(c, comps.size());
    Wave w = res.representatives[j];
    w.phase = res.recovered_phases[j];
    reps.push_back(w);
  }
  res.representatives = reps;
  res.signal = workspace_wave(res.representatives, grid);
  res.merged = true;
  return res;
}

std::string signal_to_csv(const std::vector<double>& signal, const TimeGrid& grid) {
  std::ostringstream os;
  os.precision(17);
  os << "t,value\n";
  for (std::size_t i = 0; i < signal.size(); ++i) os << grid.point(i) << "," << signal[i] << "\n";
  return os.str();
}

}  // namespace thermomerge
