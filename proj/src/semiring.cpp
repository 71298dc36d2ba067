#include "thermomerge/semiring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace thermomerge {

namespace {

constexpr double kLog2 = std::numbers::ln2;

double parse_double(std::string_view s, std::string_view what) {
  try {
    std::size_t used = 0;
    double v = std::stod(std::string(s), &used);
    if (used != s.size()) throw Error("");
    return v;
  } catch (...) {
    throw Error("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
  }
}

// x log x with 0 log 0 := 0.
double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

// ---------------------------------------------------------------------------
// Measures

InfoMeasure InfoMeasure::renyi(double alpha) {
  if (!(alpha > 0.0) || alpha == 1.0 || !std::isfinite(alpha)) {
    throw Error("Renyi order must be positive, finite and != 1");
  }
  return InfoMeasure(Kind::Renyi, alpha);
}

InfoMeasure InfoMeasure::tsallis(double q) {
  if (!(q > 0.0) || q == 1.0 || !std::isfinite(q)) {
    throw Error("Tsallis index must be positive, finite and != 1");
  }
  return InfoMeasure(Kind::Tsallis, q);
}

InfoMeasure InfoMeasure::parse(std::string_view text) {
  if (text == "shannon") return shannon();
  if (text == "renyi2" || text == "ry2") return renyi2();
  auto colon = text.find(':');
  if (colon != std::string_view::npos) {
    auto head = text.substr(0, colon);
    double v = parse_double(text.substr(colon + 1), "measure parameter");
    if (head == "renyi") return renyi(v);
    if (head == "tsallis") return tsallis(v);
  }
  throw Error("unknown information measure '" + std::string(text) +
              "' (expected shannon, renyi2, renyi:<a>, tsallis:<q>)");
}

std::string InfoMeasure::name() const {
  switch (kind_) {
    case Kind::Shannon:
      return "shannon";
    case Kind::Renyi:
      return is_renyi2() ? "renyi2" : "renyi:" + std::to_string(param_);
    case Kind::Tsallis:
      return "tsallis:" + std::to_string(param_);
  }
  return "?";
}

double entropy(const InfoMeasure& m, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("entropy: probability " + std::to_string(p) + " outside [0,1]");
  const double q = 1.0 - p;
  switch (m.kind()) {
    case InfoMeasure::Kind::Shannon:
      return -xlogx(p) - xlogx(q);
    case InfoMeasure::Kind::Renyi: {
      const double a = m.parameter();
      if (a == 2.0) return -std::log(p * p + q * q);
      return std::log(std::pow(p, a) + std::pow(q, a)) / (1.0 - a);
    }
    case InfoMeasure::Kind::Tsallis: {
      const double s = m.parameter();
      return (1.0 - std::pow(p, s) - std::pow(q, s)) / (s - 1.0);
    }
  }
  return 0.0;
}

double max_entropy(const InfoMeasure& m) { return entropy(m, 0.5); }

ThermoParams::ThermoParams(InfoMeasure m, double b) : measure(m), beta(b) {
  if (!(b > 0.0) || !std::isfinite(b)) throw Error("beta must be finite and positive");
}

double SemiringValue::value() const {
  if (inf_) throw Error("value() of the additive unit +inf");
  return v_;
}

// ---------------------------------------------------------------------------
// One-dimensional minimisation on [0,1]

LineMinimum minimize_unit_interval(const std::function<double(double)>& f, double tol) {
  constexpr int kCells = 1000;
  int best = 0;
  double best_val = f(0.0);
  for (int i = 1; i <= kCells; ++i) {
    double v = f(static_cast<double>(i) / kCells);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  double a = static_cast<double>(std::max(best - 1, 0)) / kCells;
  double b = static_cast<double>(std::min(best + 1, kCells)) / kCells;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  double lam = 0.5 * (a + b);
  double val = f(lam);
  // The grid endpoint may beat the interior estimate when the minimum sits on the boundary.
  for (double edge : {0.0, 1.0}) {
    double fe = f(edge);
    if (fe < val) {
      val = fe;
      lam = edge;
    }
  }
  return {lam, val};
}

// ---------------------------------------------------------------------------
// Ry2 closed forms

double lambda_min_ry2(double x, double y, double beta) {
  if (!(beta > 0.0)) throw Error("lambda_min_ry2: beta must be positive");
  const double u = beta * (y - x) / 2.0;
  if (u >= 1.0) return 1.0;
  if (u <= -1.0) return 0.0;
  if (std::abs(u) < 1e-6) return 0.5 + u / 4.0;
  return (1.0 + u - std::sqrt(1.0 - u * u)) / (2.0 * u);
}

namespace {

// Ry2 successor. With u = beta x / 2 and s = sqrt(1 - u^2) the interior branch is
// (u - 1 + s + log((1 - s)/u^2)) / beta, and (1 - s)/u^2 == 1/(1 + s).
double successor_ry2(double x, double beta) {
  const double u = beta * x / 2.0;
  if (u <= -1.0) return x;
  if (u >= 1.0) return 0.0;
  const double s = std::sqrt(1.0 - u * u);
  return (u - 1.0 + s - std::log1p(s)) / beta;
}

double generic_objective(const ThermoParams& p, double x, double y, double lam) {
  return lam * x + (1.0 - lam) * y - entropy(p.measure, lam) / p.beta;
}

}  // namespace

double optimal_lambda(const ThermoParams& p, double x, double y) {
  if (p.measure.is_renyi2()) return lambda_min_ry2(x, y, p.beta);
  return minimize_unit_interval([&](double l) { return generic_objective(p, x, y, l); }).lambda;
}

double oplus(const ThermoParams& p, double x, double y) {
  // Evaluated with the arguments in a fixed order so that x (+) y and y (+) x
  // are bitwise identical.
  const double lo = std::min(x, y);
  const double hi = std::max(x, y);
  if (p.measure.is_renyi2()) {
    return std::min(hi + successor_ry2(lo - hi, p.beta), lo);
  }
  auto m = minimize_unit_interval([&](double l) { return generic_objective(p, lo, hi, l); });
  return std::min(m.value, lo);
}

SemiringValue oplus(const ThermoParams& p, SemiringValue x, SemiringValue y) {
  if (x.is_infinite()) return y;
  if (y.is_infinite()) return x;
  return SemiringValue(oplus(p, x.value(), y.value()));
}

double successor(const ThermoParams& p, double x) {
  if (p.measure.is_renyi2()) return successor_ry2(x, p.beta);
  return oplus(p, x, 0.0);
}

double successor_inverse(const ThermoParams& p, double xi) {
  if (xi > 0.0) throw Error("successor_inverse: " + std::to_string(xi) + " is outside the range (<= 0)");
  if (p.measure.is_renyi2()) {
    const double edge = 2.0 / p.beta;
    if (xi <= -edge) return xi;
    double lo = -edge, hi = edge;
    while (hi - lo > 1e-12 * std::max(1.0, edge)) {
      double mid = 0.5 * (lo + hi);
      if (successor_ry2(mid, p.beta) < xi) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  }
  // Generic measures: Upsilon is nondecreasing; bracket then bisect.
  double lo = xi, hi = 1.0 / p.beta;
  while (successor(p, hi) < xi) {
    hi *= 2.0;
    if (hi > 1e12) throw Error("successor_inverse: value not attained");
  }
  while (successor(p, lo) > xi) lo -= std::abs(lo) + 1.0;
  while (hi - lo > 1e-12 * std::max(1.0, std::abs(hi))) {
    double mid = 0.5 * (lo + hi);
    if (successor(p, mid) < xi) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

ExpansionEstimate beta_expansion_probe(double x, std::span<const double> betas) {
  if (betas.size() < 5) throw Error("beta_expansion_probe: need at least 5 sweep points");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(betas.size()), 4);
  Eigen::VectorXd r(static_cast<Eigen::Index>(betas.size()));
  for (std::size_t i = 0; i < betas.size(); ++i) {
    const double b = betas[i];
    if (!(b > 0.0)) throw Error("beta_expansion_probe: betas must be positive");
    if (std::abs(b * x / 2.0) >= 1.0) {
      throw Error("beta_expansion_probe: beta = " + std::to_string(b) +
                  " leaves the |beta x/2| < 1 domain");
    }
    const auto row = static_cast<Eigen::Index>(i);
    a(row, 0) = 1.0;
    a(row, 1) = b;
    a(row, 2) = b * b;
    a(row, 3) = b * b * b;
    r(row) = successor_ry2(x, b) + kLog2 / b;
  }
  Eigen::VectorXd c = a.colPivHouseholderQr().solve(r);
  double resid = (a * c - r).cwiseAbs().maxCoeff();
  return {c(0), c(1), resid};
}

std::vector<double> geometric_sweep(double lo, double hi, int count) {
  if (count < 2 || !(lo > 0.0) || !(hi > lo)) throw Error("geometric_sweep: need 0 < lo < hi, count >= 2");
  std::vector<double> out(static_cast<std::size_t>(count));
  const double ratio = std::log(hi / lo) / (count - 1);
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = lo * std::exp(ratio * i);
  out.back() = hi;
  return out;
}

}  // namespace thermomerge
