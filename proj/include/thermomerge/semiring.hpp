#pragma once

// Thermodynamic deformations of the tropical (min, +) semiring.
//
//   x (+)_{S,beta} y = min_{p in [0,1]} { p x + (1-p) y - S(p)/beta }
//
// For the collision entropy Ry2(p) = -log(p^2 + (1-p)^2) the minimiser and
// the successor function x (+) 0 have closed forms; all other measures go
// through a seeded golden-section search.

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "thermomerge/error.hpp"

namespace thermomerge {

class InfoMeasure {
 public:
  enum class Kind { Shannon, Renyi, Tsallis };

  static InfoMeasure shannon() { return InfoMeasure(Kind::Shannon, 1.0); }
  static InfoMeasure renyi(double alpha);
  static InfoMeasure renyi2() { return renyi(2.0); }
  static InfoMeasure tsallis(double q);
  // "shannon", "renyi2", "renyi:<alpha>", "tsallis:<q>"
  static InfoMeasure parse(std::string_view text);

  Kind kind() const { return kind_; }
  double parameter() const { return param_; }
  bool is_renyi2() const { return kind_ == Kind::Renyi && param_ == 2.0; }
  std::string name() const;

  friend bool operator==(const InfoMeasure&, const InfoMeasure&) = default;

 private:
  InfoMeasure(Kind k, double p) : kind_(k), param_(p) {}
  Kind kind_;
  double param_;
};

// Binary information measure S(p); p outside [0,1] is an error.
double entropy(const InfoMeasure& m, double p);

// max_p S(p), attained at p = 1/2.
double max_entropy(const InfoMeasure& m);

struct ThermoParams {
  InfoMeasure measure = InfoMeasure::renyi2();
  double beta = 1.0;

  ThermoParams() = default;
  ThermoParams(InfoMeasure m, double b);
  ThermoParams with_beta(double b) const { return ThermoParams(measure, b); }
};

// Element of R u {+inf}. (+)-unit is +inf, (.)-unit is 0; (.) is ordinary
// addition and saturates at +inf.
class SemiringValue {
 public:
  SemiringValue() = default;
  SemiringValue(double v) : v_(v) {}  // NOLINT: implicit from reals on purpose
  static SemiringValue infinity() {
    SemiringValue s;
    s.inf_ = true;
    return s;
  }

  bool is_infinite() const { return inf_; }
  double value() const;

  friend SemiringValue operator*(SemiringValue a, SemiringValue b) {
    if (a.inf_ || b.inf_) return infinity();
    return SemiringValue(a.v_ + b.v_);
  }
  friend bool operator==(const SemiringValue& a, const SemiringValue& b) {
    return a.inf_ == b.inf_ && (a.inf_ || a.v_ == b.v_);
  }

 private:
  double v_ = 0.0;
  bool inf_ = false;
};

struct LineMinimum {
  double lambda;
  double value;
};

// Minimises f on [0,1]: best point of a 1e-3 spaced grid, then golden
// section on the neighbouring cells to |d lambda| <= tol.
LineMinimum minimize_unit_interval(const std::function<double(double)>& f, double tol = 1e-10);

// Closed-form Ry2 minimiser of lambda x + (1-lambda) y + log(lambda^2+(1-lambda)^2)/beta.
double lambda_min_ry2(double x, double y, double beta);

// Minimiser lambda (weight on x) of the deformed sum for any measure.
double optimal_lambda(const ThermoParams& p, double x, double y);

double oplus(const ThermoParams& p, double x, double y);
SemiringValue oplus(const ThermoParams& p, SemiringValue x, SemiringValue y);

// Upsilon(x, beta) = x (+) 0.
double successor(const ThermoParams& p, double x);

// The x <= 2/beta (Ry2) with successor(x) == xi. Requires xi <= 0.
double successor_inverse(const ThermoParams& p, double xi);

struct ExpansionEstimate {
  double order0;    // coefficient of beta^0 in Upsilon + log(2)/beta
  double order1;    // coefficient of beta^1
  double residual;  // max abs residual of the fit
};

// Least-squares fit of Ry2 Upsilon(x, beta) + log(2)/beta on a cubic in beta
// over the given sweep. Every beta must satisfy |beta x / 2| < 1.
ExpansionEstimate beta_expansion_probe(double x, std::span<const double> betas);

// Geometric sweep of `count` values from lo to hi inclusive.
std::vector<double> geometric_sweep(double lo, double hi, int count);

}  // namespace thermomerge
