#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kaclab/numeric.hpp"
#include "kaclab/rng.hpp"

namespace kaclab {

inline std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Interaction laws: the distribution of the collision coefficients
// (L, R, Lt, Rt) acting by (u, v) -> (L u + R v, Lt v + Rt u).
// ---------------------------------------------------------------------------

struct TableAtom {
  double prob;
  double l, r, lt, rt;
};

enum class ConservationRegime { None, SumAbs, SumSquares };

class InteractionLaw {
 public:
  enum class Kind { Kac, InelasticKac, Wealth, DiscreteTable };
  enum class AngleKind { Uniform, Fixed };
  enum class WeightKind { Fixed, Uniform };

  static InteractionLaw kac(int p = 2) {
    InteractionLaw law;
    law.kind_ = Kind::Kac;
    law.angle_kind_ = AngleKind::Uniform;
    law.p_ = p;
    law.finish(true);
    return law;
  }

  static InteractionLaw kac_fixed_angle(double theta, int p = 2) {
    InteractionLaw law;
    law.kind_ = Kind::Kac;
    law.angle_kind_ = AngleKind::Fixed;
    law.theta_ = theta;
    law.p_ = p;
    law.finish(true);
    return law;
  }

  // Coefficients sign(cos t)|cos t|^{1+e}, -sign(sin t)|sin t|^{1+e}; e > 0
  // dissipates energy on average while keeping the cross term identically 0.
  static InteractionLaw inelastic_kac(double e, int p = 2) {
    if (!(e >= 0.0)) throw std::invalid_argument("inelastic_kac: e must be >= 0");
    InteractionLaw law;
    law.kind_ = Kind::InelasticKac;
    law.angle_kind_ = AngleKind::Uniform;
    law.inelasticity_ = e;
    law.p_ = p;
    law.finish(true);
    return law;
  }

  static InteractionLaw wealth(double lambda, int p = 1) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("wealth: lambda outside [0,1]");
    InteractionLaw law;
    law.kind_ = Kind::Wealth;
    law.weight_kind_ = WeightKind::Fixed;
    law.lambda_a_ = lambda;
    law.lambda_b_ = lambda;
    law.p_ = p;
    law.finish(true);
    return law;
  }

  static InteractionLaw wealth_uniform_weight(double a, double b, int p = 1) {
    if (!(0.0 <= a && a < b && b <= 1.0))
      throw std::invalid_argument("wealth_uniform_weight: need 0 <= a < b <= 1");
    InteractionLaw law;
    law.kind_ = Kind::Wealth;
    law.weight_kind_ = WeightKind::Uniform;
    law.lambda_a_ = a;
    law.lambda_b_ = b;
    law.p_ = p;
    law.finish(true);
    return law;
  }

  static InteractionLaw discrete_table(std::vector<TableAtom> atoms, int p = 1) {
    return make_table(std::move(atoms), p, true);
  }

  // Skips the non-degeneracy / c(p) >= 0 gate; for building laws whose whole
  // point is to be rejected by check_theorem_hypotheses.
  static InteractionLaw discrete_table_unchecked(std::vector<TableAtom> atoms, int p = 1) {
    return make_table(std::move(atoms), p, false);
  }

  Kind kind() const { return kind_; }
  AngleKind angle_kind() const { return angle_kind_; }
  int p() const { return p_; }

  // One draw of (L, R, Lt, Rt).
  std::array<double, 4> sample_alpha(CounterRng& rng) const {
    switch (kind_) {
      case Kind::Kac: {
        const double th = angle_kind_ == AngleKind::Fixed ? theta_ : rng.next_uniform(0.0, 2.0 * std::numbers::pi);
        const double c = std::cos(th), s = std::sin(th);
        return {c, -s, c, s};
      }
      case Kind::InelasticKac: {
        const double th = rng.next_uniform(0.0, 2.0 * std::numbers::pi);
        const double c = soften(std::cos(th)), s = soften(std::sin(th));
        return {c, -s, c, s};
      }
      case Kind::Wealth: {
        const double lam =
            weight_kind_ == WeightKind::Fixed ? lambda_a_ : rng.next_uniform(lambda_a_, lambda_b_);
        return {lam, 1.0 - lam, lam, 1.0 - lam};
      }
      case Kind::DiscreteTable: {
        const double u = rng.next_unit();
        double acc = 0.0;
        for (const auto& a : atoms_) {
          acc += a.prob;
          if (u < acc) return {a.l, a.r, a.lt, a.rt};
        }
        const auto& a = atoms_.back();
        return {a.l, a.r, a.lt, a.rt};
      }
    }
    throw std::logic_error("unreachable");
  }

  // One draw of the single-particle pair law  (law(L,R) + law(Lt,Rt)) / 2.
  std::array<double, 2> sample_pair_bar(CounterRng& rng) const {
    const auto a = sample_alpha(rng);
    return rng.next_unit() < 0.5 ? std::array<double, 2>{a[0], a[1]} : std::array<double, 2>{a[2], a[3]};
  }

  // c(q) = 1 - (E|L|^q + E|R|^q + E|Lt|^q + E|Rt|^q) / 2; exact sums for the
  // discrete kinds, adaptive Simpson over the angle for the Kac kinds.
  double c_of_q(double q) const {
    if (!(q >= 0.0)) throw std::domain_error("c_of_q: q must be >= 0");
    double half_sum;
    switch (kind_) {
      case Kind::Kac:
        if (angle_kind_ == AngleKind::Fixed) {
          half_sum = std::pow(std::abs(std::cos(theta_)), q) + std::pow(std::abs(std::sin(theta_)), q);
        } else {
          half_sum = 2.0 * abs_cos_moment(q);
        }
        break;
      case Kind::InelasticKac:
        half_sum = 2.0 * abs_cos_moment((1.0 + inelasticity_) * q);
        break;
      case Kind::Wealth:
        half_sum = weight_moment(q) + complement_weight_moment(q);
        break;
      case Kind::DiscreteTable: {
        half_sum = 0.0;
        for (const auto& a : atoms_)
          half_sum += 0.5 * a.prob *
                      (std::pow(std::abs(a.l), q) + std::pow(std::abs(a.r), q) +
                       std::pow(std::abs(a.lt), q) + std::pow(std::abs(a.rt), q));
        break;
      }
      default:
        throw std::logic_error("unreachable");
    }
    if (!std::isfinite(half_sum)) return -kInf;
    return 1.0 - half_sum;
  }

  // E(L R + Lt Rt). Identically zero for the Kac kinds: the two products
  // cancel pointwise in theta.
  double cross_term() const {
    switch (kind_) {
      case Kind::Kac:
      case Kind::InelasticKac:
        return 0.0;
      case Kind::Wealth: {
        // 2 E lambda (1 - lambda)
        return 2.0 * (weight_mean() - weight_moment(2.0));
      }
      case Kind::DiscreteTable: {
        double s = 0.0;
        for (const auto& a : atoms_) s += a.prob * (a.l * a.r + a.lt * a.rt);
        return s;
      }
    }
    throw std::logic_error("unreachable");
  }

  // E(|R| + |Rt|); zero means the interaction never moves anything.
  double mean_abs_gain() const {
    switch (kind_) {
      case Kind::Kac:
        if (angle_kind_ == AngleKind::Fixed) return 2.0 * std::abs(std::sin(theta_));
        return 2.0 * abs_cos_moment(1.0);
      case Kind::InelasticKac:
        return 2.0 * abs_cos_moment(1.0 + inelasticity_);
      case Kind::Wealth:
        return 2.0 * (1.0 - weight_mean());
      case Kind::DiscreteTable: {
        double s = 0.0;
        for (const auto& a : atoms_) s += a.prob * (std::abs(a.r) + std::abs(a.rt));
        return s;
      }
    }
    throw std::logic_error("unreachable");
  }

  bool coefficients_bounded_by_one() const {
    switch (kind_) {
      case Kind::Kac:
      case Kind::InelasticKac:
      case Kind::Wealth:
        return true;
      case Kind::DiscreteTable:
        for (const auto& a : atoms_)
          if (std::max({std::abs(a.l), std::abs(a.r), std::abs(a.lt), std::abs(a.rt)}) > 1.0 + 1e-12)
            return false;
        return true;
    }
    return false;
  }

  // lim_{q->inf} c(q) when all |coefficients| <= 1: 1 minus half the expected
  // count of coefficients sitting exactly at magnitude 1.
  double c_limit_at_infinity() const {
    auto unit = [](double x) { return std::abs(std::abs(x) - 1.0) <= 1e-12 ? 1.0 : 0.0; };
    switch (kind_) {
      case Kind::Kac:
        if (angle_kind_ == AngleKind::Fixed) {
          const double c = std::cos(theta_), s = std::sin(theta_);
          return 1.0 - (unit(c) + unit(s));
        }
        return 1.0;  // continuous angle: |cos| = 1 has zero mass
      case Kind::InelasticKac:
        return 1.0;
      case Kind::Wealth:
        if (weight_kind_ == WeightKind::Fixed)
          return 1.0 - (unit(lambda_a_) + unit(1.0 - lambda_a_));
        return 1.0;
      case Kind::DiscreteTable: {
        double mass = 0.0;
        for (const auto& a : atoms_)
          mass += a.prob * (unit(a.l) + unit(a.r) + unit(a.lt) + unit(a.rt));
        return 1.0 - 0.5 * mass;
      }
    }
    throw std::logic_error("unreachable");
  }

  ConservationRegime conservation_regime() const { return regime_; }

  const std::vector<TableAtom>& atoms() const { return atoms_; }

  std::string describe() const {
    switch (kind_) {
      case Kind::Kac:
        return angle_kind_ == AngleKind::Fixed ? "kac(" + fmt_g17(theta_) + ")" : "kac";
      case Kind::InelasticKac:
        return "inelastic-kac(" + fmt_g17(inelasticity_) + ")";
      case Kind::Wealth:
        return weight_kind_ == WeightKind::Fixed
                   ? "wealth(" + fmt_g17(lambda_a_) + ")"
                   : "wealth-uniform(" + fmt_g17(lambda_a_) + "," + fmt_g17(lambda_b_) + ")";
      case Kind::DiscreteTable: {
        std::string s = "table(";
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
          const auto& a = atoms_[i];
          if (i) s += ";";
          s += fmt_g17(a.prob) + ":" + fmt_g17(a.l) + ":" + fmt_g17(a.r) + ":" + fmt_g17(a.lt) + ":" +
               fmt_g17(a.rt);
        }
        return s + ")";
      }
    }
    throw std::logic_error("unreachable");
  }

 private:
  static InteractionLaw make_table(std::vector<TableAtom> atoms, int p, bool strict) {
    if (atoms.empty()) throw std::invalid_argument("discrete_table: no atoms");
    double sum = 0.0;
    for (const auto& a : atoms) {
      if (!(a.prob > 0.0)) throw std::invalid_argument("discrete_table: probabilities must be positive");
      sum += a.prob;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("discrete_table: probabilities must sum to 1 within 1e-12");
    InteractionLaw law;
    law.kind_ = Kind::DiscreteTable;
    law.atoms_ = std::move(atoms);
    law.p_ = p;
    law.finish(strict);
    return law;
  }

  void finish(bool strict) {
    if (p_ != 1 && p_ != 2) throw std::invalid_argument("interaction law: p must be 1 or 2");
    if (strict) {
      if (!(mean_abs_gain() > 0.0))
        throw std::invalid_argument("interaction law: degenerate (E(|R|+|Rt|) = 0)");
      if (c_of_q(static_cast<double>(p_)) < -1e-9)
        throw std::invalid_argument("interaction law: c(p) < 0 violates the admissible regime");
    }
    regime_ = detect_regime();
  }

  ConservationRegime detect_regime() const {
    constexpr double tol = 1e-12;
    switch (kind_) {
      case Kind::Kac:
        return ConservationRegime::SumSquares;
      case Kind::InelasticKac:
        return inelasticity_ == 0.0 ? ConservationRegime::SumSquares : ConservationRegime::None;
      case Kind::Wealth:
        return ConservationRegime::SumAbs;
      case Kind::DiscreteTable: {
        bool sum_abs = true, sum_sq = true;
        for (const auto& a : atoms_) {
          sum_abs = sum_abs && a.l >= 0.0 && a.r >= 0.0 && a.lt >= 0.0 && a.rt >= 0.0 &&
                    std::abs(a.l + a.rt - 1.0) <= tol && std::abs(a.lt + a.r - 1.0) <= tol;
          sum_sq = sum_sq && std::abs(a.l * a.l + a.rt * a.rt - 1.0) <= tol &&
                   std::abs(a.lt * a.lt + a.r * a.r - 1.0) <= tol &&
                   std::abs(a.l * a.r + a.lt * a.rt) <= tol;
        }
        if (sum_sq) return ConservationRegime::SumSquares;
        if (sum_abs) return ConservationRegime::SumAbs;
        return ConservationRegime::None;
      }
    }
    return ConservationRegime::None;
  }

  double soften(double x) const { return std::copysign(std::pow(std::abs(x), 1.0 + inelasticity_), x); }

  // E|cos theta|^q for theta uniform on [0, 2pi).
  static double abs_cos_moment(double q) {
    if (q == 0.0) return 1.0;
    const double integral = adaptive_simpson(
        [q](double th) { return std::pow(std::cos(th), q); }, 0.0, 0.5 * std::numbers::pi, 1e-10);
    return integral * 2.0 / std::numbers::pi;
  }

  // E lambda^q over the weight law.
  double weight_moment(double q) const {
    if (weight_kind_ == WeightKind::Fixed) return std::pow(lambda_a_, q);
    return (std::pow(lambda_b_, q + 1.0) - std::pow(lambda_a_, q + 1.0)) /
           ((q + 1.0) * (lambda_b_ - lambda_a_));
  }

  double complement_weight_moment(double q) const {
    if (weight_kind_ == WeightKind::Fixed) return std::pow(1.0 - lambda_a_, q);
    return (std::pow(1.0 - lambda_a_, q + 1.0) - std::pow(1.0 - lambda_b_, q + 1.0)) /
           ((q + 1.0) * (lambda_b_ - lambda_a_));
  }

  double weight_mean() const { return weight_moment(1.0); }

  Kind kind_ = Kind::Kac;
  AngleKind angle_kind_ = AngleKind::Uniform;
  WeightKind weight_kind_ = WeightKind::Fixed;
  double theta_ = 0.0;
  double inelasticity_ = 0.0;
  double lambda_a_ = 0.0, lambda_b_ = 0.0;
  std::vector<TableAtom> atoms_;
  int p_ = 1;
  ConservationRegime regime_ = ConservationRegime::None;
};

// ---------------------------------------------------------------------------
// Initial laws P0 with analytic quantiles, CDFs and absolute moments.
// ---------------------------------------------------------------------------

class InitialLaw {
 public:
  enum class Kind { PointMass, Uniform, Gaussian, Exponential, Pareto, TwoPoint };

  static InitialLaw point_mass(double c) { return InitialLaw(Kind::PointMass, c, 0.0, 0.0); }

  static InitialLaw uniform(double a, double b) {
    if (!(a < b)) throw std::invalid_argument("uniform: need a < b");
    return InitialLaw(Kind::Uniform, a, b, 0.0);
  }

  static InitialLaw gaussian(double mean, double variance) {
    if (!(variance > 0.0)) throw std::invalid_argument("gaussian: variance must be positive");
    return InitialLaw(Kind::Gaussian, mean, variance, 0.0);
  }

  static InitialLaw exponential(double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be positive");
    return InitialLaw(Kind::Exponential, rate, 0.0, 0.0);
  }

  static InitialLaw pareto(double index, double scale) {
    if (!(index > 0.0 && scale > 0.0)) throw std::invalid_argument("pareto: index and scale must be positive");
    return InitialLaw(Kind::Pareto, index, scale, 0.0);
  }

  static InitialLaw two_point(double x0, double x1, double w) {
    if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("two_point: weight outside [0,1]");
    if (x0 > x1) {  // keep the quantile non-decreasing
      std::swap(x0, x1);
      w = 1.0 - w;
    }
    return InitialLaw(Kind::TwoPoint, x0, x1, w);
  }

  Kind kind() const { return kind_; }

  double quantile(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("quantile: u outside (0,1)");
    switch (kind_) {
      case Kind::PointMass:
        return a_;
      case Kind::Uniform:
        return a_ + (b_ - a_) * u;
      case Kind::Gaussian:
        return a_ + std::sqrt(b_) * normal_quantile(u);
      case Kind::Exponential:
        return -std::log1p(-u) / a_;
      case Kind::Pareto:
        return b_ * std::pow(1.0 - u, -1.0 / a_);
      case Kind::TwoPoint:
        return u <= w_ ? a_ : b_;
    }
    throw std::logic_error("unreachable");
  }

  double cdf(double x) const {
    switch (kind_) {
      case Kind::PointMass:
        return x < a_ ? 0.0 : 1.0;
      case Kind::Uniform:
        return std::clamp((x - a_) / (b_ - a_), 0.0, 1.0);
      case Kind::Gaussian:
        return normal_cdf((x - a_) / std::sqrt(b_));
      case Kind::Exponential:
        return x <= 0.0 ? 0.0 : -std::expm1(-a_ * x);
      case Kind::Pareto:
        return x <= b_ ? 0.0 : 1.0 - std::pow(b_ / x, a_);
      case Kind::TwoPoint:
        return x < a_ ? 0.0 : (x < b_ ? w_ : 1.0);
    }
    throw std::logic_error("unreachable");
  }

  double sample(CounterRng& rng) const {
    // (k + 1/2) 2^-53 lands strictly inside (0,1), so every kind's quantile is defined.
    const double u = (static_cast<double>(rng.next_u64() >> 11) + 0.5) * 0x1.0p-53;
    return quantile(u);
  }

  // M_q = E|X|^q, analytic except for off-center Gaussians.
  double abs_moment(double q) const {
    if (!(q >= 0.0)) throw std::domain_error("abs_moment: q must be >= 0");
    if (q == 0.0) return 1.0;
    switch (kind_) {
      case Kind::PointMass:
        return std::pow(std::abs(a_), q);
      case Kind::Uniform: {
        const double a = a_, b = b_, den = (q + 1.0) * (b - a);
        if (a >= 0.0) return (std::pow(b, q + 1.0) - std::pow(a, q + 1.0)) / den;
        if (b <= 0.0) return (std::pow(-a, q + 1.0) - std::pow(-b, q + 1.0)) / den;
        return (std::pow(-a, q + 1.0) + std::pow(b, q + 1.0)) / den;
      }
      case Kind::Gaussian: {
        const double sd = std::sqrt(b_);
        if (a_ == 0.0)
          return std::pow(sd, q) * std::pow(2.0, 0.5 * q) * std::tgamma(0.5 * (q + 1.0)) /
                 std::sqrt(std::numbers::pi);
        const double kspan = 16.0 + 3.0 * std::sqrt(q);
        const double lo = a_ - kspan * sd, hi = a_ + kspan * sd;
        auto f = [this, q, sd](double x) {
          const double z = (x - a_) / sd;
          return std::pow(std::abs(x), q) * std::exp(-0.5 * z * z) /
                 (sd * std::sqrt(2.0 * std::numbers::pi));
        };
        if (lo < 0.0 && hi > 0.0)
          return adaptive_simpson(f, lo, 0.0, 1e-12) + adaptive_simpson(f, 0.0, hi, 1e-12);
        return adaptive_simpson(f, lo, hi, 1e-12);
      }
      case Kind::Exponential:
        return std::exp(std::lgamma(q + 1.0) - q * std::log(a_));
      case Kind::Pareto:
        if (q >= a_) return kInf;
        return a_ * std::pow(b_, q) / (a_ - q);
      case Kind::TwoPoint:
        return w_ * std::pow(std::abs(a_), q) + (1.0 - w_) * std::pow(std::abs(b_), q);
    }
    throw std::logic_error("unreachable");
  }

  // Largest q with M_q < infinity, known analytically per kind.
  double moment_finite_up_to() const { return kind_ == Kind::Pareto ? a_ : kInf; }

  // Interior u-levels where the quantile jumps (discrete kinds only).
  std::vector<double> quantile_jump_levels() const {
    if (kind_ == Kind::TwoPoint && w_ > 0.0 && w_ < 1.0) return {w_};
    return {};
  }

  std::string describe() const {
    switch (kind_) {
      case Kind::PointMass:
        return "pointmass(" + fmt_g17(a_) + ")";
      case Kind::Uniform:
        return "uniform(" + fmt_g17(a_) + "," + fmt_g17(b_) + ")";
      case Kind::Gaussian:
        return "gaussian(" + fmt_g17(a_) + "," + fmt_g17(b_) + ")";
      case Kind::Exponential:
        return "exponential(" + fmt_g17(a_) + ")";
      case Kind::Pareto:
        return "pareto(" + fmt_g17(a_) + "," + fmt_g17(b_) + ")";
      case Kind::TwoPoint:
        return "twopoint(" + fmt_g17(a_) + "," + fmt_g17(b_) + "," + fmt_g17(w_) + ")";
    }
    throw std::logic_error("unreachable");
  }

  double param_a() const { return a_; }
  double param_b() const { return b_; }

 private:
  InitialLaw(Kind kind, double a, double b, double w) : kind_(kind), a_(a), b_(b), w_(w) {}

  Kind kind_;
  double a_, b_, w_;
};

// ---------------------------------------------------------------------------
// q* and the exponent profile.
// ---------------------------------------------------------------------------

struct QStarResult {
  double value = -kInf;  // -inf sentinel: the defining set is empty
  bool capped = false;   // +inf hit the probe cap without an analytic certificate
};

inline QStarResult q_star_detail(const InteractionLaw& law, const InitialLaw& p0) {
  constexpr double kCap = 128.0;
  constexpr double kPosTol = 1e-10;
  const double p = static_cast<double>(law.p());
  const double m = p0.moment_finite_up_to();

  // Probe for a point where c > 0, staying strictly below the moment ceiling.
  // A finite ceiling adds a probe just under it: the positive set is an
  // interval, so the point closest to the ceiling is the most informative.
  double q_pos = -1.0;
  std::vector<double> probes;
  for (double q = p; q <= kCap; q *= 2.0) {
    probes.push_back(q);
    probes.push_back(1.5 * q);
  }
  for (double q = 0.75 * p; q >= p / 16.0; q *= 0.5) probes.push_back(q);
  if (std::isfinite(m)) {
    probes.push_back(m * (1.0 - 1e-9));
    probes.push_back(0.5 * (std::min(p, m) + m));
  }
  for (double q : probes) {
    if (q >= m) continue;
    if (law.c_of_q(q) > kPosTol) {
      q_pos = q;
      break;
    }
  }
  if (q_pos < 0.0) return {-kInf, false};

  // Upper edge of {c > 0}: certified infinite for |coefficients| <= 1 laws
  // with a positive limit, otherwise bisection after doubling to a sign change.
  double upper = kInf;
  bool capped = false;
  if (!(law.coefficients_bounded_by_one() && law.c_limit_at_infinity() > kPosTol)) {
    double lo = q_pos, hi = std::max(2.0 * p, 2.0 * q_pos);
    while (hi <= kCap && law.c_of_q(hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
    }
    if (hi > kCap) {
      capped = true;
    } else {
      for (int it = 0; it < 200 && (hi - lo) > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (law.c_of_q(mid) > 0.0 ? lo : hi) = mid;
      }
      upper = 0.5 * (lo + hi);
    }
  }
  return {std::min(m, upper), capped};
}

inline double q_star(const InteractionLaw& law, const InitialLaw& p0) {
  return q_star_detail(law, p0).value;
}

// c(p), q*, and the decay exponent c_bar(p,q) = min(c(p), c(q)).
struct ExponentProfile {
  InteractionLaw law;
  double c_of_p;
  double q_star;
  bool q_star_capped;

  double c_bar(double q) const {
    if (!(q >= static_cast<double>(law.p())))
      throw std::domain_error("c_bar: q must be >= p");
    return std::min(c_of_p, law.c_of_q(q));
  }
};

inline ExponentProfile make_exponent_profile(const InteractionLaw& law, const InitialLaw& p0) {
  const auto qs = q_star_detail(law, p0);
  return ExponentProfile{law, law.c_of_q(static_cast<double>(law.p())), qs.value, qs.capped};
}

// ---------------------------------------------------------------------------
// Hypotheses of the quantitative chaos estimates, as an advisory report.
// ---------------------------------------------------------------------------

struct HypothesisFlag {
  bool pass = true;
  double value = 0.0;
};

struct HypothesesReport {
  int p = 1;
  HypothesisFlag c_p_nonneg;
  HypothesisFlag moment_p_finite;
  HypothesisFlag non_degenerate;
  HypothesisFlag cross_term_zero;  // p = 2 only
  HypothesisFlag q_star_above_2;   // p = 2 only

  bool all_pass() const {
    bool ok = c_p_nonneg.pass && moment_p_finite.pass && non_degenerate.pass;
    if (p == 2) ok = ok && cross_term_zero.pass && q_star_above_2.pass;
    return ok;
  }

  std::string first_failure() const {
    if (!c_p_nonneg.pass) return "c(p) >= 0 (value " + fmt_g17(c_p_nonneg.value) + ")";
    if (!moment_p_finite.pass) return "M_p(P0) < inf (value " + fmt_g17(moment_p_finite.value) + ")";
    if (!non_degenerate.pass) return "E(|R|+|Rt|) > 0 (value " + fmt_g17(non_degenerate.value) + ")";
    if (p == 2 && !cross_term_zero.pass)
      return "E(LR+LtRt) = 0 (value " + fmt_g17(cross_term_zero.value) + ")";
    if (p == 2 && !q_star_above_2.pass) return "q* > 2 (value " + fmt_g17(q_star_above_2.value) + ")";
    return "";
  }
};

inline HypothesesReport check_theorem_hypotheses(const InteractionLaw& law, const InitialLaw& p0) {
  HypothesesReport rep;
  rep.p = law.p();
  rep.c_p_nonneg.value = law.c_of_q(static_cast<double>(law.p()));
  rep.c_p_nonneg.pass = rep.c_p_nonneg.value >= -1e-9;
  rep.moment_p_finite.value = p0.abs_moment(static_cast<double>(law.p()));
  rep.moment_p_finite.pass = std::isfinite(rep.moment_p_finite.value);
  rep.non_degenerate.value = law.mean_abs_gain();
  rep.non_degenerate.pass = rep.non_degenerate.value > 0.0;
  if (law.p() == 2) {
    rep.cross_term_zero.value = law.cross_term();
    rep.cross_term_zero.pass = std::abs(rep.cross_term_zero.value) <= 1e-9;
    rep.q_star_above_2.value = q_star(law, p0);
    rep.q_star_above_2.pass = rep.q_star_above_2.value > 2.0;
  }
  return rep;
}

}  // namespace kaclab
