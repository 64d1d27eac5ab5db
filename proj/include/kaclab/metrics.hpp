#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kaclab/laws.hpp"
#include "kaclab/numeric.hpp"
#include "kaclab/rng.hpp"

namespace kaclab {

inline double cost_p(double d, int p) {
  d = std::abs(d);
  return p == 1 ? d : d * d;
}

inline void require_p(int p) {
  if (p != 1 && p != 2) throw std::invalid_argument("Wasserstein order p must be 1 or 2");
}

// W_p between two same-size empirical measures under the normalized cost
// ((1/n) sum |.|^p)^(1/p); the monotone matching attains the optimum in 1D.
inline double w_p_sorted(std::span<const double> a, std::span<const double> b, int p) {
  require_p(p);
  if (a.size() != b.size())
    throw std::invalid_argument("w_p_sorted: size mismatch, use w_p_quantile for unequal samples");
  if (a.empty()) throw std::invalid_argument("w_p_sorted: empty input");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) acc += cost_p(sa[i] - sb[i], p);
  acc /= static_cast<double>(sa.size());
  return p == 1 ? acc : std::sqrt(acc);
}

// Exact W_p between empirical measures of sizes n and m: piecewise integration
// of the quantile gap over the <= n+m-1 constancy intervals. Breakpoints are
// compared in integer arithmetic so the partition is exact.
inline double w_p_quantile(std::span<const double> a, std::span<const double> b, int p) {
  require_p(p);
  if (a.empty() || b.empty()) throw std::invalid_argument("w_p_quantile: empty input");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const std::size_t n = sa.size(), m = sb.size();
  double acc = 0.0;
  std::size_t ia = 0, ib = 0;
  std::uint64_t pos = 0;  // current u in units of 1/(n*m)
  while (ia < n && ib < m) {
    const std::uint64_t next_a = static_cast<std::uint64_t>(ia + 1) * m;
    const std::uint64_t next_b = static_cast<std::uint64_t>(ib + 1) * n;
    const std::uint64_t next = std::min(next_a, next_b);
    acc += static_cast<double>(next - pos) * cost_p(sa[ia] - sb[ib], p);
    pos = next;
    if (next == next_a) ++ia;
    if (next == next_b) ++ib;
  }
  acc /= static_cast<double>(n) * static_cast<double>(m);
  return p == 1 ? acc : std::sqrt(acc);
}

struct WassersteinReport {
  int p = 1;
  double value = 0.0;
  std::size_t size_a = 0;
  std::size_t size_b = 0;
  std::string method;  // sorted-equal | quantile-grid | vs-analytic
};

inline WassersteinReport w_p_report(std::span<const double> a, std::span<const double> b, int p) {
  WassersteinReport rep{p, 0.0, a.size(), b.size(), a.size() == b.size() ? "sorted-equal" : "quantile-grid"};
  rep.value = a.size() == b.size() ? w_p_sorted(a, b, p) : w_p_quantile(a, b, p);
  return rep;
}

// W_p^p between the empirical measure of a sample and an analytic law:
// per quantile cell, integrate |x_(i) - Q(u)|^p du, splitting at F(x_(i)) and
// at the law's own quantile jumps so every piece is smooth.
inline double wpp_vs_analytic(std::span<const double> sample, const InitialLaw& mu, int p,
                              double tol = 1e-11) {
  require_p(p);
  if (sample.empty()) throw std::invalid_argument("wpp_vs_analytic: empty sample");
  std::vector<double> xs(sample.begin(), sample.end());
  std::sort(xs.begin(), xs.end());
  const auto jumps = mu.quantile_jump_levels();
  const double n = static_cast<double>(xs.size());
  constexpr double kEdge = 1e-12;  // quantiles can diverge at 0 and 1
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = xs[i];
    double lo = std::max(static_cast<double>(i) / n, kEdge);
    const double hi = std::min(static_cast<double>(i + 1) / n, 1.0 - kEdge);
    if (!(lo < hi)) continue;
    std::vector<double> cuts{lo};
    const double fx = mu.cdf(x);
    if (fx > lo && fx < hi) cuts.push_back(fx);
    for (double w : jumps)
      if (w > lo && w < hi) cuts.push_back(w);
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      acc += adaptive_simpson(
          [&](double u) { return cost_p(x - mu.quantile(std::clamp(u, kEdge, 1.0 - kEdge)), p); },
          cuts[k], cuts[k + 1], tol);
    }
  }
  return acc;
}

inline double moment_q(std::span<const double> sample, double q) {
  if (!(q >= 0.0)) throw std::domain_error("moment_q: q must be >= 0");
  if (sample.empty()) throw std::invalid_argument("moment_q: empty sample");
  double s = 0.0;
  for (double x : sample) s += std::pow(std::abs(x), q);
  return s / static_cast<double>(sample.size());
}

// eps_{n,p}(mu) = E W_p^p(empirical of n iid mu-draws, mu), by Monte Carlo.
inline MeanSe eps_n_p_detail(const InitialLaw& mu, std::size_t n, int p, std::size_t reps,
                             CounterRng& rng) {
  require_p(p);
  if (n == 0 || reps == 0) throw std::invalid_argument("eps_n_p: need n >= 1 and reps >= 1");
  std::vector<double> vals(reps);
  std::vector<double> draw(n);
  for (std::size_t r = 0; r < reps; ++r) {
    for (auto& x : draw) x = mu.sample(rng);
    vals[r] = wpp_vs_analytic(draw, mu, p);
  }
  return mean_se(vals);
}

inline double eps_n_p(const InitialLaw& mu, std::size_t n, int p, std::size_t reps, CounterRng& rng) {
  return eps_n_p_detail(mu, n, p, reps, rng).mean;
}

struct Lemma7Report {
  double lhs = 0.0;
  double rhs = 0.0;
  double lhs_se = 0.0;
  double rhs_se = 0.0;
  bool holds = false;
};

// Checks  2^{1-p} E W_p^p(emp(Y), mu)
//           <= (kn/m) (W_p^p(law^n(Y), mu^n) + eps_{n,p}(mu))
//            + (l/m)  (W_p^p(law^l(Y), mu^l) + eps_{l,p}(mu)),  m = kn + l.
// The joint-law terms are not computable, so they are replaced by the
// sorted-block coupling cost E (1/n) sum |Y_(j) - Z_(j)|^p with Z iid mu,
// a valid coupling and therefore an upper bound; this only makes the reported
// inequality harder to satisfy.
inline Lemma7Report lemma7_check(const std::function<std::vector<double>(CounterRng&)>& gen,
                                 const InitialLaw& mu, std::size_t n, int p, std::size_t reps,
                                 CounterRng& rng) {
  require_p(p);
  std::vector<double> probe = gen(rng);
  const std::size_t m = probe.size();
  if (n == 0 || n > m) throw std::invalid_argument("lemma7_check: need 1 <= n <= m");
  const std::size_t k = m / n, l = m - k * n;

  auto block_cost = [&](std::size_t block) {
    std::vector<double> y = gen(rng);
    if (y.size() != m) throw std::invalid_argument("lemma7_check: generator size changed");
    y.resize(block);
    std::vector<double> z(block);
    for (auto& v : z) v = mu.sample(rng);
    std::sort(y.begin(), y.end());
    std::sort(z.begin(), z.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < block; ++i) acc += cost_p(y[i] - z[i], p);
    return acc / static_cast<double>(block);
  };

  std::vector<double> lhs_vals(reps), joint_n(reps), eps_n(reps), joint_l, eps_l;
  if (l > 0) {
    joint_l.resize(reps);
    eps_l.resize(reps);
  }
  // The quadrature only needs to sit far below the Monte Carlo noise.
  constexpr double kTol = 1e-8;
  std::vector<double> iid(n), iid_l(l);
  for (std::size_t r = 0; r < reps; ++r) {
    std::vector<double> y = gen(rng);
    std::sort(y.begin(), y.end());
    lhs_vals[r] = wpp_vs_analytic(y, mu, p, kTol);
    joint_n[r] = block_cost(n);
    for (auto& v : iid) v = mu.sample(rng);
    eps_n[r] = wpp_vs_analytic(iid, mu, p, kTol);
    if (l > 0) {
      joint_l[r] = block_cost(l);
      for (auto& v : iid_l) v = mu.sample(rng);
      eps_l[r] = wpp_vs_analytic(iid_l, mu, p, kTol);
    }
  }

  const double scale = std::pow(2.0, 1.0 - static_cast<double>(p));
  const auto lhs = mean_se(lhs_vals);
  const auto jn = mean_se(joint_n), en = mean_se(eps_n);
  const double wn = static_cast<double>(k * n) / static_cast<double>(m);
  Lemma7Report rep;
  rep.lhs = scale * lhs.mean;
  rep.lhs_se = scale * lhs.se;
  rep.rhs = wn * (jn.mean + en.mean);
  double rhs_var = wn * wn * (jn.se * jn.se + en.se * en.se);
  if (l > 0) {
    const auto jl = mean_se(joint_l), el = mean_se(eps_l);
    const double wl = static_cast<double>(l) / static_cast<double>(m);
    rep.rhs += wl * (jl.mean + el.mean);
    rhs_var += wl * wl * (jl.se * jl.se + el.se * el.se);
  }
  rep.rhs_se = std::sqrt(rhs_var);
  rep.holds = rep.lhs <= rep.rhs + 3.0 * std::sqrt(rep.lhs_se * rep.lhs_se + rhs_var);
  return rep;
}

struct RateFitResult {
  double gamma_hat = 0.0;  // negated slope of log value against log N
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t n_points = 0;
};

struct FitPoint {
  double n;
  double value;
};

inline RateFitResult ols_log_fit(std::span<const FitPoint> pts,
                                 const std::function<double(double)>& x_of) {
  if (pts.size() < 3) throw std::invalid_argument("fit: need at least 3 points");
  for (const auto& pt : pts)
    if (!(pt.value > 0.0)) throw std::invalid_argument("fit: values must be positive");
  double sx = 0, sy = 0;
  for (const auto& pt : pts) {
    sx += x_of(pt.n);
    sy += std::log(pt.value);
  }
  const double nn = static_cast<double>(pts.size());
  const double mx = sx / nn, my = sy / nn;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& pt : pts) {
    const double dx = x_of(pt.n) - mx, dy = std::log(pt.value) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit: degenerate design (all abscissae equal)");
  const double slope = sxy / sxx;
  RateFitResult out;
  out.n_points = pts.size();
  out.gamma_hat = -slope;
  out.intercept = my - slope * mx;
  const double ss_res = syy - slope * sxy;
  out.r_squared = syy > 0.0 ? std::max(0.0, 1.0 - ss_res / syy) : 1.0;
  return out;
}

// OLS of log value against log N; gamma_hat estimates the N^-gamma exponent.
inline RateFitResult fit_power_law(std::span<const FitPoint> pts) {
  return ols_log_fit(pts, [](double n) { return std::log(n); });
}

// OLS of log value against t; gamma_hat estimates the e^{-gamma t} decay rate.
inline RateFitResult fit_exp_decay(std::span<const FitPoint> pts) {
  return ols_log_fit(pts, [](double t) { return t; });
}

}  // namespace kaclab
