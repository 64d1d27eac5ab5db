#pragma once

// Test-only oracles and statistical helpers, kept independent of the library
// implementation paths they cross-check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "kaclab/events.hpp"

namespace testutil {

// Exhaustive assignment minimum of ((1/n) sum |a_i - b_pi(i)|^p)^(1/p) over
// all bijections; the independent optimum w_p_sorted must reproduce.
inline double brute_force_wp(std::span<const double> a, std::span<const double> b, int p) {
  std::vector<std::size_t> perm(b.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = std::abs(a[i] - b[perm[i]]);
      acc += p == 1 ? d : d * d;
    }
    best = std::min(best, acc / static_cast<double>(a.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return p == 1 ? best : std::sqrt(best);
}

// Upper chi-square quantile via the Wilson-Hilferty cube approximation; ample
// for desk-scale goodness-of-fit gates.
inline double chi2_upper_quantile(double df, double z_upper) {
  const double a = 2.0 / (9.0 * df);
  const double c = 1.0 - a + z_upper * std::sqrt(a);
  return df * c * c * c;
}

inline constexpr double kZ99 = 2.3263478740408408;  // standard normal 0.99 quantile

inline std::vector<double> midranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  return rank;
}

inline double pearson_corr(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double spearman_corr(std::span<const double> x, std::span<const double> y) {
  const auto rx = midranks(x), ry = midranks(y);
  return pearson_corr(rx, ry);
}

// |observed/n - p| within z binomial standard errors.
inline bool freq_within(double count, double n, double p, double z) {
  const double se = std::sqrt(p * (1.0 - p) / n);
  return std::abs(count / n - p) <= z * se;
}

inline kaclab::EventAtom make_atom(double t, std::array<double, 4> alpha, double rho, double sigma) {
  kaclab::EventAtom a;
  a.t = t;
  a.alpha = alpha;
  a.rho = rho;
  a.sigma = sigma;
  return a;
}

}  // namespace testutil
