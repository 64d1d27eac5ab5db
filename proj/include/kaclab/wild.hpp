#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kaclab/laws.hpp"
#include "kaclab/metrics.hpp"
#include "kaclab/rng.hpp"

namespace kaclab {

class WildBudgetError : public std::runtime_error {
 public:
  explicit WildBudgetError(std::size_t attempted)
      : std::runtime_error("wild sampler exceeded its leaf budget (attempted " +
                           std::to_string(attempted) + " leaves)"),
        attempted_leaves_(attempted) {}
  std::size_t attempted_leaves() const { return attempted_leaves_; }

 private:
  std::size_t attempted_leaves_;
};

struct WildNodeBudget {
  std::size_t max_leaves = 1'000'000;
  static double expected_leaves_hint(double t) { return std::exp(t); }
};

struct WildDraw {
  double value = 0.0;
  std::size_t leaves = 0;
};

// Exact sampler of P_t by unfolding the nonlinear jump process backward over
// an Exp(1) clock: a node with residual time s either survives to a P0 draw
// (clock past s) or branches into two independent subtrees at residual s - E,
// combined with a fresh pair from the symmetrized coefficient law. The
// recursion runs on an explicit stack, accumulating each leaf's P0 draw times
// the product of pair coefficients along its path.
inline WildDraw wild_sample_detail(const InteractionLaw& law, const InitialLaw& p0, double t,
                                   CounterRng& rng, const WildNodeBudget& budget = {}) {
  if (!(t >= 0.0)) throw std::domain_error("wild_sample: t must be >= 0");
  struct Node {
    double residual;
    double weight;
  };
  std::vector<Node> stack;
  stack.push_back({t, 1.0});
  double acc = 0.0;
  std::size_t leaves = 0;
  while (!stack.empty()) {
    const Node node = stack.back();
    stack.pop_back();
    const double clock = rng.next_exp(1.0);
    if (clock > node.residual) {
      if (++leaves > budget.max_leaves) throw WildBudgetError(leaves);
      acc += node.weight * p0.sample(rng);
    } else {
      const auto [a, b] = law.sample_pair_bar(rng);
      const double s = node.residual - clock;
      stack.push_back({s, node.weight * a});
      stack.push_back({s, node.weight * b});
    }
  }
  return {acc, leaves};
}

inline double wild_sample(const InteractionLaw& law, const InitialLaw& p0, double t, CounterRng& rng,
                          const WildNodeBudget& budget = {}) {
  return wild_sample_detail(law, p0, t, rng, budget).value;
}

// Whitelisted fixed points P_t = P0: centered Gaussians under the uniform-angle
// Kac rotation, and point masses under conservative wealth exchange.
inline bool is_analytically_stationary(const InteractionLaw& law, const InitialLaw& p0) {
  if (law.kind() == InteractionLaw::Kind::Kac &&
      law.angle_kind() == InteractionLaw::AngleKind::Uniform &&
      p0.kind() == InitialLaw::Kind::Gaussian)
    return p0.param_a() == 0.0;
  if (law.kind() == InteractionLaw::Kind::Wealth && p0.kind() == InitialLaw::Kind::PointMass)
    return true;
  return false;
}

enum class PoolSource { WildTree, AnalyticStationary, ExternalSample };

// Sorted stand-in for P_t with quantile lookup. Analytic pools additionally
// carry the exact law, so their quantiles are evaluated without discretization.
class ReferencePool {
 public:
  static ReferencePool from_samples(double t, std::vector<double> samples, PoolSource source) {
    if (samples.empty()) throw std::invalid_argument("ReferencePool: need at least one sample");
    std::sort(samples.begin(), samples.end());
    ReferencePool pool;
    pool.t_ = t;
    pool.samples_ = std::move(samples);
    pool.source_ = source;
    return pool;
  }

  static ReferencePool analytic(double t, const InitialLaw& stationary_law, std::size_t m) {
    if (m == 0) throw std::invalid_argument("ReferencePool: need at least one sample");
    std::vector<double> qs(m);
    for (std::size_t k = 0; k < m; ++k)
      qs[k] = stationary_law.quantile((static_cast<double>(k) + 0.5) / static_cast<double>(m));
    ReferencePool pool = from_samples(t, std::move(qs), PoolSource::AnalyticStationary);
    pool.law_ = stationary_law;
    return pool;
  }

  double t() const { return t_; }
  PoolSource source() const { return source_; }
  const std::vector<double>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  const std::optional<InitialLaw>& analytic_law() const { return law_; }

  // Left-continuous empirical quantile samples[ceil(uM)-1]; exact quantile
  // function for analytic pools.
  double quantile(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("pool_quantile: u outside (0,1)");
    if (law_) return law_->quantile(u);
    const double scaled = u * static_cast<double>(samples_.size());
    auto idx = static_cast<std::size_t>(std::ceil(scaled)) - 1;
    if (idx >= samples_.size()) idx = samples_.size() - 1;
    return samples_[idx];
  }

  double draw(CounterRng& rng) const {
    if (law_) return law_->sample(rng);
    return samples_[rng.next_index(samples_.size())];
  }

 private:
  double t_ = 0.0;
  std::vector<double> samples_;
  PoolSource source_ = PoolSource::ExternalSample;
  std::optional<InitialLaw> law_;
};

inline double pool_quantile(const ReferencePool& pool, double u) { return pool.quantile(u); }

inline ReferencePool build_wild_pool(const InteractionLaw& law, const InitialLaw& p0, double t,
                                     std::size_t m, CounterRng& rng, const WildNodeBudget& budget = {}) {
  if (m == 0) throw std::invalid_argument("build_pool: need M >= 1");
  std::vector<double> samples(m);
  for (auto& s : samples) s = wild_sample(law, p0, t, rng, budget);
  return ReferencePool::from_samples(t, std::move(samples), PoolSource::WildTree);
}

// M iid Wild draws, or the analytic quantile grid when P_t = P0 is recognized.
inline ReferencePool build_pool(const InteractionLaw& law, const InitialLaw& p0, double t,
                                std::size_t m, CounterRng& rng, const WildNodeBudget& budget = {}) {
  if (is_analytically_stationary(law, p0)) return ReferencePool::analytic(t, p0, m);
  return build_wild_pool(law, p0, t, m, rng, budget);
}

// eps_{n,p} against a pool: iid resamples from the pool's empirical measure
// (or the exact law for analytic pools), cost by exact quantile integration.
inline MeanSe eps_n_p_detail(const ReferencePool& mu, std::size_t n, int p, std::size_t reps,
                             CounterRng& rng) {
  if (mu.analytic_law()) return eps_n_p_detail(*mu.analytic_law(), n, p, reps, rng);
  if (n == 0 || reps == 0) throw std::invalid_argument("eps_n_p: need n >= 1 and reps >= 1");
  std::vector<double> vals(reps), draw(n);
  for (std::size_t r = 0; r < reps; ++r) {
    for (auto& x : draw) x = mu.draw(rng);
    const double w = w_p_quantile(draw, mu.samples(), p);
    vals[r] = p == 1 ? w : w * w;
  }
  return mean_se(vals);
}

inline double eps_n_p(const ReferencePool& mu, std::size_t n, int p, std::size_t reps, CounterRng& rng) {
  return eps_n_p_detail(mu, n, p, reps, rng).mean;
}

// ---------------------------------------------------------------------------
// Pool providers: how a coupled run looks up P_t at an event time.
// ---------------------------------------------------------------------------

class PoolProvider {
 public:
  virtual ~PoolProvider() = default;
  virtual std::shared_ptr<const ReferencePool> at(double t) const = 0;
};

class FixedPoolProvider final : public PoolProvider {
 public:
  explicit FixedPoolProvider(ReferencePool pool)
      : pool_(std::make_shared<const ReferencePool>(std::move(pool))) {}
  std::shared_ptr<const ReferencePool> at(double) const override { return pool_; }

 private:
  std::shared_ptr<const ReferencePool> pool_;
};

// Memoizes Wild pools on a time grid of step delta (documented O(delta) bias),
// or builds at exact event times when exact_times is set. Analytic stationary
// pairs collapse to a single exact pool. Pool contents depend only on
// (seed, grid key), never on which thread asks first.
class GridPoolProvider final : public PoolProvider {
 public:
  GridPoolProvider(InteractionLaw law, InitialLaw p0, std::size_t pool_size, double time_step,
                   std::uint64_t seed, bool exact_times = false, WildNodeBudget budget = {})
      : law_(std::move(law)),
        p0_(std::move(p0)),
        pool_size_(pool_size),
        delta_(time_step),
        seed_(seed),
        exact_times_(exact_times),
        budget_(budget) {
    if (pool_size_ == 0) throw std::invalid_argument("GridPoolProvider: pool size must be >= 1");
    if (!(delta_ > 0.0)) throw std::invalid_argument("GridPoolProvider: time step must be positive");
    if (is_analytically_stationary(law_, p0_))
      stationary_ = std::make_shared<const ReferencePool>(ReferencePool::analytic(0.0, p0_, pool_size_));
  }

  std::shared_ptr<const ReferencePool> at(double t) const override {
    if (stationary_) return stationary_;
    if (exact_times_) {
      CounterRng rng(seed_chain({seed_, std::bit_cast<std::uint64_t>(t), 0xE4AC7}));
      return std::make_shared<const ReferencePool>(build_wild_pool(law_, p0_, t, pool_size_, rng, budget_));
    }
    const auto key = static_cast<std::int64_t>(std::floor(t / delta_));
    std::lock_guard lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    CounterRng rng(seed_chain({seed_, static_cast<std::uint64_t>(key), 0x96D}));
    auto pool = std::make_shared<const ReferencePool>(
        build_wild_pool(law_, p0_, static_cast<double>(key) * delta_, pool_size_, rng, budget_));
    cache_.emplace(key, pool);
    return pool;
  }

 private:
  InteractionLaw law_;
  InitialLaw p0_;
  std::size_t pool_size_;
  double delta_;
  std::uint64_t seed_;
  bool exact_times_;
  WildNodeBudget budget_;
  std::shared_ptr<const ReferencePool> stationary_;
  mutable std::mutex mu_;
  mutable std::map<std::int64_t, std::shared_ptr<const ReferencePool>> cache_;
};

// ---------------------------------------------------------------------------
// Pool CSV export/import, so expensive pools can be reused across runs.
// ---------------------------------------------------------------------------

inline void write_pool_csv(const ReferencePool& pool, const std::string& model_hash,
                           std::uint64_t seed, std::ostream& os) {
  os << "# kaclab-pool v1,model_hash=" << model_hash << ",t=" << fmt_g17(pool.t())
     << ",M=" << pool.size() << ",seed=" << seed << "\n";
  for (double s : pool.samples()) os << fmt_g17(s) << "\n";
}

inline ReferencePool read_pool_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind("# kaclab-pool v1", 0) != 0)
    throw std::runtime_error("read_pool_csv: missing pool header");
  double t = 0.0;
  if (auto pos = header.find(",t="); pos != std::string::npos) t = std::stod(header.substr(pos + 3));
  std::vector<double> samples;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    samples.push_back(std::stod(line));
  }
  return ReferencePool::from_samples(t, std::move(samples), PoolSource::ExternalSample);
}

}  // namespace kaclab
