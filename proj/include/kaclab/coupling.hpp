#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "kaclab/events.hpp"
#include "kaclab/laws.hpp"
#include "kaclab/metrics.hpp"
#include "kaclab/particles.hpp"
#include "kaclab/wild.hpp"

namespace kaclab {

// The 1D increasing-coupling function G_t^i. The partner coordinate tau picks
// particle j = floor(tau); j's rank r among the N-1 states other than
// `excluded` (ties broken by original index) and the fractional part f of tau
// place it at quantile level (r - 1 + f)/(N - 1), where the reference pool is
// read. Pairing rank-r against that quantile block is the monotone, hence
// W_p-optimal, coupling between the pool's law and the leave-one-out empirical
// measure; f is the within-cell randomization and costs no extra draw.
inline double g_coupling(const ReferencePool& pool, std::span<const double> states,
                         std::size_t excluded, double tau) {
  const std::size_t n = states.size();
  const auto j = static_cast<std::size_t>(tau);
  if (j >= n || j == excluded || !(tau >= 0.0))
    throw std::domain_error("g_coupling: tau outside A^i");
  const double xj = states[j];
  std::size_t rank = 1;  // 1-based among the others
  for (std::size_t m = 0; m < n; ++m) {
    if (m == excluded) continue;
    if (states[m] < xj || (states[m] == xj && m < j)) ++rank;
  }
  const double f = tau - std::floor(tau);
  const double u = (static_cast<double>(rank) - 1.0 + f) / static_cast<double>(n - 1);
  return pool.quantile(u);
}

struct PathPoint {
  double t;
  double x1;
  double u1;
};

// Paired trajectories of the particle system X and the coupled nonlinear
// processes U, driven by the same atoms.
struct CoupledRun {
  int p = 1;
  std::size_t n_particles = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;
  std::string model;
  std::uint64_t collision_count = 0;
  std::vector<double> snapshot_times;
  std::vector<std::vector<double>> x_states;
  std::vector<std::vector<double>> u_states;
  // Running max over event times of |X^1 - U^1|^p, frozen at each snapshot.
  std::vector<double> sup_abs_p;
  double final_sup_abs_p = 0.0;
};

inline double sup_distance_statistic(const CoupledRun& run) { return run.final_sup_abs_p; }

// Builds U alongside X: U starts at the same states, consumes exactly the same
// atoms, and replaces each partner coordinate by its optimally coupled P_t
// sample. Both coupling reads evaluate at the pre-collision X.
inline CoupledRun run_coupled(const InteractionLaw& law, const InitialLaw& p0, std::size_t n,
                              double t_end, EventStream& stream, const PoolProvider& pools,
                              std::span<const double> grid,
                              std::vector<PathPoint>* path_dump = nullptr) {
  check_snapshot_grid(grid, t_end);
  CounterRng init = stream.derived_rng(seed_domain::kInit);
  ParticleEnsemble x = make_ensemble(law, p0, n, init);
  std::vector<double> u = x.states;

  CoupledRun run;
  run.p = law.p();
  run.n_particles = n;
  run.master_seed = stream.master_seed();
  run.stream_id = stream.stream_id();
  run.model = law.describe() + "|" + p0.describe();

  double sup = 0.0;
  std::size_t gi = 0;
  auto flush_until = [&](double t) {
    while (gi < grid.size() && grid[gi] <= t) {
      run.snapshot_times.push_back(grid[gi]);
      run.x_states.push_back(x.states);
      run.u_states.push_back(u);
      run.sup_abs_p.push_back(sup);
      ++gi;
    }
  };
  if (path_dump) path_dump->push_back({0.0, x.states[0], u[0]});
  for (;;) {
    EventAtom atom = stream.next_event(law);
    if (atom.t > t_end) break;
    flush_until(atom.t);
    const std::size_t i = atom.first_index(), j = atom.second_index();
    const auto pool = pools.at(atom.t);
    const double gi_val = g_coupling(*pool, x.states, i, atom.sigma);
    const double gj_val = g_coupling(*pool, x.states, j, atom.rho);
    const double ui_new = atom.alpha[0] * u[i] + atom.alpha[1] * gi_val;
    const double uj_new = atom.alpha[2] * u[j] + atom.alpha[3] * gj_val;
    apply_collision(x, atom);
    u[i] = ui_new;
    u[j] = uj_new;
    sup = std::max(sup, cost_p(x.states[0] - u[0], run.p));
    if (path_dump) path_dump->push_back({atom.t, x.states[0], u[0]});
  }
  flush_until(t_end);
  run.collision_count = x.collision_count;
  run.final_sup_abs_p = sup;
  return run;
}

// First-k marginals of the coupled system U and of the decoupled independent
// system V, which re-routes the sigma-side atoms whose partner lies in the
// first k to an independent copy stream.
struct DecoupledRun {
  int p = 1;
  std::size_t k = 0;
  std::uint64_t collision_count = 0;
  std::vector<double> snapshot_times;
  std::vector<std::vector<double>> u_first_k;
  std::vector<std::vector<double>> v_first_k;
};

struct DecoupledPathPoint {
  double t;
  double x1;
  double u1;
  double v1;
};

inline DecoupledRun run_decoupled(const InteractionLaw& law, const InitialLaw& p0, std::size_t n,
                                  std::size_t k, double t_end, EventStream& primary,
                                  EventStream& copy, const PoolProvider& pools,
                                  std::span<const double> grid,
                                  std::vector<DecoupledPathPoint>* path_dump = nullptr) {
  if (k < 2 || k > n) throw std::invalid_argument("run_decoupled: need 2 <= k <= N");
  if (copy.n_particles() != n) throw std::invalid_argument("run_decoupled: copy stream N mismatch");
  check_snapshot_grid(grid, t_end);
  CounterRng init = primary.derived_rng(seed_domain::kInit);
  ParticleEnsemble x = make_ensemble(law, p0, n, init);
  std::vector<double> u(x.states.begin(), x.states.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<double> v = u;

  DecoupledRun run;
  run.p = law.p();
  run.k = k;
  std::size_t gi = 0;
  auto flush_until = [&](double t) {
    while (gi < grid.size() && grid[gi] <= t) {
      run.snapshot_times.push_back(grid[gi]);
      run.u_first_k.push_back(u);
      run.v_first_k.push_back(v);
      ++gi;
    }
  };

  EventAtom next_primary = primary.next_event(law);
  EventAtom next_copy = copy.next_event(law);
  if (path_dump) path_dump->push_back({0.0, x.states[0], u[0], v[0]});
  for (;;) {
    const bool take_primary = next_primary.t <= next_copy.t;
    const EventAtom atom = take_primary ? next_primary : next_copy;
    if (atom.t > t_end) break;
    flush_until(atom.t);
    if (take_primary) {
      const std::size_t i = atom.first_index(), j = atom.second_index();
      if (i < k || j < k) {
        const auto pool = pools.at(atom.t);
        double ui_new = 0, vi_new = 0, uj_new = 0, vj_new = 0;
        if (i < k) {
          // rho-side atoms are shared by U^i and V^i with the same G value
          const double g = g_coupling(*pool, x.states, i, atom.sigma);
          ui_new = atom.alpha[0] * u[i] + atom.alpha[1] * g;
          vi_new = atom.alpha[0] * v[i] + atom.alpha[1] * g;
        }
        if (j < k) {
          const double g = g_coupling(*pool, x.states, j, atom.rho);
          uj_new = atom.alpha[2] * u[j] + atom.alpha[3] * g;
          // sigma-side atoms stay shared only when the partner is outside
          // the first k; otherwise V's jump comes from the copy stream.
          if (i >= k) vj_new = atom.alpha[2] * v[j] + atom.alpha[3] * g;
        }
        if (i < k) {
          u[i] = ui_new;
          v[i] = vi_new;
        }
        if (j < k) {
          u[j] = uj_new;
          if (i >= k) v[j] = vj_new;
        }
      }
      apply_collision(x, atom);
      next_primary = primary.next_event(law);
    } else {
      // Copy atoms contribute only their sigma-side view, and only when the
      // replaced partner slot lies in the first k.
      const std::size_t i = atom.first_index(), j = atom.second_index();
      if (j < k && i < k) {
        const auto pool = pools.at(atom.t);
        const double g = g_coupling(*pool, x.states, j, atom.rho);
        v[j] = atom.alpha[2] * v[j] + atom.alpha[3] * g;
      }
      next_copy = copy.next_event(law);
    }
    if (path_dump) path_dump->push_back({atom.t, x.states[0], u[0], v[0]});
  }
  flush_until(t_end);
  run.collision_count = x.collision_count;
  return run;
}

}  // namespace kaclab
