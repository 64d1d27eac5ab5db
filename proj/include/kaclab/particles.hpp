#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kaclab/events.hpp"
#include "kaclab/laws.hpp"

namespace kaclab {

struct ParticleEnsemble {
  double time = 0.0;
  std::vector<double> states;
  int p = 1;
  std::uint64_t collision_count = 0;
  // Running sum of |x|^p for laws that conserve it exactly per collision
  // (sum of squares for Kac-type rotations, plain sum for exact wealth
  // exchange); NaN when no exact regime applies.
  double conserved_tracker = std::numeric_limits<double>::quiet_NaN();
  ConservationRegime regime = ConservationRegime::None;
};

inline double regime_weight(ConservationRegime regime, double x) {
  return regime == ConservationRegime::SumSquares ? x * x : std::abs(x);
}

inline ParticleEnsemble make_ensemble(const InteractionLaw& law, const InitialLaw& p0, std::size_t n,
                                      CounterRng& init_rng) {
  if (n < 2) throw std::invalid_argument("make_ensemble: need at least 2 particles");
  ParticleEnsemble ens;
  ens.p = law.p();
  ens.regime = law.conservation_regime();
  ens.states.resize(n);
  for (auto& x : ens.states) x = p0.sample(init_rng);
  if (ens.regime != ConservationRegime::None) {
    ens.conserved_tracker = 0.0;
    for (double x : ens.states) ens.conserved_tracker += regime_weight(ens.regime, x);
  }
  return ens;
}

// One binary collision: both updated coordinates are computed from the saved
// pre-collision pair; an in-place update would corrupt the second line.
inline void apply_collision(ParticleEnsemble& ens, const EventAtom& atom) {
  if (atom.t < ens.time)
    throw std::invalid_argument("apply_collision: atom out of time order (t=" + fmt_g17(atom.t) +
                                " before " + fmt_g17(ens.time) + ")");
  const std::size_t i = atom.first_index(), j = atom.second_index();
  const std::size_t n = ens.states.size();
  if (i >= n || j >= n || i == j) throw std::invalid_argument("apply_collision: bad particle indices");
  const double xi = ens.states[i], xj = ens.states[j];
  const double ni = atom.alpha[0] * xi + atom.alpha[1] * xj;
  const double nj = atom.alpha[2] * xj + atom.alpha[3] * xi;
  if (!std::isfinite(ni) || !std::isfinite(nj))
    throw std::runtime_error("apply_collision: state overflow at collision " +
                             std::to_string(ens.collision_count));
  if (ens.regime != ConservationRegime::None) {
    ens.conserved_tracker += regime_weight(ens.regime, ni) + regime_weight(ens.regime, nj) -
                             regime_weight(ens.regime, xi) - regime_weight(ens.regime, xj);
  }
  ens.states[i] = ni;
  ens.states[j] = nj;
  ens.time = atom.t;
  ++ens.collision_count;
}

// One Nanbu-type event: a single particle updates, the partner only gets
// read. The atom's two views realize the symmetrized pair law -- fractional
// part of sigma decides which side's (l, r) pair fires.
inline void apply_nanbu_event(ParticleEnsemble& ens, const EventAtom& atom) {
  if (atom.t < ens.time) throw std::invalid_argument("apply_nanbu_event: atom out of time order");
  const std::size_t n = ens.states.size();
  const std::size_t i = atom.first_index(), j = atom.second_index();
  if (i >= n || j >= n || i == j) throw std::invalid_argument("apply_nanbu_event: bad particle indices");
  const bool rho_side = (atom.sigma - std::floor(atom.sigma)) < 0.5;
  const std::size_t target = rho_side ? i : j;
  const std::size_t partner = rho_side ? j : i;
  const double l = rho_side ? atom.alpha[0] : atom.alpha[2];
  const double r = rho_side ? atom.alpha[1] : atom.alpha[3];
  const double nx = l * ens.states[target] + r * ens.states[partner];
  if (!std::isfinite(nx))
    throw std::runtime_error("apply_nanbu_event: state overflow at collision " +
                             std::to_string(ens.collision_count));
  ens.states[target] = nx;
  ens.time = atom.t;
  ++ens.collision_count;
}

struct EnsembleSnapshot {
  double time = 0.0;
  ParticleEnsemble state;
};

inline void check_snapshot_grid(std::span<const double> grid, double t_end) {
  double prev = 0.0;
  for (double g : grid) {
    if (!(g >= prev && g <= t_end))
      throw std::invalid_argument("snapshot grid must be ascending within [0, t_end]");
    prev = g;
  }
}

namespace detail {

template <class Step>
std::vector<EnsembleSnapshot> run_jump_process(ParticleEnsemble ens, double t_end,
                                               std::span<const double> grid, Step&& step) {
  check_snapshot_grid(grid, t_end);
  std::vector<EnsembleSnapshot> snaps;
  snaps.reserve(grid.size());
  std::size_t gi = 0;
  auto flush_until = [&](double t) {
    // Snapshots are left-limits: a grid point equal to the next event time is
    // captured before that event applies.
    while (gi < grid.size() && grid[gi] <= t) {
      EnsembleSnapshot s{grid[gi], ens};
      s.state.time = grid[gi];
      snaps.push_back(std::move(s));
      ++gi;
    }
  };
  for (;;) {
    if (!step(ens, t_end, flush_until)) break;
  }
  flush_until(t_end);
  return snaps;
}

}  // namespace detail

// Bird-type system: initial states iid from P0, then the exact jump chain of
// the driving atoms up to t_end. Optionally records consumed atoms for replay.
inline std::vector<EnsembleSnapshot> run_bird(const InteractionLaw& law, const InitialLaw& p0,
                                              std::size_t n, double t_end, EventStream& stream,
                                              std::span<const double> grid, EventLog* log = nullptr) {
  CounterRng init = stream.derived_rng(seed_domain::kInit);
  ParticleEnsemble ens = make_ensemble(law, p0, n, init);
  return detail::run_jump_process(std::move(ens), t_end, grid,
                                  [&](ParticleEnsemble& e, double te, auto& flush) {
                                    EventAtom atom = stream.next_event(law);
                                    if (atom.t > te) return false;
                                    flush(atom.t);
                                    if (log) log->push(atom);
                                    apply_collision(e, atom);
                                    return true;
                                  });
}

// Nanbu-type variant: one particle updated per event at per-particle rate 1.
// Each stream atom (rate N/2) is consumed at half its timestamp, which is
// exactly a rate-N Poisson stream, so Bird and Nanbu time axes match.
inline std::vector<EnsembleSnapshot> run_nanbu(const InteractionLaw& law, const InitialLaw& p0,
                                               std::size_t n, double t_end, EventStream& stream,
                                               std::span<const double> grid, EventLog* log = nullptr) {
  CounterRng init = stream.derived_rng(seed_domain::kInit);
  ParticleEnsemble ens = make_ensemble(law, p0, n, init);
  ens.regime = ConservationRegime::None;  // one-sided updates do not conserve
  ens.conserved_tracker = std::numeric_limits<double>::quiet_NaN();
  return detail::run_jump_process(std::move(ens), t_end, grid,
                                  [&](ParticleEnsemble& e, double te, auto& flush) {
                                    EventAtom atom = stream.next_event(law);
                                    atom.t *= 0.5;
                                    if (atom.t > te) return false;
                                    flush(atom.t);
                                    if (log) log->push(atom);
                                    apply_nanbu_event(e, atom);
                                    return true;
                                  });
}

}  // namespace kaclab
