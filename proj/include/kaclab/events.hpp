#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <deque>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "kaclab/laws.hpp"
#include "kaclab/rng.hpp"

namespace kaclab {

// One atom of the driving Poisson measure: time, collision coefficients, and
// the continuous pair (rho, sigma) on C = {(rho,sigma) : floor(rho) != floor(sigma)}.
// The integer parts pick the interacting particles; the fractional parts are
// spare uniforms that the optimal-coupling construction consumes later.
struct EventAtom {
  double t = 0.0;
  std::array<double, 4> alpha{};  // (l, r, lt, rt)
  double rho = 0.0;
  double sigma = 0.0;

  std::size_t first_index() const { return static_cast<std::size_t>(rho); }
  std::size_t second_index() const { return static_cast<std::size_t>(sigma); }
};

namespace seed_domain {
inline constexpr std::uint64_t kAtoms = 0xA70A;
inline constexpr std::uint64_t kInit = 0x1A17;
inline constexpr std::uint64_t kFork = 0xF04B;
}  // namespace seed_domain

// Lazy generator of the atom sequence. Identical (master_seed, stream_id, N)
// give the identical sequence bit-for-bit on any platform.
class EventStream {
 public:
  // rate <= 0 selects the standard N/2. The only place a different rate is
  // used is the one-sided (Nanbu) variant, which needs per-particle rate 1
  // with a single update per atom.
  EventStream(std::size_t n_particles, std::uint64_t master_seed, std::uint64_t stream_id = 0,
              double rate = 0.0)
      : n_(n_particles),
        master_seed_(master_seed),
        stream_id_(stream_id),
        rate_(rate > 0.0 ? rate : 0.5 * static_cast<double>(n_particles)),
        rng_(seed_chain({master_seed, stream_id, seed_domain::kAtoms})) {
    if (n_ < 2) throw std::invalid_argument("EventStream: need at least 2 particles");
  }

  std::size_t n_particles() const { return n_; }
  double clock() const { return clock_; }
  double rate() const { return rate_; }
  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  EventAtom next_event(const InteractionLaw& law) {
    EventAtom atom;
    clock_ += rng_.next_exp(rate_);
    atom.t = clock_;
    atom.alpha = law.sample_alpha(rng_);
    // Ordered distinct integer pair uniform on N(N-1) choices, plus
    // independent fractional parts: exactly the uniform law on C, no rejection.
    const std::uint64_t i = rng_.next_index(n_);
    std::uint64_t j = rng_.next_index(n_ - 1);
    if (j >= i) ++j;
    atom.rho = static_cast<double>(i) + rng_.next_unit();
    atom.sigma = static_cast<double>(j) + rng_.next_unit();
    return atom;
  }

  // Stream for auxiliary draws (initial states, ...) decoupled from the atom
  // sequence, so bookkeeping never perturbs the atoms.
  CounterRng derived_rng(std::uint64_t domain) const {
    return CounterRng(seed_chain({master_seed_, stream_id_, domain}));
  }

  // Statistically independent stream with the same N and rate.
  EventStream fork_independent_copy() {
    const std::uint64_t child_id = seed_chain({master_seed_, stream_id_, seed_domain::kFork, ++forks_});
    return EventStream(n_, master_seed_, child_id, rate_);
  }

 private:
  std::size_t n_;
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  double rate_;
  CounterRng rng_;
  double clock_ = 0.0;
  std::uint64_t forks_ = 0;
};

// A particle's view of one atom: its (l, r) pair and the partner coordinate
// tau in A^i = [0,N) \ [i, i+1).
struct RestrictedEvent {
  double t = 0.0;
  double l = 0.0;
  double r = 0.0;
  double tau = 0.0;
};

// Selects from a replayed log the atoms that make particle i jump. An atom
// with rho-side i contributes (l, r, tau = sigma); one with sigma-side i
// contributes (lt, rt, tau = rho). Each atom shows up in exactly two views.
inline std::vector<RestrictedEvent> restrict_view(std::span<const EventAtom> log, std::size_t i) {
  std::vector<RestrictedEvent> out;
  for (const auto& a : log) {
    if (a.first_index() == i) out.push_back({a.t, a.alpha[0], a.alpha[1], a.sigma});
    if (a.second_index() == i) out.push_back({a.t, a.alpha[2], a.alpha[3], a.rho});
  }
  return out;
}

// Bounded replay log; with a capacity it keeps only the most recent atoms.
class EventLog {
 public:
  explicit EventLog(std::size_t capacity = 0) : capacity_(capacity) {}

  void push(const EventAtom& atom) {
    if (capacity_ > 0 && buf_.size() == capacity_) {
      buf_.pop_front();
      ++dropped_;
    }
    buf_.push_back(atom);
  }

  std::size_t size() const { return buf_.size(); }
  std::uint64_t dropped() const { return dropped_; }

  std::vector<EventAtom> snapshot() const { return {buf_.begin(), buf_.end()}; }

 private:
  std::size_t capacity_;
  std::deque<EventAtom> buf_;
  std::uint64_t dropped_ = 0;
};

inline void write_f64_le(std::ostream& os, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  char bytes[8];
  for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((bits >> (8 * k)) & 0xFF);
  os.write(bytes, 8);
}

// Little-endian records (f64 t, 4 x f64 alpha, f64 rho, f64 sigma).
inline void dump_event_log(std::span<const EventAtom> log, std::ostream& os) {
  for (const auto& a : log) {
    write_f64_le(os, a.t);
    for (double c : a.alpha) write_f64_le(os, c);
    write_f64_le(os, a.rho);
    write_f64_le(os, a.sigma);
  }
}

}  // namespace kaclab
