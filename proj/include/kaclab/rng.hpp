#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace kaclab {

// SplitMix64 finalizer (Steele/Lea/Flood; same mixer as java.util.SplittableRandom).
// All randomness in the library flows through this fixed, platform-independent
// mixer so that seeded runs are reproducible bit-for-bit everywhere.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// Folds a list of 64-bit fields into one key. Injective per step in the new
// field (odd multiplier), so distinct tag tuples give distinct key chains.
inline std::uint64_t seed_chain(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t z = 0x8C91'8572'4E1D'B0C3ULL;
  for (std::uint64_t p : parts) z = mix64(z + kGolden * (p + 1));
  return z;
}

// Counter-mode SplitMix64 stream. Draw i of stream `key` is
// mix64(key + (i+1)*kGolden); streams with distinct keys are disjoint
// hash domains, which is how replicas and forked event streams stay
// statistically independent without coordination.
class CounterRng {
 public:
  CounterRng() : key_(0) {}
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

  // Uniform on [0,1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on [a,b).
  double next_uniform(double a, double b) { return a + (b - a) * next_unit(); }

  // Exp(rate).
  double next_exp(double rate) { return -std::log1p(-next_unit()) / rate; }

  // Uniform on {0,...,n-1}. Floor of a 53-bit uniform: the O(n*2^-53) bias is
  // far below any statistical tolerance used here, and the draw count per call
  // is fixed, which keeps replay simple.
  std::uint64_t next_index(std::uint64_t n) {
    auto k = static_cast<std::uint64_t>(next_unit() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace kaclab
