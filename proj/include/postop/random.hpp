#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace postop {

/// Counter-based generator. Draw `n` of stream (key) is
///
///   z  = key + (n + 1) * 0x9E3779B97F4A7C15
///   z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z  = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   out = z ^ (z >> 31)
///
/// (the SplitMix64 finalizer). Any draw can be computed independently, so
/// results do not depend on evaluation order or thread partitioning.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) : key_(key) {}

  static constexpr std::uint64_t mix(std::uint64_t key, std::uint64_t counter) {
    std::uint64_t z = key + (counter + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Sub-stream key, e.g. one per sequence or per case.
  constexpr CounterRng fork(std::uint64_t tag) const { return CounterRng(mix(key_, tag ^ 0xA5A5A5A5ULL)); }

  constexpr std::uint64_t bits(std::uint64_t counter) const { return mix(key_, counter); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n) by multiply-shift.
  std::uint64_t below(std::uint64_t counter, std::uint64_t n) const {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits(counter)) * n) >> 64);
  }

  /// Standard normal via Box-Muller on draws (2c, 2c+1).
  double normal(std::uint64_t counter) const {
    const double u1 = 1.0 - uniform(2 * counter);  // (0, 1]
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  constexpr std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

/// Sequential view over a CounterRng for code that just wants "the next draw".
class RngStream {
 public:
  explicit RngStream(CounterRng rng) : rng_(rng) {}
  double uniform() { return rng_.uniform(n_++); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n) { return rng_.below(n_++, n); }
  double normal() { return rng_.normal(n_++); }

 private:
  CounterRng rng_;
  std::uint64_t n_ = 0;
};

}  // namespace postop
