#pragma once

#include <cmath>
#include <cstdint>

namespace feederid {

// SplitMix64 finalizer. Full-avalanche mix of a 64-bit word.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ mix64(stream * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL));
}

inline double u64_to_unit(std::uint64_t x) {
  // 53 mantissa bits -> [0, 1)
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

inline double u64_to_open_unit(std::uint64_t x) {
  // (0, 1): midpoint of each 2^-53 cell, never exactly 0 or 1
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

// Sequential stream generator (splitmix64 state walk). Output sequence is a
// pure function of the seed, independent of platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  // [0, 1)
  double uniform01() { return u64_to_unit(next_u64()); }

  // (0, 1)
  double uniform01_open() { return u64_to_open_unit(next_u64()); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // multiply-shift; bias is < 2^-64 per draw, irrelevant at our scales
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // standard normal via Box-Muller (two draws per call, no caching so the
  // stream position is a pure function of the call count)
  double normal() {
    double u1 = u64_to_open_unit(next_u64());
    double u2 = u64_to_unit(next_u64());
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

 private:
  std::uint64_t state_;
};

// Counter-based generator: every draw is addressed by an explicit counter, so
// parallel or out-of-order generation reproduces the same values for the same
// seed. Used for noise injection and load synthesis.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(mix64(key)) {}

  std::uint64_t u64_at(std::uint64_t counter, std::uint64_t lane = 0) const {
    return mix64(key_ ^ mix64(counter ^ 0x632BE59BD9B4E019ULL) ^
                 mix64(lane * 0xFF51AFD7ED558CCDULL + 0x2545F4914F6CDD1DULL));
  }

  double uniform01_at(std::uint64_t counter, std::uint64_t lane = 0) const {
    return u64_to_unit(u64_at(counter, lane));
  }

  double uniform_at(double lo, double hi, std::uint64_t counter,
                    std::uint64_t lane = 0) const {
    return lo + (hi - lo) * uniform01_at(counter, lane);
  }

  double normal_at(std::uint64_t counter, std::uint64_t lane = 0) const {
    double u1 = u64_to_open_unit(u64_at(counter, 2 * lane));
    double u2 = u64_to_unit(u64_at(counter, 2 * lane + 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

 private:
  std::uint64_t key_;
};

}  // namespace feederid
