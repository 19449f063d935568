#ifndef RCM_RNG_HPP
#define RCM_RNG_HPP

// Counter-based and stream-split random numbers. Every random quantity in the
// library is a pure function of (seed, stream index, counter), so results do
// not depend on evaluation order or thread count.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <utility>

namespace rcm {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Hash of (seed, stream, counter); the three words are mixed in sequence.
constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream,
                                     std::uint64_t counter) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (stream * 0xD1B54A32D192ED03ULL));
  h = splitmix64(h ^ (counter * 0xABC98388FB8FAC03ULL));
  return h;
}

/// Maps 64 random bits to the open interval (0, 1).
constexpr double to_open01(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

inline double counter_uniform(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t counter) {
  return to_open01(counter_hash(seed, stream, counter));
}

/// Seed of an independent child stream (trajectory k of a batch, shard k, ...).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t k) {
  return counter_hash(master, k, 0x5EEDULL);
}

/// xoshiro256** (Blackman, Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed) {
    std::uint64_t z = seed;
    for (auto& w : s_) {
      z += 0x9E3779B97F4A7C15ULL;
      w = splitmix64(z);
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  double uniform() { return to_open01((*this)()); }

  /// Exp(1) variate.
  double exponential() { return -std::log(uniform()); }

  /// Standard normal via Box-Muller; one draw per call, no caching, so the
  /// stream position is a function of the call count alone.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
};

/// Standard normal from two counter-based uniforms.
inline double counter_normal(std::uint64_t seed, std::uint64_t stream) {
  const double u1 = counter_uniform(seed, stream, 0);
  const double u2 = counter_uniform(seed, stream, 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rcm

#endif  // RCM_RNG_HPP
