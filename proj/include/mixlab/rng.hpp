#pragma once

// Random streams.
//
// Generator family: xoshiro256** (Blackman & Vigna), 256-bit state.
// Stream (seed, i) is seeded by running SplitMix64 from
//     splitmix64_mix(seed) ^ splitmix64_mix(i + 0x632BE59BD9B4E019)
// and taking four consecutive outputs as the xoshiro state. Uniform doubles
// are (next() >> 11) * 2^-53. Every Monte Carlo trial i of an experiment
// uses stream (master_seed, i), so results do not depend on how trials are
// scheduled across workers.

#include <cstdint>
#include <limits>

namespace mixlab {

/// Finalizer of SplitMix64; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  constexpr std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return splitmix64_mix(state_);
  }

 private:
  std::uint64_t state_;
};

/// xoshiro256**; satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0x5EED) noexcept {
    SplitMix64 sm(seed);
    for (auto& w : s_) w = sm.next();
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next(); }

  result_type next() noexcept {
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

  /// Uniform on [0,1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), n >= 1 (Lemire's multiply-shift, unbiased).
  std::uint64_t below(std::uint64_t n) noexcept {
    std::uint64_t x = next();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto l = static_cast<std::uint64_t>(m);
    if (l < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (l < threshold) {
        x = next();
        m = static_cast<__uint128_t>(x) * n;
        l = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

/// Independent stream number `stream` under master seed `seed`.
inline Rng stream_rng(std::uint64_t seed, std::uint64_t stream) noexcept {
  return Rng(splitmix64_mix(seed) ^ splitmix64_mix(stream + 0x632BE59BD9B4E019ULL));
}

}  // namespace mixlab
