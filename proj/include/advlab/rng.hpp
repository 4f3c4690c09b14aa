#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace advlab {

// splitmix64 step; used to expand seeds and to derive independent streams.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256** seeded through splitmix64. The generator is part of the
// reproducibility contract: the same seed always produces the same stream,
// on every platform, so results keyed by seed are exactly repeatable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64_next(sm);
  }

  std::uint64_t next() {
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

  // Uniform in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; never zero, so it is safe under log().
  double uniform_open0() {
    return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) (Lemire multiply-shift with rejection).
  std::uint64_t below(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t t = (0 - n) % n;
      while (lo < t) {
        m = static_cast<unsigned __int128>(next()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Box-Muller transform; one call yields an independent standard-normal pair.
  std::pair<double, double> normal_pair() {
    const double u1 = uniform_open0();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = kTwoPi * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    auto [a, b] = normal_pair();
    spare_ = b;
    has_spare_ = true;
    return a;
  }

 private:
  static constexpr double kTwoPi = 6.283185307179586476925286766559;
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Hashes (root, stream, a, b) into a fresh seed. Every consumer of
// randomness (shuffling epoch e, attacking batch k of epoch e, ...) draws
// from its own derived stream, so resuming a run mid-way reproduces the
// exact draws of an uninterrupted run without replaying earlier ones.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = 0x8f1bbcdcbfa53e0bULL;
  for (std::uint64_t w : {root, stream, a, b}) {
    h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    std::uint64_t s = h;
    h = splitmix64_next(s);
  }
  return h;
}

inline Rng derive_rng(std::uint64_t root, std::uint64_t stream,
                      std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(derive_seed(root, stream, a, b));
}

// Stream tags for derive_rng / derive_seed, centralized so independent
// consumers of the same root seed can never collide.
namespace streams {
inline constexpr std::uint64_t kShuffle = 1;
inline constexpr std::uint64_t kAttack = 2;
inline constexpr std::uint64_t kEval = 3;
inline constexpr std::uint64_t kDataTrain = 4;
inline constexpr std::uint64_t kDataTest = 5;
inline constexpr std::uint64_t kLandscapeSubsample = 6;
inline constexpr std::uint64_t kLandscapeDirU = 7;
inline constexpr std::uint64_t kLandscapeDirV = 8;
inline constexpr std::uint64_t kLandscapeAttack = 9;
inline constexpr std::uint64_t kRatioProbes = 10;
inline constexpr std::uint64_t kModelInit = 11;
}  // namespace streams

}  // namespace advlab
