#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace vsum {

// Deterministic RNG. std::mt19937_64 has a standardized output sequence, and
// all value transforms below are explicit, so streams are reproducible across
// builds. std::*_distribution is avoided on purpose: its mapping from raw
// engine output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (cosine branch).
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // Uniform integer in [lo, hi], inclusive. Multiply-shift bounded mapping.
  std::int64_t int_range(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t x = engine_();
    const auto wide = static_cast<unsigned __int128>(x) * span;
    return lo + static_cast<std::int64_t>(wide >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(int_range(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Stable sub-stream derivation: mixing is order-sensitive so (seed, a, b)
// and (seed, b, a) give unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t s = detail::splitmix64(seed);
  s = detail::splitmix64(s ^ a);
  s = detail::splitmix64(s ^ b);
  s = detail::splitmix64(s ^ c);
  return s;
}

}  // namespace vsum
