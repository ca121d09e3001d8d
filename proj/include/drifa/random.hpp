#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace drifa {

namespace detail {

// splitmix64 finalizer; also used to derive child stream states.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace detail

// Small counter-based PRNG with explicit distributions so that results are
// identical across platforms and standard library versions.  Child streams
// derived from (seed, index) are independent of the order they are used in,
// which keeps data generation and MC sampling reproducible.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : state_(detail::mix64(seed)) {}

  static RandomStream derive(std::uint64_t seed, std::uint64_t index) {
    return RandomStream(detail::mix64(seed) ^ detail::mix64(index ^ 0x5bf03635u));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; one value per call keeps streams simple.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1], avoids log(0)
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Uniform integer in [0, n).  n is expected to be small; modulo bias is
  // below 2^-50 for anything this project draws.
  std::uint64_t uniform_int(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename V>
  void shuffle(std::vector<V>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace drifa
