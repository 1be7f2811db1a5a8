#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace squadplan {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline double bits_to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

/// Sequential generator (splitmix64). Satisfies UniformRandomBitGenerator and
/// produces the same stream on every platform.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double uniform() { return bits_to_unit((*this)()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>((*this)() % span);
  }
  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  int poisson(double lambda) {
    // Knuth; rates here are small (goals, injury counts).
    const double limit = std::exp(-lambda);
    int k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

 private:
  std::uint64_t state_;
};

/// Stateless keyed generator: every draw is a pure function of (seed, keys).
/// Injury draws are keyed by (fixture, player) so that two policies facing the
/// same seed see the same dice for the same player in the same game.
class KeyedRng {
 public:
  explicit KeyedRng(std::uint64_t seed = 0) : seed_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  KeyedRng derive(std::uint64_t stream) const {
    KeyedRng out;
    out.seed_ = splitmix64(seed_ ^ splitmix64(stream + 0x5851F42D4C957F2DULL));
    return out;
  }

  std::uint64_t bits(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    std::uint64_t h = splitmix64(seed_ ^ (a * 0xD6E8FEB86659FD93ULL));
    h = splitmix64(h ^ (b * 0xA0761D6478BD642FULL));
    return splitmix64(h ^ (c * 0xE7037ED1A0B428DBULL));
  }

  double uniform(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    return bits_to_unit(bits(a, b, c));
  }

  double normal(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    double u1 = bits_to_unit(bits(a, b, 2 * c + 101));
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = bits_to_unit(bits(a, b, 2 * c + 102));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t seed_ = 0;
};

}  // namespace squadplan
