#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

#include "cjm/errors.hpp"

namespace cjm {

namespace detail {

// splitmix64 finalizer (Steele, Lea, Flood 2014); also used as a seed/stream mixer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Derive an independent stream seed from a master seed and a path of integers.
/// The same (seed, path) always maps to the same stream, so per-subject and
/// per-(subsample, chain) generators are reproducible no matter which thread
/// runs them or in what order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = detail::mix64(seed);
  for (std::uint64_t p : path) {
    h = detail::mix64(h ^ detail::mix64(p));
  }
  return h;
}

/// xoshiro256++ with splitmix64 seeding. Distribution samplers are implemented
/// here (not via <random>) so draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) {
      w = detail::mix64(sm);
      sm = w;
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = detail::rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1); rejects the (measure-zero) 0 draw.
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Marsaglia's polar method (spare discarded).
  double normal() {
    while (true) {
      const double u = 2.0 * uniform() - 1.0;
      const double v = 2.0 * uniform() - 1.0;
      const double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) {
        return u * std::sqrt(-2.0 * std::log(s) / s);
      }
    }
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Gamma(shape, rate) via Marsaglia–Tsang; shape < 1 boosted through
  /// Gamma(shape+1) * U^{1/shape}.
  double gamma(double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0)) {
      throw NumericalError("gamma draw requires positive shape and rate");
    }
    if (shape < 1.0) {
      const double u = uniform_open();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    while (true) {
      double x;
      double v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
        return d * v / rate;
      }
    }
  }

  double chi_squared(double df) { return gamma(0.5 * df, 0.5); }

  /// Inverse-gamma with density ∝ x^{-shape-1} exp(-scale/x); the reciprocal
  /// of a Gamma(shape, rate = scale) draw.
  double inverse_gamma(double shape, double scale) { return 1.0 / gamma(shape, scale); }

 private:
  std::uint64_t s_[4];
};

/// Stream tags: keep the seed-derivation paths of unrelated subsystems apart.
namespace stream {
inline constexpr std::uint64_t kSimulate = 0x51;
inline constexpr std::uint64_t kPartition = 0x52;
inline constexpr std::uint64_t kChain = 0x53;
inline constexpr std::uint64_t kBenchSim = 0x54;
inline constexpr std::uint64_t kBenchFit = 0x55;
}  // namespace stream

}  // namespace cjm
