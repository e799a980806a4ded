#pragma once

// Counter-based random streams.
//
// Every stochastic object in the library (a field cell, an SDE path, a
// trajectory) owns a `Stream` whose key is a hash of a seed and a tuple of
// integers naming the object. Draw k of a stream is mix64(key + k * gamma),
// so the values depend only on (key, k): no shared state, no dependence on
// the order in which objects are visited, and identical results for any
// number of worker threads. The variate algorithms below are implemented
// here rather than taken from <random> so that output is bit-identical
// across standard library implementations.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "rfflab/vec.hpp"

namespace rfflab {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

/// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Hash a seed and a sequence of (possibly negative) integers into a key.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::int64_t> parts) {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (std::int64_t p : parts) {
    h = mix64(h + kGoldenGamma + static_cast<std::uint64_t>(p) * 0xd1b54a32d192ed03ULL);
  }
  return h;
}

class Stream {
 public:
  constexpr explicit Stream(std::uint64_t key) : key_(key) {}

  constexpr std::uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGoldenGamma);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1).
  double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the Marsaglia polar method; the second variate of
  /// each accepted pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  /// Poisson(mean) by sequential inversion; large means are split into
  /// independent chunks so that exp(-mean) never underflows.
  std::int64_t poisson(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("poisson: mean must be finite and >= 0");
    std::int64_t total = 0;
    while (mean > kPoissonChunk) {
      total += poisson_small(kPoissonChunk, std::exp(-kPoissonChunk));
      mean -= kPoissonChunk;
    }
    return total + poisson_small(mean, std::exp(-mean));
  }

  static constexpr double kPoissonChunk = 64.0;

  /// Poisson(mean) for mean <= kPoissonChunk given exp(-mean); identical
  /// draws to poisson(mean).
  std::int64_t poisson_small(double mean, double exp_neg_mean) {
    if (mean <= 0.0) return 0;
    const double u = uniform();
    double p = exp_neg_mean;
    double cdf = p;
    std::int64_t k = 0;
    while (u >= cdf && k < 10000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
      if (p == 0.0 && cdf <= u) break;  // tail exhausted by rounding
    }
    return k;
  }

  /// Gamma(shape, 1) by Marsaglia-Tsang; shape < 1 uses the boosting identity.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      return g * std::pow(uniform_open(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  template <int D>
  Vec<D> normal_vec() {
    Vec<D> v;
    for (int i = 0; i < D; ++i) v[i] = normal();
    return v;
  }

  /// Uniform on the unit sphere S^{D-1}.
  template <int D>
  Vec<D> unit_vector() {
    for (;;) {
      Vec<D> v = normal_vec<D>();
      const double n = norm(v);
      if (n > 1e-12) return v / n;
    }
  }

  constexpr std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rfflab
