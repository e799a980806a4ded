#pragma once

// Fixed-dimension vectors and matrices used throughout the library. The
// dimension is a template parameter so that the hot loops (force sums,
// Verlet steps, SDE steps) compile to straight-line code.

#include <array>
#include <cmath>
#include <cstddef>

namespace rfflab {

template <int D>
struct Vec {
  static_assert(D >= 1, "dimension must be positive");
  std::array<double, D> c{};

  static constexpr int dim = D;

  constexpr double& operator[](std::size_t i) { return c[i]; }
  constexpr double operator[](std::size_t i) const { return c[i]; }

  static constexpr Vec zero() { return Vec{}; }
  static constexpr Vec unit(int axis) {
    Vec v{};
    v.c[static_cast<std::size_t>(axis)] = 1.0;
    return v;
  }

  constexpr Vec& operator+=(const Vec& o) {
    for (int i = 0; i < D; ++i) c[i] += o.c[i];
    return *this;
  }
  constexpr Vec& operator-=(const Vec& o) {
    for (int i = 0; i < D; ++i) c[i] -= o.c[i];
    return *this;
  }
  constexpr Vec& operator*=(double s) {
    for (int i = 0; i < D; ++i) c[i] *= s;
    return *this;
  }

  friend constexpr bool operator==(const Vec&, const Vec&) = default;
};

template <int D>
constexpr Vec<D> operator+(Vec<D> a, const Vec<D>& b) { return a += b; }
template <int D>
constexpr Vec<D> operator-(Vec<D> a, const Vec<D>& b) { return a -= b; }
template <int D>
constexpr Vec<D> operator-(Vec<D> a) { return a *= -1.0; }
template <int D>
constexpr Vec<D> operator*(Vec<D> a, double s) { return a *= s; }
template <int D>
constexpr Vec<D> operator*(double s, Vec<D> a) { return a *= s; }
template <int D>
constexpr Vec<D> operator/(Vec<D> a, double s) { return a *= (1.0 / s); }

template <int D>
constexpr double dot(const Vec<D>& a, const Vec<D>& b) {
  double s = 0.0;
  for (int i = 0; i < D; ++i) s += a.c[i] * b.c[i];
  return s;
}

template <int D>
constexpr double norm2(const Vec<D>& a) { return dot(a, a); }

template <int D>
inline double norm(const Vec<D>& a) { return std::sqrt(norm2(a)); }

template <int D>
inline bool all_finite(const Vec<D>& a) {
  for (int i = 0; i < D; ++i)
    if (!std::isfinite(a.c[i])) return false;
  return true;
}

/// Row-major D x D matrix; `m(i, j)` is d F_i / d x_j for Jacobians.
template <int D>
struct Mat {
  std::array<double, D * D> a{};

  constexpr double& operator()(int i, int j) { return a[i * D + j]; }
  constexpr double operator()(int i, int j) const { return a[i * D + j]; }

  constexpr Mat& operator+=(const Mat& o) {
    for (int k = 0; k < D * D; ++k) a[k] += o.a[k];
    return *this;
  }
};

}  // namespace rfflab
