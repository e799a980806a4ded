#pragma once

// Goodness-of-fit and regression helpers for the verification suites.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace rfflab {

/// sup |ECDF - F| for a continuous reference F. Sorts a copy of the samples.
template <class Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Two-sample statistic sup |ECDF_a - ECDF_b|.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Mean of sqrt(n) KS under the null (sqrt(pi/2) ln 2): the typical size of
/// a one-sample statistic is this over sqrt(n).
inline constexpr double kKsMeanScaled = 0.8687311606361592;

inline double ks_noise_floor(std::size_t n) { return kKsMeanScaled / std::sqrt(static_cast<double>(n)); }
inline double ks_noise_floor(std::size_t n, std::size_t m) {
  return kKsMeanScaled * std::sqrt(1.0 / static_cast<double>(n) + 1.0 / static_cast<double>(m));
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

inline MeanSe mean_se(const std::vector<double>& x) {
  MeanSe out;
  out.n = x.size();
  if (x.empty()) return out;
  double s = 0.0;
  for (double v : x) s += v;
  out.mean = s / static_cast<double>(x.size());
  if (x.size() > 1) {
    double q = 0.0;
    for (double v : x) q += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(q / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
  }
  return out;
}

struct PowerLawFit {
  double exponent = 0.0;
  double intercept = 0.0;  // ln of the prefactor
  double exponent_se = 0.0;
  double ci_low = 0.0, ci_high = 0.0;  // 95% normal approximation
  std::size_t points = 0;
};

/// Least squares of ln v on ln t.
inline PowerLawFit fit_power_law(const std::vector<double>& t, const std::vector<double>& v) {
  if (t.size() != v.size()) throw std::invalid_argument("fit_power_law: size mismatch");
  if (t.size() < 3) throw std::invalid_argument("fit_power_law: need at least 3 points");
  const std::size_t n = t.size();
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(t[i] > 0.0) || !(v[i] > 0.0)) throw std::invalid_argument("fit_power_law: times and values must be positive");
    x[i] = std::log(t[i]);
    y[i] = std::log(v[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_power_law: times must not all be equal");
  PowerLawFit f;
  f.points = n;
  f.exponent = sxy / sxx;
  f.intercept = my - f.exponent * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - f.intercept - f.exponent * x[i];
    rss += r * r;
  }
  f.exponent_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  f.ci_low = f.exponent - 1.96 * f.exponent_se;
  f.ci_high = f.exponent + 1.96 * f.exponent_se;
  return f;
}

}  // namespace rfflab
