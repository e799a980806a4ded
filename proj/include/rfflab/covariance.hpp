#pragma once

// The diffusion coefficients of the limit,
//
//   sigma^2 = int E[F_1(0) F_1(t e_1)] dt,   lambda^2 = int E[F_2(0) F_2(t e_1)] dt,
//
// over |t| < 2R (the bumps have support radius R, so the correlation
// vanishes beyond). Two independent routes:
//
//  * Campbell's formula: the correlation of a Poisson superposition equals
//    the single-bump autocorrelation integrated over centres. In
//    coordinates (x along e_1, rho = distance to the axis) this is a 2-D
//    integral evaluated by nested quadrature.
//  * Monte Carlo over field draws, each draw averaging over several
//    well-separated windows along every coordinate axis.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "rfflab/field.hpp"
#include "rfflab/field_tube.hpp"
#include "rfflab/parallel.hpp"
#include "rfflab/stats.hpp"

namespace rfflab {

struct CovarianceEstimate {
  double sigma2 = 0.0;
  double sigma2_err = 0.0;
  double lambda2 = 0.0;
  double lambda2_err = 0.0;
  bool csi_violated = false;
  std::string family;
  std::string method;
  std::int64_t budget = 0;
  std::uint64_t seed = 0;
};

/// The (csi) condition fails when sigma^2 is not significantly positive.
inline bool csi_violated(double sigma2, double sigma2_err) { return !(sigma2 >= 3.0 * sigma2_err) || !(sigma2 > 0.0); }

// ---------------------------------------------------------------------------
// Campbell-formula quadrature

namespace detail {

/// Area of the unit sphere in R^{n+1}.
inline double sphere_area(int n) {
  const double m = 0.5 * (n + 1);
  return 2.0 * std::pow(std::numbers::pi, m) / boost::math::tgamma(m);
}

}  // namespace detail

/// E[F_i(0) F_i(t e_1)] for component i = 1 (longitudinal) or 2 (transverse).
inline double correlation_quadrature(const BumpFamily& family, int d, double t, int component) {
  if (component != 1 && component != 2) throw std::invalid_argument("correlation: component must be 1 or 2");
  if (d < 2) throw std::invalid_argument("correlation: dimension must be >= 2");
  const double R = family.profile.radius, A = family.profile.amplitude;
  t = std::abs(t);
  if (t >= 2.0 * R) return 0.0;

  double w_uniform = 1.0, w_radial = 0.0;
  if (family.kind == FamilyKind::radial_gradient) w_uniform = 0.0, w_radial = 1.0;
  if (family.kind == FamilyKind::mixture) w_uniform = family.mixture_weight, w_radial = 1.0 - family.mixture_weight;

  const double R2 = R * R;
  auto phi2 = [R2](double r2) {
    const double u = 1.0 - r2 / R2;
    return u > 0.0 ? u * u * u : 0.0;
  };
  // Bump centred at -r seen from 0 and from t e_1. Uniform-direction marks
  // average e_i e_i to 1/d; radial marks give the products of the
  // displacements, x (x - t) along the axis and rho^2 / (d - 1) across it.
  auto integrand = [&](double x, double rho) {
    const double rr = rho * rho;
    const double p = phi2(x * x + rr) * phi2((x - t) * (x - t) + rr);
    if (p == 0.0) return 0.0;
    double mark = w_uniform / d;
    if (w_radial > 0.0) mark += w_radial / R2 * (component == 1 ? x * (x - t) : rr / (d - 1));
    return p * mark * std::pow(rho, d - 2);
  };
  using Inner = boost::math::quadrature::gauss<double, 30>;
  auto over_rho = [&](double x) {
    const double m = std::max(x * x, (x - t) * (x - t));
    if (m >= R2) return 0.0;
    const double top = std::sqrt(R2 - m);
    return Inner::integrate([&](double rho) { return integrand(x, rho); }, 0.0, top);
  };
  using Outer = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double lo = t - R, hi = R, mid = 0.5 * t;
  const double s = Outer::integrate(over_rho, lo, mid, 8, 1e-12) + Outer::integrate(over_rho, mid, hi, 8, 1e-12);
  return A * A * detail::sphere_area(d - 2) * s;
}

/// sigma^2 and lambda^2 by integrating the Campbell correlation over t.
inline CovarianceEstimate covariance_quadrature(const BumpFamily& family, int d) {
  using Q = boost::math::quadrature::gauss_kronrod<double, 31>;
  const double R = family.profile.radius;
  CovarianceEstimate out;
  out.sigma2 = 2.0 * Q::integrate([&](double t) { return correlation_quadrature(family, d, t, 1); }, 0.0, 2.0 * R, 6, 1e-11);
  out.lambda2 = 2.0 * Q::integrate([&](double t) { return correlation_quadrature(family, d, t, 2); }, 0.0, 2.0 * R, 6, 1e-11);
  out.csi_violated = !(out.sigma2 > 1e-12 * std::max(out.lambda2, 1e-300));
  out.family = std::string(to_string(family.kind));
  out.method = "quadrature";
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct CovarianceConfig {
  std::int64_t draws = 10000;
  std::uint64_t seed = 1;
  /// Windows per axis line in each draw, spaced 6R apart.
  int windows = 8;
  unsigned workers = 0;
};

namespace detail {

template <int D>
Vec<D> window_origin(int axis, int window, double R) {
  Vec<D> b;
  const double off = 100.0 * R * (axis + 1) / std::sqrt(static_cast<double>(D));
  for (int i = 0; i < D; ++i) b[i] = off;
  b[axis] += 6.0 * R * window;
  return b;
}

/// 8 panels of 8-point Gauss-Legendre on [-2R, 2R].
inline void lag_nodes(double R, std::vector<double>& t, std::vector<double>& w) {
  using G = boost::math::quadrature::gauss<double, 8>;
  const auto& x = G::abscissa();
  const auto& wt = G::weights();
  t.clear();
  w.clear();
  const int panels = 8;
  const double h = 4.0 * R / panels;
  for (int p = 0; p < panels; ++p) {
    const double c = -2.0 * R + (p + 0.5) * h;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double xs[2] = {x[k], -x[k]};
      for (int sgn = 0; sgn < (x[k] == 0.0 ? 1 : 2); ++sgn) {
        t.push_back(c + 0.5 * h * xs[sgn]);
        w.push_back(0.5 * h * wt[k]);
      }
    }
  }
}

}  // namespace detail

/// Monte Carlo E[F_i(0) F_i(t e_1)] with a standard error, averaging over
/// axes and windows within each draw.
template <int D>
MeanSe correlation_at(const BumpFamily& family, double t, int component, const CovarianceConfig& cfg) {
  if (component != 1 && component != 2) throw std::invalid_argument("correlation: component must be 1 or 2");
  const double R = family.profile.radius;
  auto per_draw = parallel_map<double>(cfg.draws, cfg.workers, [&](std::int64_t n) {
    FieldInstance<D> field(family, cfg.seed, n);
    double acc = 0.0;
    for (int k = 0; k < D; ++k) {
      const Vec<D> e = Vec<D>::unit(k);
      for (int w = 0; w < cfg.windows; ++w) {
        const Vec<D> x0 = detail::window_origin<D>(k, w, R);
        const Vec<D> f0 = field.force_at(x0), f1 = field.force_at(x0 + e * t);
        if (component == 1) {
          acc += f0[k] * f1[k];
        } else {
          double s = 0.0;
          for (int j = 0; j < D; ++j)
            if (j != k) s += f0[j] * f1[j];
          acc += s / (D - 1);
        }
      }
    }
    return acc / (D * cfg.windows);
  });
  return mean_se(per_draw);
}

template <int D>
CovarianceEstimate estimate_sigma_lambda(const BumpFamily& family, const CovarianceConfig& cfg) {
  if (cfg.draws < 2) throw std::invalid_argument("estimate_sigma_lambda: need at least 2 draws");
  if (cfg.windows < 1) throw std::invalid_argument("estimate_sigma_lambda: need at least 1 window");
  const double R = family.profile.radius;
  std::vector<double> nodes, weights;
  detail::lag_nodes(R, nodes, weights);

  struct Draw {
    double s = 0.0, l = 0.0;
  };
  auto per_draw = parallel_map<Draw>(cfg.draws, cfg.workers, [&](std::int64_t n) {
    FieldInstance<D> field(family, cfg.seed, n);
    Draw out;
    for (int k = 0; k < D; ++k) {
      const Vec<D> e = Vec<D>::unit(k);
      for (int w = 0; w < cfg.windows; ++w) {
        const Vec<D> x0 = detail::window_origin<D>(k, w, R);
        FieldTube<D> tube(field, 4.5, 0.05);
        (void)tube.force(x0 - e * (2.0 * R), e);  // anchor the tube at the window start
        const Vec<D> f0 = tube.force(x0, e);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
          const Vec<D> f = tube.force(x0 + e * nodes[i], e);
          out.s += weights[i] * f0[k] * f[k];
          double tr = 0.0;
          for (int j = 0; j < D; ++j)
            if (j != k) tr += f0[j] * f[j];
          out.l += weights[i] * tr / (D - 1);
        }
      }
    }
    out.s /= D * cfg.windows;
    out.l /= D * cfg.windows;
    return out;
  });
  std::vector<double> s(per_draw.size()), l(per_draw.size());
  for (std::size_t i = 0; i < per_draw.size(); ++i) {
    s[i] = per_draw[i].s;
    l[i] = per_draw[i].l;
  }
  const MeanSe ms = mean_se(s), ml = mean_se(l);
  CovarianceEstimate out;
  out.sigma2 = ms.mean;
  out.sigma2_err = ms.se;
  out.lambda2 = ml.mean;
  out.lambda2_err = ml.se;
  out.csi_violated = csi_violated(out.sigma2, out.sigma2_err);
  out.family = std::string(to_string(family.kind));
  out.method = "monte-carlo";
  out.budget = cfg.draws;
  out.seed = cfg.seed;
  return out;
}

}  // namespace rfflab
