#pragma once

// The limiting diffusion for the velocity,
//
//   dV = |V|^{-1/2} (lambda dW + (sigma - lambda) Vhat (Vhat . dW))
//        + ((d-2) sigma^2 - (d-1) lambda^2) V / (2 |V|^3) dt,
//
// the energy E = |V|^2 / 2 it induces,
//
//   dE = sigma (2E)^{1/4} dB + sigma^2 (d-1) / (2 sqrt(2E)) dt,
//
// and the exact law started from 0: E^{3/4} is a Bessel process of
// dimension 2d/3 run at speed a^2 = 9 sqrt(2) sigma^2 / 16, so
// E(t) = (2 a^2 t G)^{2/3} with G ~ Gamma(d/3).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "rfflab/rng.hpp"
#include "rfflab/vec.hpp"

namespace rfflab {

struct DiffusionParams {
  int d = 4;
  double sigma = 1.0;
  double lambda = 1.0;

  void validate() const {
    if (d < 4) throw std::invalid_argument("dimension d must be >= 4 (the scaling limit is proven for d >= 4)");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive (csi condition)");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be >= 0");
  }
};

/// Constants of the limit law.
struct LimitLaw {
  int d = 4;
  double bessel_dim = 8.0 / 3.0;
  /// Radial diffusion scale a = 3 sigma 2^{1/4} / 4 and its square.
  double a = 0.0;
  double a2 = 0.0;
  /// Energy scale c = (9 sigma^2 / (4 sqrt 2))^{2/3} = (2 a^2)^{2/3}.
  double cbar = 0.0;

  static LimitLaw from(const DiffusionParams& p) {
    LimitLaw L;
    L.d = p.d;
    L.bessel_dim = 2.0 * p.d / 3.0;
    L.a = 3.0 * p.sigma * std::pow(2.0, 0.25) / 4.0;
    L.a2 = 9.0 * std::sqrt(2.0) * p.sigma * p.sigma / 16.0;
    L.cbar = std::pow(9.0 * p.sigma * p.sigma / (4.0 * std::sqrt(2.0)), 2.0 / 3.0);
    return L;
  }
};

inline constexpr double kDefaultVFloor = 1e-8;

/// One Euler-Maruyama step of the velocity diffusion with standard normal
/// input `z` (the Brownian increment is sqrt(h) z). A result inside the
/// ball of radius v_floor is reflected radially about v_floor.
template <int D>
Vec<D> em_step_v(const Vec<D>& V, const DiffusionParams& p, double h, const Vec<D>& z,
                 double v_floor = kDefaultVFloor) {
  if (!all_finite(V) || !all_finite(z) || !std::isfinite(h)) throw std::invalid_argument("em_step_v: non-finite input");
  const double v = norm(V);
  if (!(v > 0.0)) throw std::invalid_argument("em_step_v: state must be nonzero");
  const Vec<D> u = V / v;
  const double sh = std::sqrt(h);
  const double proj = dot(u, z);
  const Vec<D> noise = (z * p.lambda + u * ((p.sigma - p.lambda) * proj)) * (sh / std::sqrt(v));
  const double coef = ((p.d - 2) * p.sigma * p.sigma - (p.d - 1) * p.lambda * p.lambda) / (2.0 * v * v * v);
  Vec<D> out = V + noise + V * (coef * h);
  const double r = norm(out);
  if (r < v_floor) {
    if (r > 0.0) out *= (2.0 * v_floor - r) / r;
    else out = u * v_floor;
  }
  return out;
}

/// Floor applied to the energy before evaluating the drift.
inline constexpr double kEnergyFloor = 1e-300;

/// One Euler-Maruyama step of the energy diffusion, reflected at 0.
inline double em_step_energy(double E, const DiffusionParams& p, double h, double z) {
  if (!std::isfinite(E) || !std::isfinite(z) || !std::isfinite(h)) throw std::invalid_argument("em_step_energy: non-finite input");
  if (E < 0.0) throw std::invalid_argument("em_step_energy: energy must be >= 0");
  if (p.sigma == 0.0) return E;
  const double e = std::max(E, kEnergyFloor);
  const double s2e = std::sqrt(2.0 * e);
  const double out = e + p.sigma * std::sqrt(s2e) * std::sqrt(h) * z + p.sigma * p.sigma * (p.d - 1) / (2.0 * s2e) * h;
  return std::abs(out);
}

// ---------------------------------------------------------------------------
// Exact law from 0 and the limiting density

/// Exact samples of E(t) started at 0. Sample i uses the stream
/// derive_key(seed, {i}), so any subrange can be regenerated independently.
inline std::vector<double> exact_energy_sample(double t, const DiffusionParams& p, std::size_t count, std::uint64_t seed) {
  if (!(t > 0.0)) throw std::invalid_argument("exact_energy_sample: t must be positive");
  p.validate();
  const LimitLaw L = LimitLaw::from(p);
  const double scale = 2.0 * L.a2 * t;
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    Stream s(derive_key(seed, {static_cast<std::int64_t>(i)}));
    out[i] = std::pow(scale * s.gamma(p.d / 3.0), 2.0 / 3.0);
  }
  return out;
}

/// P(E(t) <= e) for the process started at 0.
inline double energy_cdf(double e, double t, const DiffusionParams& p) {
  if (e <= 0.0) return 0.0;
  const LimitLaw L = LimitLaw::from(p);
  return boost::math::gamma_p(p.d / 3.0, std::pow(e, 1.5) / (2.0 * L.a2 * t));
}

/// P(|V(t)| <= r) for the process started at 0.
inline double speed_cdf(double r, double t, const DiffusionParams& p) { return energy_cdf(0.5 * r * r, t, p); }

/// p(x) = 3 / (2 Gamma(d/3)) x^{d/2 - 1} exp(-x^{3/2}), the limit density of E(t) / (c t^{2/3}).
inline double limit_density(double x, int d) {
  if (x < 0.0) return 0.0;
  return 1.5 / boost::math::tgamma(d / 3.0) * std::pow(x, 0.5 * d - 1.0) * std::exp(-std::pow(x, 1.5));
}

inline double limit_cdf(double x, int d) {
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(d / 3.0, std::pow(x, 1.5));
}

/// Mode of p: x = ((d - 2) / 3)^{2/3}.
inline double limit_mode(int d) { return std::pow((d - 2) / 3.0, 2.0 / 3.0); }

// ---------------------------------------------------------------------------
// Paths

template <int D>
struct VPath {
  std::vector<double> t;
  std::vector<Vec<D>> v;
};

struct EnergyPath {
  std::vector<double> t;
  std::vector<double> e;
};

/// (t, v) -> (t / c^3, v / c).
template <int D>
VPath<D> self_similarity_transform(const VPath<D>& path, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("self_similarity_transform: c must be positive");
  VPath<D> out;
  out.t.reserve(path.t.size());
  out.v.reserve(path.v.size());
  const double c3 = c * c * c;
  for (double t : path.t) out.t.push_back(t / c3);
  for (const auto& v : path.v) out.v.push_back(v / c);
  return out;
}

/// (t, E) -> (t / c^3, E / c^2).
inline EnergyPath self_similarity_transform(const EnergyPath& path, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("self_similarity_transform: c must be positive");
  EnergyPath out;
  const double c3 = c * c * c;
  for (double t : path.t) out.t.push_back(t / c3);
  for (double e : path.e) out.e.push_back(e / (c * c));
  return out;
}

/// Cumulative trapezoid integral of the velocity path, starting at 0.
template <int D>
std::vector<Vec<D>> integrate_position(const VPath<D>& path) {
  if (path.t.size() != path.v.size()) throw std::invalid_argument("integrate_position: size mismatch");
  std::vector<Vec<D>> x(path.t.size());
  for (std::size_t i = 1; i < path.t.size(); ++i) {
    const double dt = path.t[i] - path.t[i - 1];
    if (!(dt > 0.0)) throw std::invalid_argument("integrate_position: time grid must be increasing");
    x[i] = x[i - 1] + (path.v[i] + path.v[i - 1]) * (0.5 * dt);
  }
  return x;
}

/// Step control for velocity paths. Near the origin the noise coefficient
/// |V|^{-1/2} blows up, so the step is tied to the local time scale:
/// h = min(h_max, kappa |V|^3 / sigma^2).
struct VPathConfig {
  double h_max = 1e-3;
  double kappa = 0.01;
  double v_floor = kDefaultVFloor;
};

/// Velocity path from `start`, recorded exactly at the increasing times in
/// `grid` (all > 0). Noise from the stream derive_key(seed, {path_index}).
template <int D>
VPath<D> simulate_v_path(const DiffusionParams& p, const Vec<D>& start, const std::vector<double>& grid,
                         std::uint64_t seed, std::int64_t path_index, const VPathConfig& cfg = {}) {
  p.validate();
  if (p.d != D) throw std::invalid_argument("simulate_v_path: dimension mismatch");
  Stream s(derive_key(seed, {path_index}));
  VPath<D> out;
  Vec<D> V = start;
  double t = 0.0;
  const double s2 = std::max(p.sigma * p.sigma, p.lambda * p.lambda);
  for (double target : grid) {
    if (!(target > t)) {
      if (target == t) {
        out.t.push_back(t);
        out.v.push_back(V);
        continue;
      }
      throw std::invalid_argument("simulate_v_path: grid must be increasing");
    }
    while (t < target) {
      const double v = norm(V);
      double h = std::min(cfg.h_max, cfg.kappa * v * v * v / s2);
      bool last = false;
      if (t + h >= target) {
        h = target - t;
        last = true;
      }
      V = em_step_v(V, p, h, s.normal_vec<D>(), cfg.v_floor);
      t = last ? target : t + h;
    }
    out.t.push_back(t);
    out.v.push_back(V);
  }
  return out;
}

/// Energy path from E0 recorded at the times in `grid`. The step is
/// min(h, kappa E^{3/2} / sigma^2): near 0 the drift ~ E^{-1/2} is singular
/// and a fixed step overshoots the natural scale E ~ t^{2/3} (kappa = 0
/// gives the fixed step h).
inline EnergyPath simulate_energy_path(const DiffusionParams& p, double E0, const std::vector<double>& grid, double h,
                                       std::uint64_t seed, std::int64_t path_index, double kappa = 0.3) {
  p.validate();
  if (!(h > 0.0)) throw std::invalid_argument("simulate_energy_path: h must be positive");
  Stream s(derive_key(seed, {path_index}));
  EnergyPath out;
  double E = E0, t = 0.0;
  for (double target : grid) {
    if (target < t) throw std::invalid_argument("simulate_energy_path: grid must be increasing");
    while (t < target) {
      double step = h;
      if (kappa > 0.0) step = std::min(h, std::max(kappa * E * std::sqrt(E) / (p.sigma * p.sigma), 1e-14));
      bool last = false;
      if (t + step >= target * (1.0 - 1e-14)) {
        step = target - t;
        last = true;
      }
      E = em_step_energy(E, p, step, s.normal());
      t = last ? target : t + step;
    }
    out.t.push_back(t);
    out.e.push_back(E);
  }
  return out;
}

// ---------------------------------------------------------------------------
// First passage of the radial process
//
// |V| solves dv = sigma v^{-1/2} dB + (d-2) sigma^2 / (2 v^2) dt, whose
// scale function is s(v) = -v^{3-d}.

/// P(|V| reaches `up` before `down` | |V(0)| = v0) from the scale function.
inline double hit_probability_oracle(int d, double v0, double up, double down) {
  if (up <= v0) return 1.0;
  if (down >= v0) return 0.0;
  const double k = d - 3.0;
  auto s = [k](double v) { return -std::pow(v, -k); };
  return (s(v0) - s(down)) / (s(up) - s(down));
}

/// Up-crossing probability of the dyadic level process (up = 2v, down = v/2).
inline double dyadic_up_probability(int d) { return hit_probability_oracle(d, 1.0, 2.0, 0.5); }

struct HitEstimate {
  double p_hat = 0.0;
  double se = 0.0;
  std::int64_t hits = 0;
  std::int64_t used = 0;
  std::int64_t discarded = 0;
  double oracle = 0.0;
};

struct HitConfig {
  /// Step h = kappa v^3 / sigma^2 (the radial time scale at speed v).
  double kappa = 1e-5;
  /// Paths still between the barriers at horizon * v0^3 / sigma^2 are discarded.
  double horizon = 1e3;
};

/// Monte Carlo estimate of P(reach 2 v0 before v0 / 2) over EM radial paths.
/// Path i uses stream derive_key(seed, {i}).
inline HitEstimate halfline_hit_probability_check(const DiffusionParams& p, double v0, std::int64_t paths,
                                                  std::uint64_t seed, const HitConfig& cfg = {},
                                                  double up_factor = 2.0, double down_factor = 0.5) {
  p.validate();
  if (!(v0 > 0.0) || paths < 1) throw std::invalid_argument("halfline_hit_probability_check: need v0 > 0 and paths >= 1");
  HitEstimate est;
  const double up = up_factor * v0, down = down_factor * v0;
  est.oracle = hit_probability_oracle(p.d, v0, up, down);
  if (up <= v0) {
    est.p_hat = 1.0;
    est.hits = est.used = paths;
    return est;
  }
  const double s2 = p.sigma * p.sigma;
  const double t_cap = cfg.horizon * v0 * v0 * v0 / s2;
  for (std::int64_t i = 0; i < paths; ++i) {
    Stream s(derive_key(seed, {i}));
    double v = v0, t = 0.0;
    int outcome = -1;
    while (t < t_cap) {
      const double h = cfg.kappa * v * v * v / s2;
      v += p.sigma * std::sqrt(h / v) * s.normal() + (p.d - 2) * s2 / (2.0 * v * v) * h;
      t += h;
      if (v >= up) {
        outcome = 1;
        break;
      }
      if (v <= down) {
        outcome = 0;
        break;
      }
    }
    if (outcome < 0) {
      ++est.discarded;
      continue;
    }
    ++est.used;
    est.hits += outcome;
  }
  if (est.used > 0) {
    est.p_hat = static_cast<double>(est.hits) / static_cast<double>(est.used);
    est.se = std::sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(est.used));
  }
  return est;
}

}  // namespace rfflab
