#pragma once

// Ensembles of particle or limit paths and the statistics that tie them to
// the limit laws: marginals on a time schedule, KS distances to the
// exact limit law, power-law fits, event rates and dyadic crossings.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "rfflab/covariance.hpp"
#include "rfflab/dynamics.hpp"
#include "rfflab/intersection.hpp"
#include "rfflab/limit_sde.hpp"
#include "rfflab/parallel.hpp"
#include "rfflab/stats.hpp"

namespace rfflab {

enum class Model { particle_x, particle_y, particle_z, limit_v, limit_e };

inline std::string_view to_string(Model m) {
  switch (m) {
    case Model::particle_x: return "X";
    case Model::particle_y: return "Y";
    case Model::particle_z: return "Z";
    case Model::limit_v: return "limit-V";
    case Model::limit_e: return "limit-E";
  }
  return "X";
}

inline Model model_from_string(std::string_view s) {
  if (s == "X" || s == "particle-X") return Model::particle_x;
  if (s == "Y" || s == "particle-Y") return Model::particle_y;
  if (s == "Z" || s == "particle-Z") return Model::particle_z;
  if (s == "limit-V" || s == "V") return Model::limit_v;
  if (s == "limit-E" || s == "E") return Model::limit_e;
  throw std::invalid_argument("unknown model '" + std::string(s) + "' (expected X|Y|Z|limit-V|limit-E)");
}

inline bool is_particle(Model m) { return m == Model::particle_x || m == Model::particle_y || m == Model::particle_z; }

struct EnsembleConfig {
  Model model = Model::particle_x;
  int d = 4;
  /// Trajectories to run; with `target_used` > 0, trajectories are run in
  /// index order until that many non-excluded ones exist (at most
  /// `trajectories` in total) and the first `target_used` are kept.
  std::int64_t trajectories = 200;
  std::int64_t target_used = 0;
  std::uint64_t seed = 1;
  std::vector<double> schedule = geometric_schedule(1e5);
  unsigned workers = 0;

  // Particle models.
  double v0 = 10.0;
  BumpFamily family{};
  IntegratorConfig integrator{};
  /// sigma^2 and lambda^2 of the family, for the KS columns (optional).
  std::optional<CovarianceEstimate> covariance{};
  bool scan_intersections = false;

  // Limit models.
  DiffusionParams diffusion{};
  double start_speed = 1e-6;   // |V(0)| for limit-V
  double start_energy = 1e-6;  // E(0) for limit-E
  VPathConfig vpath{};
  double energy_h = 1e-4;
  double energy_kappa = 0.3;

  // Statistics.
  double envelope_delta = 0.2;
  /// Times in [fit_from, fit_to] enter the power-law fits (0 = whole schedule).
  double fit_from = 0.0, fit_to = 0.0;
};

/// Per-trajectory output kept by the harness.
struct PathSummary {
  std::int64_t index = 0;
  std::vector<double> energy;
  std::vector<double> distance;
  bool trapped = false;
  bool truncated = false;
  bool failed = false;
  std::string error;
  std::int64_t segments = 0;
  std::int64_t near_flags = 0;
  std::int64_t cone_flags = 0;
  std::int64_t eta_undefined = 0;
  std::int64_t steps = 0;
  int start_level = 0;
  std::vector<DyadicCrossing> crossings;

  bool intersecting() const { return near_flags > 0 || cone_flags > 0; }
  bool excluded() const { return failed || trapped || truncated || intersecting(); }
};

struct MarginalStats {
  double t = 0.0;
  double mean_energy = 0.0;
  double mean_distance = 0.0;
  /// KS of E(t) against the limit law at t (NaN when no reference is known).
  double ks_energy = kNaN;
};

struct EnsembleReport {
  static constexpr int kSchemaVersion = 1;
  EnsembleConfig config;
  std::int64_t run = 0;
  std::int64_t used = 0;
  std::int64_t excluded_trapped = 0;
  std::int64_t excluded_intersecting = 0;
  std::int64_t excluded_truncated = 0;
  std::int64_t excluded_failed = 0;
  std::vector<MarginalStats> marginals;
  /// Non-excluded paths, in index order.
  std::vector<PathSummary> paths;
  std::optional<PowerLawFit> energy_fit, distance_fit;
  double envelope_violation_fraction = kNaN;
  double intersection_rate = 0.0;   // fraction of run trajectories with a flag
  double near_flag_rate = 0.0;      // fraction of run trajectories with a near-intersection flag
  double segment_flag_rate = 0.0;   // flagged segments / segments
  double trapping_rate = 0.0;
  /// c fitted from the last schedule time: mean E / (t^{2/3} E[x]) under p.
  double fitted_cbar = kNaN;
  double derived_cbar = kNaN;

  double excluded_fraction() const { return run > 0 ? static_cast<double>(run - used) / static_cast<double>(run) : 0.0; }

  /// Energies of the used paths at schedule index k.
  std::vector<double> energies_at(std::size_t k) const {
    std::vector<double> out;
    out.reserve(paths.size());
    for (const auto& p : paths) out.push_back(p.energy.at(k));
    return out;
  }
};

/// Mean of x under the limit density p: Gamma(d/3 + 2/3) / Gamma(d/3).
inline double limit_mean(int d) { return boost::math::tgamma(d / 3.0 + 2.0 / 3.0) / boost::math::tgamma(d / 3.0); }

namespace detail {

inline void check_ensemble(const EnsembleConfig& cfg) {
  if (cfg.d < 4) throw std::invalid_argument("dimension d must be >= 4 (the scaling limit is proven for d >= 4)");
  if (cfg.trajectories < 1) throw std::invalid_argument("trajectory count must be >= 1");
  if (cfg.schedule.empty()) throw std::invalid_argument("observation schedule is empty");
  for (std::size_t i = 0; i < cfg.schedule.size(); ++i) {
    if (!(cfg.schedule[i] > 0.0)) throw std::invalid_argument("observation times must be positive");
    if (i > 0 && !(cfg.schedule[i] > cfg.schedule[i - 1])) throw std::invalid_argument("observation schedule must be strictly increasing");
  }
  if (is_particle(cfg.model) && !(cfg.v0 > 0.0)) throw std::invalid_argument("|v0| must be positive");
}

template <int D>
PathSummary run_particle(const EnsembleConfig& cfg, std::int64_t i) {
  PathSummary out;
  out.index = i;
  IntegratorConfig ic = cfg.integrator;
  ic.observe = cfg.schedule;
  ic.t_max = cfg.schedule.back();
  if (cfg.scan_intersections && ic.dense_spacing <= 0.0) ic.dense_spacing = 0.5 * cfg.family.profile.radius;
  const std::uint64_t field_seed = derive_key(cfg.seed, {i});
  const Vec<D> v0 = Vec<D>::unit(0) * cfg.v0;
  Trajectory<D> path;
  if (cfg.model == Model::particle_x) {
    FieldInstance<D> field(cfg.family, field_seed, 0);
    path = simulate_x(v0, field, ic);
  } else {
    auto run = simulate_renewal(v0, cfg.family, field_seed, ic,
                                cfg.model == Model::particle_y ? RenewalVariant::Y : RenewalVariant::Z);
    if (cfg.scan_intersections) {
      auto summary = near_self_intersection_scan(run.path.dense, run.segments, cfg.family.profile.radius);
      out.near_flags = summary.near_flags;
      out.cone_flags = summary.cone_flags;
    }
    out.segments = static_cast<std::int64_t>(run.segments.size());
    for (const auto& s : run.segments)
      if (s.flags & kFlagEtaUndefined) ++out.eta_undefined;
    path = std::move(run.path);
  }
  out.trapped = path.trapped;
  out.truncated = path.truncated;
  out.steps = path.steps;
  out.start_level = path.start_level;
  out.crossings = std::move(path.crossings);
  if (path.truncated) return out;  // stopped early; excluded, not failed
  if (path.samples.size() != cfg.schedule.size()) {
    out.failed = true;
    out.error = "missing observations";
    return out;
  }
  for (const auto& s : path.samples) {
    out.energy.push_back(s.energy());
    out.distance.push_back(norm(s.X));
  }
  return out;
}

template <int D>
PathSummary run_limit(const EnsembleConfig& cfg, std::int64_t i) {
  PathSummary out;
  out.index = i;
  if (cfg.model == Model::limit_v) {
    Stream dir(derive_key(cfg.seed, {i, -1}));
    const Vec<D> start = dir.unit_vector<D>() * cfg.start_speed;
    // Position needs the path between observations; integrate on a grid
    // that refines the schedule geometrically.
    std::vector<double> grid;
    double prev = 0.0;
    for (double t : cfg.schedule) {
      const int sub = 64;
      for (int k = 1; k <= sub; ++k) grid.push_back(prev + (t - prev) * k / sub);
      prev = t;
    }
    VPath<D> path = simulate_v_path<D>(cfg.diffusion, start, grid, cfg.seed, i, cfg.vpath);
    VPath<D> with_origin;
    with_origin.t.push_back(0.0);
    with_origin.v.push_back(start);
    with_origin.t.insert(with_origin.t.end(), path.t.begin(), path.t.end());
    with_origin.v.insert(with_origin.v.end(), path.v.begin(), path.v.end());
    const auto x = integrate_position(with_origin);
    for (std::size_t k = 0; k < cfg.schedule.size(); ++k) {
      const std::size_t g = (k + 1) * 64;
      out.energy.push_back(0.5 * norm2(with_origin.v[g]));
      out.distance.push_back(norm(x[g]));
    }
  } else {
    EnergyPath path = simulate_energy_path(cfg.diffusion, cfg.start_energy, cfg.schedule, cfg.energy_h, cfg.seed, i,
                                           cfg.energy_kappa);
    out.energy = path.e;
    out.distance.assign(path.e.size(), kNaN);
  }
  return out;
}

}  // namespace detail

template <int D>
EnsembleReport run_ensemble(const EnsembleConfig& cfg) {
  detail::check_ensemble(cfg);
  if (cfg.d != D) throw std::invalid_argument("run_ensemble: dimension mismatch");
  if (!is_particle(cfg.model)) cfg.diffusion.validate();

  auto one = [&](std::int64_t i) {
    try {
      return is_particle(cfg.model) ? detail::run_particle<D>(cfg, i) : detail::run_limit<D>(cfg, i);
    } catch (const std::exception& e) {
      PathSummary bad;
      bad.index = i;
      bad.failed = true;
      bad.error = e.what();
      return bad;
    }
  };

  std::vector<PathSummary> all;
  if (cfg.target_used > 0) {
    std::int64_t used = 0;
    while (used < cfg.target_used && static_cast<std::int64_t>(all.size()) < cfg.trajectories) {
      const std::int64_t begin = static_cast<std::int64_t>(all.size());
      const std::int64_t count = std::min(cfg.target_used - used, cfg.trajectories - begin);
      auto batch = parallel_map<PathSummary>(count, cfg.workers, [&](std::int64_t k) { return one(begin + k); });
      for (auto& p : batch) {
        if (!p.excluded()) ++used;
        all.push_back(std::move(p));
      }
    }
  } else {
    all = parallel_map<PathSummary>(cfg.trajectories, cfg.workers, one);
  }

  EnsembleReport rep;
  rep.config = cfg;
  rep.run = static_cast<std::int64_t>(all.size());
  std::int64_t flagged = 0, near = 0, seg_total = 0, seg_flagged = 0, trapped = 0;
  for (auto& p : all) {
    if (p.intersecting()) ++flagged;
    if (p.near_flags > 0) ++near;
    if (p.trapped) ++trapped;
    seg_total += p.segments;
    seg_flagged += std::max(p.near_flags, p.cone_flags);
    if (p.failed) ++rep.excluded_failed;
    else if (p.trapped) ++rep.excluded_trapped;
    else if (p.truncated) ++rep.excluded_truncated;
    else if (p.intersecting()) ++rep.excluded_intersecting;
    if (!p.excluded() && (cfg.target_used <= 0 || static_cast<std::int64_t>(rep.paths.size()) < cfg.target_used))
      rep.paths.push_back(std::move(p));
  }
  rep.used = static_cast<std::int64_t>(rep.paths.size());
  if (rep.run > 0) {
    rep.intersection_rate = static_cast<double>(flagged) / static_cast<double>(rep.run);
    rep.near_flag_rate = static_cast<double>(near) / static_cast<double>(rep.run);
    rep.trapping_rate = static_cast<double>(trapped) / static_cast<double>(rep.run);
  }
  if (seg_total > 0) rep.segment_flag_rate = static_cast<double>(seg_flagged) / static_cast<double>(seg_total);

  // Reference law for the energy: exact limit from 0 (limit models) or
  // the scaling limit with sigma from the covariance estimate.
  std::optional<DiffusionParams> ref;
  if (!is_particle(cfg.model)) ref = cfg.diffusion;
  else if (cfg.covariance && !cfg.covariance->csi_violated)
    ref = DiffusionParams{cfg.d, std::sqrt(cfg.covariance->sigma2), std::sqrt(std::max(cfg.covariance->lambda2, 0.0))};
  if (ref) rep.derived_cbar = LimitLaw::from(*ref).cbar;

  std::vector<double> fit_t, fit_e, fit_x;
  for (std::size_t k = 0; k < cfg.schedule.size(); ++k) {
    MarginalStats m;
    m.t = cfg.schedule[k];
    if (rep.used > 0) {
      double se = 0.0, sx = 0.0;
      for (const auto& p : rep.paths) {
        se += p.energy[k];
        sx += p.distance[k];
      }
      m.mean_energy = se / static_cast<double>(rep.used);
      m.mean_distance = sx / static_cast<double>(rep.used);
      if (ref) m.ks_energy = ks_statistic(rep.energies_at(k), [&](double e) { return energy_cdf(e, m.t, *ref); });
      const bool in_window = (cfg.fit_from <= 0.0 || m.t >= cfg.fit_from) && (cfg.fit_to <= 0.0 || m.t <= cfg.fit_to);
      if (in_window) {
        fit_t.push_back(m.t);
        fit_e.push_back(m.mean_energy);
        fit_x.push_back(m.mean_distance);
      }
    }
    rep.marginals.push_back(m);
  }
  if (fit_t.size() >= 3) {
    rep.energy_fit = fit_power_law(fit_t, fit_e);
    if (std::all_of(fit_x.begin(), fit_x.end(), [](double x) { return x > 0.0; })) rep.distance_fit = fit_power_law(fit_t, fit_x);
  }
  if (rep.used > 0) {
    const double T = cfg.schedule.back();
    rep.fitted_cbar = rep.marginals.back().mean_energy / (std::pow(T, 2.0 / 3.0) * limit_mean(cfg.d));
  }
  if (is_particle(cfg.model) && rep.used > 0) {
    std::int64_t bad = 0, total = 0;
    const double dlt = cfg.envelope_delta;
    for (const auto& p : rep.paths)
      for (std::size_t k = 0; k < cfg.schedule.size(); ++k) {
        const double env = cfg.v0 + std::cbrt(cfg.schedule[k]);
        const double speed = std::sqrt(2.0 * p.energy[k]);
        if (speed < std::pow(env, 1.0 - dlt) || speed > std::pow(env, 1.0 + dlt)) ++bad;
        ++total;
      }
    rep.envelope_violation_fraction = static_cast<double>(bad) / static_cast<double>(total);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Particle versus limit

struct KsRow {
  double c = 0.0;
  double t_particle = 0.0;  // c^3 t
  double ks = 0.0;
  double noise_floor = 0.0;
};

struct KsTable {
  double t = 1.0;
  std::vector<KsRow> rows;
  /// Consecutive rows satisfy ks[i+1] <= ks[i] + 2 sqrt(floor_i^2 + floor_{i+1}^2).
  bool monotone = true;
};

/// KS distance between E(c^3 t)/c^2 and the limit energy law at t (started
/// from 0), for each c. Every c^3 t must be a schedule time of the report.
template <class Report>
KsTable compare_particle_to_limit(const Report& rep, const CovarianceEstimate& cov, const std::vector<double>& c_list,
                                  double t = 1.0) {
  if (cov.csi_violated)
    throw std::invalid_argument("compare_particle_to_limit: csi_violated (sigma^2 = " + std::to_string(cov.sigma2) +
                                " is not significantly positive; the family has no diffusive limit)");
  if (rep.used < 1) throw std::invalid_argument("compare_particle_to_limit: no usable trajectories");
  const DiffusionParams p{rep.config.d, std::sqrt(cov.sigma2), std::sqrt(std::max(cov.lambda2, 0.0))};
  KsTable table;
  table.t = t;
  const auto& sched = rep.config.schedule;
  for (double c : c_list) {
    const double tp = c * c * c * t;
    std::size_t k = sched.size();
    for (std::size_t j = 0; j < sched.size(); ++j)
      if (std::abs(sched[j] - tp) <= 1e-9 * tp) k = j;
    if (k == sched.size())
      throw std::invalid_argument("compare_particle_to_limit: c^3 t = " + std::to_string(tp) + " is not on the observation schedule");
    std::vector<double> scaled = rep.energies_at(k);
    for (double& e : scaled) e /= c * c;
    KsRow row;
    row.c = c;
    row.t_particle = tp;
    row.ks = ks_statistic(scaled, [&](double e) { return energy_cdf(e, t, p); });
    row.noise_floor = ks_noise_floor(scaled.size());
    table.rows.push_back(row);
  }
  std::sort(table.rows.begin(), table.rows.end(), [](const KsRow& a, const KsRow& b) { return a.c < b.c; });
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    const auto& a = table.rows[i - 1];
    const auto& b = table.rows[i];
    if (b.ks > a.ks + 2.0 * std::hypot(a.noise_floor, b.noise_floor)) table.monotone = false;
  }
  return table;
}

/// The values of c for which c^3 t lies on the schedule, from t_min on.
inline std::vector<double> c_values_on_schedule(const std::vector<double>& schedule, double t = 1.0, double t_min = 0.0) {
  std::vector<double> out;
  for (double s : schedule)
    if (s >= t_min) out.push_back(std::cbrt(s / t));
  return out;
}

// ---------------------------------------------------------------------------
// Dyadic level crossings

struct DyadicLevelStats {
  int level = 0;
  std::int64_t up = 0;
  std::int64_t down = 0;
  double p_up = kNaN;
  /// Mean time spent at the level between crossings, divided by 2^{3 level}.
  double mean_sojourn_scaled = kNaN;
  std::int64_t sojourns = 0;
};

struct DyadicCrossingLog {
  int start_level = 0;
  std::vector<DyadicCrossing> crossings;
};

inline std::vector<DyadicLevelStats> dyadic_crossing_report(const std::vector<DyadicCrossingLog>& logs) {
  std::map<int, DyadicLevelStats> by_level;
  std::map<int, double> sojourn_sum;
  for (const auto& log : logs) {
    for (std::size_t k = 0; k < log.crossings.size(); ++k) {
      const auto& c = log.crossings[k];
      auto& s = by_level[c.from];
      s.level = c.from;
      if (c.to > c.from) ++s.up;
      else ++s.down;
      if (k > 0) {
        // Level c.from was entered at the previous crossing.
        const double dt = c.t - log.crossings[k - 1].t;
        sojourn_sum[c.from] += dt / std::ldexp(1.0, 3 * c.from);
        ++s.sojourns;
      }
    }
  }
  std::vector<DyadicLevelStats> out;
  for (auto& [level, s] : by_level) {
    if (s.up + s.down > 0) s.p_up = static_cast<double>(s.up) / static_cast<double>(s.up + s.down);
    if (s.sojourns > 0) s.mean_sojourn_scaled = sojourn_sum[level] / static_cast<double>(s.sojourns);
    out.push_back(s);
  }
  return out;
}

template <class Report>
std::vector<DyadicLevelStats> dyadic_crossing_report(const Report& rep) {
  std::vector<DyadicCrossingLog> logs;
  for (const auto& p : rep.paths) logs.push_back({p.start_level, p.crossings});
  return dyadic_crossing_report(logs);
}

/// Dyadic crossings of the limit radial process |V| from v0 up to t_max
/// (EM with h = kappa v^3 / sigma^2; path i uses derive_key(seed, {i})).
inline DyadicCrossingLog limit_radial_crossings(const DiffusionParams& p, double v0, double t_max, std::uint64_t seed,
                                                std::int64_t i, double kappa = 1e-4) {
  p.validate();
  Stream s(derive_key(seed, {i}));
  DyadicTracker tracker(v0);
  double v = v0, t = 0.0;
  const double s2 = p.sigma * p.sigma;
  while (t < t_max) {
    const double h = std::min(kappa * v * v * v / s2, t_max - t);
    v += p.sigma * std::sqrt(h / v) * s.normal() + (p.d - 2) * s2 / (2.0 * v * v) * h;
    v = std::abs(v);
    t += h;
    tracker.update(t, v);
  }
  return {tracker.start_level(), tracker.log()};
}

}  // namespace rfflab
