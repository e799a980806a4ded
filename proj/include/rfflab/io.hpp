#pragma once

// CSV and JSON output. Floating-point values are written as the shortest
// decimal that round-trips, so files are byte-stable across runs.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfflab/covariance.hpp"
#include "rfflab/dynamics.hpp"
#include "rfflab/harness.hpp"
#include "rfflab/limit_sde.hpp"

namespace rfflab {

using json = nlohmann::json;

inline std::string fmt(double x) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

namespace detail {

inline void axis_header(std::ostream& os, char name, int d) {
  for (int i = 1; i <= d; ++i) os << ',' << name << i;
}

template <int D>
void put(std::ostream& os, const Vec<D>& v) {
  for (int i = 0; i < D; ++i) os << ',' << fmt(v[i]);
}

}  // namespace detail

/// t,X1..Xd,V1..Vd,E
template <int D>
void write_trajectory_csv(std::ostream& os, const std::vector<ParticleState<D>>& samples) {
  os << 't';
  detail::axis_header(os, 'X', D);
  detail::axis_header(os, 'V', D);
  os << ",E\n";
  for (const auto& s : samples) {
    os << fmt(s.t);
    detail::put(os, s.X);
    detail::put(os, s.V);
    os << ',' << fmt(s.energy()) << '\n';
  }
}

/// n,tau_n,Y1..Yd,v1..vd,eta_n,xi_norm,max_dev,flags
template <int D>
void write_renewal_csv(std::ostream& os, const std::vector<SegmentRecord<D>>& segments) {
  os << "n,tau_n";
  detail::axis_header(os, 'Y', D);
  detail::axis_header(os, 'v', D);
  os << ",eta_n,xi_norm,max_dev,flags\n";
  for (const auto& s : segments) {
    os << s.n << ',' << fmt(s.tau);
    detail::put(os, s.Y);
    detail::put(os, s.v);
    os << ',' << fmt(s.eta) << ',' << fmt(s.xi_norm) << ',' << fmt(s.max_dev) << ',' << s.flags << '\n';
  }
}

/// t,V1..Vd
template <int D>
void write_vpath_csv(std::ostream& os, const VPath<D>& path) {
  os << 't';
  detail::axis_header(os, 'V', D);
  os << '\n';
  for (std::size_t i = 0; i < path.t.size(); ++i) {
    os << fmt(path.t[i]);
    detail::put(os, path.v[i]);
    os << '\n';
  }
}

/// t,E
inline void write_energy_path_csv(std::ostream& os, const EnergyPath& path) {
  os << "t,E\n";
  for (std::size_t i = 0; i < path.t.size(); ++i) os << fmt(path.t[i]) << ',' << fmt(path.e[i]) << '\n';
}

/// x,ecdf at the sorted sample points.
inline void write_ecdf_csv(std::ostream& os, std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  os << "x,ecdf\n";
  const double n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) os << fmt(samples[i]) << ',' << fmt(static_cast<double>(i + 1) / n) << '\n';
}

/// x,p,cdf on a uniform grid [0, x_max].
inline void write_density_csv(std::ostream& os, int d, double x_max, int points) {
  if (points < 2) throw std::invalid_argument("density table needs at least 2 points");
  os << "x,p,cdf\n";
  for (int i = 0; i < points; ++i) {
    const double x = x_max * i / (points - 1);
    os << fmt(x) << ',' << fmt(limit_density(x, d)) << ',' << fmt(limit_cdf(x, d)) << '\n';
  }
}

inline void write_samples_csv(std::ostream& os, const char* name, const std::vector<double>& x) {
  os << name << '\n';
  for (double v : x) os << fmt(v) << '\n';
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const CovarianceEstimate& c) {
  return {{"sigma2", c.sigma2}, {"sigma2_err", c.sigma2_err}, {"lambda2", c.lambda2}, {"lambda2_err", c.lambda2_err},
          {"csi_violated", c.csi_violated}, {"family", c.family}, {"method", c.method}, {"budget", c.budget},
          {"seed", c.seed}};
}

inline json to_json(const PowerLawFit& f) {
  return {{"exponent", f.exponent}, {"exponent_se", f.exponent_se}, {"ci95", {f.ci_low, f.ci_high}},
          {"intercept", f.intercept}, {"points", f.points}};
}

inline json to_json(const BumpFamily& f) {
  return {{"family", std::string(to_string(f.kind))}, {"R", f.profile.radius}, {"A", f.profile.amplitude},
          {"m", f.profile.c2_bound}, {"mixtureWeight", f.mixture_weight}};
}

inline json to_json(const EnsembleConfig& c) {
  json j = {{"model", std::string(to_string(c.model))}, {"d", c.d}, {"trajectories", c.trajectories},
            {"target_used", c.target_used}, {"seed", c.seed}, {"schedule", c.schedule},
            {"envelope_delta", c.envelope_delta}, {"fit_from", c.fit_from}, {"fit_to", c.fit_to}};
  if (is_particle(c.model)) {
    j["v0"] = c.v0;
    j["field"] = to_json(c.family);
    j["h0"] = c.integrator.h0;
    j["v_min"] = c.integrator.v_min;
    j["trap_patience"] = c.integrator.trap_patience;
    j["exact_free_flight"] = c.integrator.exact_free_flight;
    j["scan_intersections"] = c.scan_intersections;
    if (c.covariance) j["covariance"] = to_json(*c.covariance);
  } else {
    j["sigma"] = c.diffusion.sigma;
    j["lambda"] = c.diffusion.lambda;
    if (c.model == Model::limit_v) {
      j["start_speed"] = c.start_speed;
      j["kappa"] = c.vpath.kappa;
      j["h_max"] = c.vpath.h_max;
    } else {
      j["start_energy"] = c.start_energy;
      j["energy_h"] = c.energy_h;
      j["energy_kappa"] = c.energy_kappa;
    }
  }
  return j;
}

inline json to_json(const EnsembleReport& r) {
  json marg = json::array();
  for (const auto& m : r.marginals)
    marg.push_back({{"t", m.t}, {"mean_energy", m.mean_energy}, {"mean_distance", m.mean_distance}, {"ks_energy", m.ks_energy}});
  json j = {{"schema_version", EnsembleReport::kSchemaVersion},
            {"config", to_json(r.config)},
            {"run", r.run},
            {"used", r.used},
            {"excluded", {{"trapped", r.excluded_trapped}, {"intersecting", r.excluded_intersecting},
                          {"truncated", r.excluded_truncated}, {"failed", r.excluded_failed},
                          {"fraction", r.excluded_fraction()}}},
            {"rates", {{"trapping", r.trapping_rate}, {"intersection", r.intersection_rate},
                       {"near_intersection", r.near_flag_rate}, {"segment_flags", r.segment_flag_rate},
                       {"envelope_violation", r.envelope_violation_fraction}}},
            {"cbar", {{"fitted", r.fitted_cbar}, {"derived", r.derived_cbar}}},
            {"marginals", marg}};
  if (r.energy_fit) j["fits"]["energy"] = to_json(*r.energy_fit);
  if (r.distance_fit) j["fits"]["distance"] = to_json(*r.distance_fit);
  return j;
}

inline json to_json(const KsTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) rows.push_back({{"c", r.c}, {"t_particle", r.t_particle}, {"ks", r.ks}, {"noise_floor", r.noise_floor}});
  return {{"t", t.t}, {"rows", rows}, {"monotone", t.monotone}};
}

inline json to_json(const std::vector<DyadicLevelStats>& levels) {
  json out = json::array();
  for (const auto& s : levels)
    out.push_back({{"level", s.level}, {"up", s.up}, {"down", s.down}, {"p_up", s.p_up},
                   {"mean_sojourn_scaled", s.mean_sojourn_scaled}});
  return out;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

}  // namespace rfflab
