#pragma once

// Run configuration. A run is described by one JSON document: defaults,
// overlaid by a config file, overlaid by command-line flags. The merged
// document is what gets echoed next to the outputs, so any output
// directory can be regenerated from its config.json.

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "rfflab/dynamics.hpp"
#include "rfflab/field.hpp"
#include "rfflab/harness.hpp"
#include "rfflab/limit_sde.hpp"

namespace rfflab {

using json = nlohmann::json;

inline json default_run_config() {
  return json{
      {"seed", 42},
      {"dim", 4},
      {"workers", 0},
      {"field", {{"family", "uniform"}, {"R", 1.0}, {"A", 0.5}, {"m", 3.0}, {"mixtureWeight", 0.5}, {"enforceC2", true}}},
      {"dynamics",
       {{"model", "X"},
        {"v0", 10.0},
        {"t_max", 1000.0},
        {"h0", 0.0},
        {"v_min", 1.0},
        {"trap_patience", 100.0},
        {"max_segments", 1000000},
        {"exact_free_flight", false},
        {"dense_spacing", 0.0},
        {"schedule", {{"first", 1.0}, {"ratio", 2.0}}}}},
      {"limit",
       {{"sigma", 1.0}, {"lambda", 1.0}, {"t", 1.0}, {"n", 10000}, {"start_speed", 1e-6}, {"start_energy", 1e-6},
        {"h", 1e-4}, {"energy_kappa", 0.3}, {"h_max", 1e-3}, {"kappa", 0.01}}},
      {"ensemble",
       {{"trajectories", 1}, {"target_used", 0}, {"fit_from", 0.0}, {"fit_to", 0.0}, {"envelope_delta", 0.2},
        {"scan_intersections", false}}},
      {"check", json::object()},
  };
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config file " + path + ": " + e.what());
  }
}

/// RFC 7386 merge: objects merge key by key, everything else is replaced.
inline json merged(json base, const json& patch) {
  base.merge_patch(patch);
  return base;
}

inline void validate_run_config(const json& c) {
  const int d = c.at("dim").get<int>();
  if (d < 4) throw std::invalid_argument("--dim " + std::to_string(d) + ": d >= 4 is required (the scaling limit is proven for d >= 4)");
  if (d > 6) throw std::invalid_argument("--dim " + std::to_string(d) + ": supported dimensions are 4..6");
  const auto& f = c.at("field");
  if (!(f.at("R").get<double>() > 0.0)) throw std::invalid_argument("field.R must be positive");
  if (!(f.at("A").get<double>() >= 0.0)) throw std::invalid_argument("field.A must be >= 0");
  const auto& dyn = c.at("dynamics");
  if (!(dyn.at("v0").get<double>() > 0.0)) throw std::invalid_argument("dynamics.v0 must be positive");
  if (!(dyn.at("t_max").get<double>() > 0.0)) throw std::invalid_argument("dynamics.t_max must be positive");
  if (c.at("ensemble").at("trajectories").get<std::int64_t>() < 1) throw std::invalid_argument("ensemble.trajectories must be >= 1");
}

inline BumpFamily family_from(const json& c) {
  const auto& f = c.at("field");
  const FamilyKind kind = family_kind_from_string(f.at("family").get<std::string>());
  const double R = f.at("R").get<double>(), A = f.at("A").get<double>(), p = f.at("mixtureWeight").get<double>();
  if (!f.at("enforceC2").get<bool>()) return make_family_unbounded(kind, R, A, p);
  return make_family(kind, BumpProfile{R, A, f.at("m").get<double>()}, p);
}

inline std::vector<double> schedule_from(const json& c) {
  const auto& dyn = c.at("dynamics");
  const auto& s = dyn.at("schedule");
  if (s.is_array()) return s.get<std::vector<double>>();
  return geometric_schedule(dyn.at("t_max").get<double>(), s.at("first").get<double>(), s.at("ratio").get<double>());
}

inline IntegratorConfig integrator_from(const json& c) {
  const auto& dyn = c.at("dynamics");
  IntegratorConfig ic;
  ic.h0 = dyn.at("h0").get<double>();
  ic.v_min = dyn.at("v_min").get<double>();
  ic.t_max = dyn.at("t_max").get<double>();
  ic.trap_patience = dyn.at("trap_patience").get<double>();
  ic.max_segments = dyn.at("max_segments").get<std::int64_t>();
  ic.exact_free_flight = dyn.at("exact_free_flight").get<bool>();
  ic.dense_spacing = dyn.at("dense_spacing").get<double>();
  ic.observe = schedule_from(c);
  return ic;
}

inline DiffusionParams diffusion_from(const json& c) {
  const auto& l = c.at("limit");
  return DiffusionParams{c.at("dim").get<int>(), l.at("sigma").get<double>(), l.at("lambda").get<double>()};
}

/// Ensemble description of a run; `model` is "X", "Y", "Z", "limit-V" or "limit-E".
inline EnsembleConfig ensemble_from(const json& c, Model model) {
  EnsembleConfig e;
  e.model = model;
  e.d = c.at("dim").get<int>();
  e.seed = c.at("seed").get<std::uint64_t>();
  e.workers = c.at("workers").get<unsigned>();
  const auto& en = c.at("ensemble");
  e.trajectories = en.at("trajectories").get<std::int64_t>();
  e.target_used = en.at("target_used").get<std::int64_t>();
  e.fit_from = en.at("fit_from").get<double>();
  e.fit_to = en.at("fit_to").get<double>();
  e.envelope_delta = en.at("envelope_delta").get<double>();
  e.scan_intersections = en.at("scan_intersections").get<bool>();
  e.v0 = c.at("dynamics").at("v0").get<double>();
  e.family = family_from(c);
  e.integrator = integrator_from(c);
  e.diffusion = diffusion_from(c);
  const auto& l = c.at("limit");
  e.start_speed = l.at("start_speed").get<double>();
  e.start_energy = l.at("start_energy").get<double>();
  e.energy_h = l.at("h").get<double>();
  e.energy_kappa = l.at("energy_kappa").get<double>();
  e.vpath.h_max = l.at("h_max").get<double>();
  e.vpath.kappa = l.at("kappa").get<double>();
  e.schedule = is_particle(model) ? e.integrator.observe : std::vector<double>{};
  return e;
}

}  // namespace rfflab
