// rfflab: command-line front end.
//
//   rfflab field-stats | simulate | limit | covariance | compare | verify [flags]
//
// Every run merges defaults, an optional --config JSON file and the flags
// (flags win), validates the result, and echoes it as config.json in the
// output directory. Exit codes: 0 success, 1 invalid input, 2 threshold
// breach in --check mode.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rfflab/rfflab.hpp"

namespace fs = std::filesystem;
using namespace rfflab;

namespace {

struct CheckBreach : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flags shared by all subcommands; each lands in the config only if given.
struct Common {
  std::optional<std::string> config_file, out;
  std::optional<unsigned> workers;
  std::optional<std::uint64_t> seed;
  std::optional<int> dim;
  bool check = false;

  void add(CLI::App* app) {
    app->add_option("--config", config_file, "JSON run config (flags override it)");
    app->add_option("--out", out, "output directory (default $RFFLAB_OUTPUT_ROOT/<command>)");
    app->add_option("--workers", workers, "worker threads (0 = available parallelism)");
    app->add_option("--seed", seed, "global seed");
    app->add_option("--dim", dim, "dimension d (4..6)");
    app->add_flag("--check", check, "exit with code 2 when an acceptance threshold is breached");
  }
};

struct FieldFlags {
  std::optional<std::string> family;
  std::optional<double> R, A, m, p;
  bool no_c2 = false;

  void add(CLI::App* app) {
    app->add_option("--family", family, "bump family: uniform | radial | mixture");
    app->add_option("--R", R, "bump support radius");
    app->add_option("--A", A, "bump amplitude");
    app->add_option("--m", m, "C^2 bound (the amplitude is reduced to meet it)");
    app->add_option("--mixture-weight", p, "probability of a uniform-direction bump in the mixture");
    app->add_flag("--no-c2-bound", no_c2, "use the amplitude as given, ignoring --m");
  }
  void apply(json& j) const {
    if (family) j["field"]["family"] = *family;
    if (R) j["field"]["R"] = *R;
    if (A) j["field"]["A"] = *A;
    if (m) j["field"]["m"] = *m;
    if (p) j["field"]["mixtureWeight"] = *p;
    if (no_c2) j["field"]["enforceC2"] = false;
  }
};

struct DynamicsFlags {
  std::optional<std::string> model;
  std::optional<double> v0, t_max, h0, v_min, fit_from, fit_to;
  std::optional<std::int64_t> trajectories, target_used;
  bool free_flight = false, scan = false;

  void add(CLI::App* app) {
    app->add_option("--model", model, "X | Y | Z");
    app->add_option("--v0", v0, "initial speed |v0|");
    app->add_option("--t-max", t_max, "final time");
    app->add_option("--h0", h0, "spatial step bound (0 = 0.05 R)");
    app->add_option("--v-min", v_min, "floor speed in the step rule");
    app->add_option("--trajectories", trajectories, "ensemble size (1 = single trajectory files)");
    app->add_option("--target-used", target_used, "run until this many trajectories are not excluded");
    app->add_option("--fit-from", fit_from, "first time entering the power-law fits");
    app->add_option("--fit-to", fit_to, "last time entering the power-law fits");
    app->add_flag("--exact-free-flight", free_flight, "cross force-free stretches in one step");
    app->add_flag("--scan-intersections", scan, "near-self-intersection scan (Y/Z)");
  }
  void apply(json& j) const {
    if (model) j["dynamics"]["model"] = *model;
    if (v0) j["dynamics"]["v0"] = *v0;
    if (t_max) j["dynamics"]["t_max"] = *t_max;
    if (h0) j["dynamics"]["h0"] = *h0;
    if (v_min) j["dynamics"]["v_min"] = *v_min;
    if (free_flight) j["dynamics"]["exact_free_flight"] = true;
    if (trajectories) j["ensemble"]["trajectories"] = *trajectories;
    if (target_used) j["ensemble"]["target_used"] = *target_used;
    if (fit_from) j["ensemble"]["fit_from"] = *fit_from;
    if (fit_to) j["ensemble"]["fit_to"] = *fit_to;
    if (scan) j["ensemble"]["scan_intersections"] = true;
  }
};

json build_config(const std::string& command, const Common& c, const json& overrides) {
  json cfg = default_run_config();
  if (c.config_file) cfg = merged(cfg, load_json_file(*c.config_file));
  cfg = merged(cfg, overrides);
  if (c.workers) cfg["workers"] = *c.workers;
  if (c.seed) cfg["seed"] = *c.seed;
  if (c.dim) cfg["dim"] = *c.dim;
  cfg["command"] = command;
  validate_run_config(cfg);
  return cfg;
}

fs::path output_dir(const std::string& command, const Common& c) {
  if (c.out) return *c.out;
  const char* root = std::getenv("RFFLAB_OUTPUT_ROOT");
  return fs::path(root && *root ? root : "rfflab-out") / command;
}

void echo_config(const fs::path& dir, const json& cfg) { write_json(dir / "config.json", cfg); }

Model particle_model(const json& cfg) {
  const Model m = model_from_string(cfg.at("dynamics").at("model").get<std::string>());
  if (!is_particle(m)) throw std::invalid_argument("dynamics.model must be X, Y or Z");
  return m;
}

template <class Fn>
auto with_dim(int d, Fn&& fn) {
  switch (d) {
    case 4: return fn(std::integral_constant<int, 4>{});
    case 5: return fn(std::integral_constant<int, 5>{});
    case 6: return fn(std::integral_constant<int, 6>{});
  }
  throw std::invalid_argument("unsupported dimension " + std::to_string(d));
}

void write_marginals(const fs::path& dir, const EnsembleReport& rep) {
  for (std::size_t k = 0; k < rep.marginals.size(); ++k) {
    auto out = open_output(dir / "marginals" / ("E_t" + fmt(rep.marginals[k].t) + ".csv"));
    write_ecdf_csv(out, rep.energies_at(k));
  }
}

/// Threshold checks on an ensemble report from the config's "check" block.
void check_report(const json& cfg, const EnsembleReport& rep) {
  const json& ch = cfg.at("check");
  std::string breach;
  auto range = [&](const char* key, const std::optional<PowerLawFit>& fit) {
    if (!ch.contains(key)) return;
    const auto r = ch.at(key).get<std::vector<double>>();
    if (!fit || fit->exponent < r.at(0) || fit->exponent > r.at(1)) breach += std::string(" ") + key;
  };
  range("energy_exponent", rep.energy_fit);
  range("distance_exponent", rep.distance_fit);
  if (ch.contains("envelope_max") && !(rep.envelope_violation_fraction < ch.at("envelope_max").get<double>()))
    breach += " envelope_max";
  if (ch.contains("ks_max") && !(rep.marginals.back().ks_energy < ch.at("ks_max").get<double>())) breach += " ks_max";
  if (ch.contains("excluded_max") && !(rep.excluded_fraction() < ch.at("excluded_max").get<double>()))
    breach += " excluded_max";
  if (!breach.empty()) throw CheckBreach("threshold breached:" + breach);
}

// ---------------------------------------------------------------------------

template <int D>
json field_stats(const json& cfg, std::int64_t samples) {
  const BumpFamily fam = family_from(cfg);
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  const double R = fam.profile.radius;
  struct Draw {
    double count = 0.0;
    Vec<D> f{};
    double gap = 0.0;
  };
  auto draws = parallel_map<Draw>(samples, cfg.at("workers").get<unsigned>(), [&](std::int64_t i) {
    FieldInstance<D> field(fam, seed, i);
    Draw d;
    CellCoord<D> cell{};
    d.count = static_cast<double>(field.sample_cell(cell).size());
    d.f = field.force_at(Vec<D>{});
    d.gap = field.gap_condition(Vec<D>{}) ? 1.0 : 0.0;
    return d;
  });
  std::vector<double> count, gap;
  std::vector<std::vector<double>> comp(D);
  for (const auto& d : draws) {
    count.push_back(d.count);
    gap.push_back(d.gap);
    for (int i = 0; i < D; ++i) comp[i].push_back(d.f[i]);
  }
  const MeanSe mc = mean_se(count), mg = mean_se(gap);
  json force = json::array();
  for (int i = 0; i < D; ++i) {
    const MeanSe m = mean_se(comp[i]);
    std::vector<double> sq;
    for (double v : comp[i]) sq.push_back(v * v);
    force.push_back({{"mean", m.mean}, {"se", m.se}, {"second_moment", mean_se(sq).mean}});
  }
  const double ball = std::pow(std::numbers::pi, D / 2.0) / std::tgamma(D / 2.0 + 1.0) * std::pow(2.0 * R, D);
  return {{"samples", samples},
          {"cell_count", {{"mean", mc.mean}, {"se", mc.se}, {"expected", std::pow(fam.profile.radius * 2.0, D)}}},
          {"gap_at_origin", {{"fraction", mg.mean}, {"se", mg.se}, {"expected", std::exp(-ball)}}},
          {"force_at_origin", force},
          {"family", to_json(fam)}};
}

int cmd_field_stats(const Common& c, const FieldFlags& ff, std::int64_t samples) {
  json o;
  ff.apply(o);
  o["field_stats"]["samples"] = samples;
  const json cfg = build_config("field-stats", c, o);
  const fs::path dir = output_dir("field-stats", c);
  echo_config(dir, cfg);
  const json res = with_dim(cfg.at("dim").get<int>(), [&](auto D) { return field_stats<D.value>(cfg, samples); });
  write_json(dir / "field_stats.json", res);
  std::cout << res.dump(2) << '\n';
  return 0;
}

template <int D>
int simulate(const json& cfg, const fs::path& dir, std::int64_t index) {
  const Model model = particle_model(cfg);
  EnsembleConfig e = ensemble_from(cfg, model);
  if (e.trajectories == 1) {
    IntegratorConfig ic = e.integrator;
    if (e.scan_intersections && ic.dense_spacing <= 0.0) ic.dense_spacing = 0.5 * e.family.profile.radius;
    const std::uint64_t field_seed = derive_key(e.seed, {index});
    const Vec<D> v0 = Vec<D>::unit(0) * e.v0;
    json summary;
    if (model == Model::particle_x) {
      FieldInstance<D> field(e.family, field_seed, 0);
      const Trajectory<D> t = simulate_x(v0, field, ic);
      auto out = open_output(dir / "trajectory.csv");
      write_trajectory_csv(out, t.samples);
      summary = {{"trapped", t.trapped}, {"steps", t.steps}, {"final_time", t.final_time}};
    } else {
      auto run = simulate_renewal(v0, e.family, field_seed, ic, model == Model::particle_y ? RenewalVariant::Y : RenewalVariant::Z);
      IntersectionSummary s;
      if (e.scan_intersections) s = near_self_intersection_scan(run.path.dense, run.segments, e.family.profile.radius);
      auto out = open_output(dir / "trajectory.csv");
      write_trajectory_csv(out, run.path.samples);
      auto log = open_output(dir / "renewal.csv");
      write_renewal_csv(log, run.segments);
      summary = {{"trapped", run.path.trapped}, {"truncated", run.path.truncated}, {"steps", run.path.steps},
                 {"segments", run.segments.size()}, {"near_flags", s.near_flags}, {"cone_flags", s.cone_flags}};
    }
    write_json(dir / "summary.json", summary);
    std::cout << summary.dump() << '\n';
    return 0;
  }
  if (family_kind_from_string(cfg.at("field").at("family").get<std::string>()) != FamilyKind::radial_gradient)
    e.covariance = covariance_quadrature(e.family, D);
  const EnsembleReport rep = run_ensemble<D>(e);
  write_json(dir / "report.json", to_json(rep));
  write_json(dir / "dyadic.json", to_json(dyadic_crossing_report(rep)));
  write_marginals(dir, rep);
  std::cout << "used " << rep.used << " of " << rep.run << " trajectories";
  if (rep.energy_fit) std::cout << "; energy exponent " << rep.energy_fit->exponent;
  if (rep.distance_fit) std::cout << "; |X| exponent " << rep.distance_fit->exponent;
  std::cout << '\n';
  check_report(cfg, rep);
  return 0;
}

int cmd_simulate(const Common& c, const FieldFlags& ff, const DynamicsFlags& df, std::int64_t index) {
  json o;
  ff.apply(o);
  df.apply(o);
  o["simulate"]["index"] = index;
  const json cfg = build_config("simulate", c, o);
  const fs::path dir = output_dir("simulate", c);
  echo_config(dir, cfg);
  return with_dim(cfg.at("dim").get<int>(), [&](auto D) { return simulate<D.value>(cfg, dir, index); });
}

struct LimitFlags {
  bool exact = false, density = false, em = false;
  std::optional<std::string> model;
  std::optional<double> t, sigma, lambda, h, x_max;
  std::optional<std::int64_t> n;
  std::optional<int> points;
};

int cmd_limit(const Common& c, const LimitFlags& lf) {
  if (lf.exact + lf.density + lf.em != 1) throw std::invalid_argument("limit: choose exactly one of --exact, --density, --em");
  json o;
  auto& l = o["limit"];
  l["mode"] = lf.exact ? "exact" : lf.density ? "density" : "em";
  if (lf.model) l["model"] = *lf.model;
  if (lf.t) l["t"] = *lf.t;
  if (lf.n) l["n"] = *lf.n;
  if (lf.sigma) l["sigma"] = *lf.sigma;
  if (lf.lambda) l["lambda"] = *lf.lambda;
  if (lf.h) l["h"] = *lf.h;
  if (lf.x_max) l["x_max"] = *lf.x_max;
  if (lf.points) l["points"] = *lf.points;
  json cfg = build_config("limit", c, o);
  auto& lc = cfg["limit"];
  if (!lc.contains("model")) lc["model"] = "E";
  if (!lc.contains("x_max")) lc["x_max"] = 50.0;
  if (!lc.contains("points")) lc["points"] = 2001;
  const fs::path dir = output_dir("limit", c);
  echo_config(dir, cfg);
  const int d = cfg.at("dim").get<int>();
  const std::string mode = lc.at("mode").get<std::string>();
  if (mode == "density") {
    auto out = open_output(dir / "density.csv");
    write_density_csv(out, d, lc.at("x_max").get<double>(), lc.at("points").get<int>());
    std::cout << "cdf(" << lc.at("x_max").get<double>() << ") = 1 - " << 1.0 - limit_cdf(lc.at("x_max").get<double>(), d) << '\n';
    return 0;
  }
  const DiffusionParams p = diffusion_from(cfg);
  p.validate();
  const double t = lc.at("t").get<double>();
  const auto n = lc.at("n").get<std::int64_t>();
  if (n < 1) throw std::invalid_argument("limit.n must be >= 1");
  if (mode == "exact") {
    const auto e = exact_energy_sample(t, p, static_cast<std::size_t>(n), cfg.at("seed").get<std::uint64_t>());
    auto out = open_output(dir / "samples.csv");
    write_samples_csv(out, "E", e);
    const LimitLaw L = LimitLaw::from(p);
    std::vector<double> g;
    for (double x : e) g.push_back(std::pow(x, 1.5) / (2.0 * L.a2 * t));
    const MeanSe m = mean_se(g);
    const json s = {{"mean_E^{3/2}/(2a^2 t)", m.mean}, {"se", m.se}, {"expected", d / 3.0},
                    {"ks_vs_cdf", ks_statistic(e, [&](double x) { return energy_cdf(x, t, p); })}};
    write_json(dir / "summary.json", s);
    std::cout << s.dump() << '\n';
    if (c.check && std::abs(m.mean - d / 3.0) > 4.0 * m.se) throw CheckBreach("Gamma mean outside 4 standard errors");
    return 0;
  }
  const Model model = model_from_string("limit-" + lc.at("model").get<std::string>());
  EnsembleConfig e = ensemble_from(cfg, model);
  e.trajectories = n;
  e.schedule = cfg.at("dynamics").at("schedule").is_array() ? schedule_from(cfg) : geometric_schedule(t, std::min(t, 1.0 / 64.0));
  const EnsembleReport rep = with_dim(d, [&](auto D) { return run_ensemble<D.value>(e); });
  write_json(dir / "report.json", to_json(rep));
  write_marginals(dir, rep);
  std::cout << "KS at t = " << rep.marginals.back().t << ": " << rep.marginals.back().ks_energy << '\n';
  check_report(cfg, rep);
  return 0;
}

int cmd_covariance(const Common& c, const FieldFlags& ff, std::optional<std::int64_t> draws, std::optional<std::string> method,
                   std::optional<int> windows) {
  json o;
  ff.apply(o);
  o["covariance"] = {{"draws", draws.value_or(10000)}, {"method", method.value_or("both")}, {"windows", windows.value_or(8)}};
  const json cfg = build_config("covariance", c, o);
  const fs::path dir = output_dir("covariance", c);
  echo_config(dir, cfg);
  const BumpFamily fam = family_from(cfg);
  const int d = cfg.at("dim").get<int>();
  const auto& cc = cfg.at("covariance");
  const std::string m = cc.at("method").get<std::string>();
  if (m != "mc" && m != "quadrature" && m != "both") throw std::invalid_argument("--method must be mc, quadrature or both");
  json res;
  if (m != "quadrature") {
    CovarianceConfig k;
    k.draws = cc.at("draws").get<std::int64_t>();
    if (k.draws < 1000) throw std::invalid_argument("covariance budget must be >= 1000 field draws");
    k.windows = cc.at("windows").get<int>();
    k.seed = cfg.at("seed").get<std::uint64_t>();
    k.workers = cfg.at("workers").get<unsigned>();
    const CovarianceEstimate est = with_dim(d, [&](auto D) { return estimate_sigma_lambda<D.value>(fam, k); });
    res["monte_carlo"] = to_json(est);
  }
  if (m != "mc") res["quadrature"] = to_json(covariance_quadrature(fam, d));
  write_json(dir / "covariance.json", res);
  std::cout << res.dump(2) << '\n';
  if (c.check && res.contains("monte_carlo") && res.contains("quadrature")) {
    const auto& mc = res["monte_carlo"];
    const double q = res["quadrature"]["sigma2"].get<double>();
    const double s = mc["sigma2"].get<double>(), e = mc["sigma2_err"].get<double>();
    if (!mc["csi_violated"].get<bool>() && std::abs(s - q) > 3.0 * e) throw CheckBreach("Monte Carlo and quadrature disagree");
  }
  return 0;
}

int cmd_compare(const Common& c, const FieldFlags& ff, const DynamicsFlags& df, std::optional<double> t_min,
                std::optional<std::int64_t> cov_draws) {
  json o;
  ff.apply(o);
  df.apply(o);
  o["compare"] = {{"t_min", t_min.value_or(64.0)}, {"covariance_draws", cov_draws.value_or(0)}};
  const json cfg = build_config("compare", c, o);
  const fs::path dir = output_dir("compare", c);
  echo_config(dir, cfg);
  const int d = cfg.at("dim").get<int>();
  EnsembleConfig e = ensemble_from(cfg, particle_model(cfg));
  CovarianceEstimate cov;
  const auto draws = cfg.at("compare").at("covariance_draws").get<std::int64_t>();
  if (draws > 0) {
    CovarianceConfig k;
    k.draws = draws;
    k.seed = derive_key(e.seed, {-6});
    k.workers = e.workers;
    cov = with_dim(d, [&](auto D) { return estimate_sigma_lambda<D.value>(e.family, k); });
  } else {
    cov = covariance_quadrature(e.family, d);
  }
  write_json(dir / "covariance.json", to_json(cov));
  if (cov.csi_violated)
    throw std::invalid_argument("csi_violated: sigma^2 = " + fmt(cov.sigma2) + " for the " + cov.family +
                                " family; there is no diffusive limit to compare with");
  e.covariance = cov;
  const EnsembleReport rep = with_dim(d, [&](auto D) { return run_ensemble<D.value>(e); });
  write_json(dir / "report.json", to_json(rep));
  const KsTable table = compare_particle_to_limit(rep, cov, c_values_on_schedule(e.schedule, 1.0, cfg.at("compare").at("t_min").get<double>()));
  write_json(dir / "ks_table.json", to_json(table));
  for (const auto& r : table.rows) std::cout << "c = " << r.c << "  KS = " << r.ks << "  (floor " << r.noise_floor << ")\n";
  std::cout << (table.monotone ? "monotone in c" : "NOT monotone in c") << '\n';
  const double ks_max = cfg.at("check").value("ks_max", 0.1);
  if (c.check && (!table.monotone || !(table.rows.back().ks < ks_max))) throw CheckBreach("KS table breaches the thresholds");
  return 0;
}

int cmd_verify(const Common& c, std::optional<std::string> suite, std::optional<std::string> budget, std::optional<std::string> family) {
  json o;
  o["verify"] = {{"suite", suite.value_or("all")}, {"budget", budget.value_or("full")}};
  if (family) o["field"]["family"] = *family;
  const json cfg = build_config("verify", c, o);
  const fs::path dir = output_dir("verify", c);
  echo_config(dir, cfg);
  VerifyOptions opt;
  const std::string b = cfg.at("verify").at("budget").get<std::string>();
  if (b != "full" && b != "small") throw std::invalid_argument("--budget must be full or small");
  opt.budget = b == "small" ? Budget::small : Budget::full;
  opt.workers = cfg.at("workers").get<unsigned>();
  if (c.seed) opt.seed = *c.seed;
  opt.log = [](const std::string& s) { std::cerr << s << '\n'; };
  const std::string s = cfg.at("verify").at("suite").get<std::string>();
  const FamilyKind kind = family_kind_from_string(cfg.at("field").at("family").get<std::string>());
  std::vector<CheckResult> results;
  if (s == "covariance" && kind != FamilyKind::uniform_direction) {
    // Negative control: the family must be flagged.
    auto r = check_covariance(opt, false, true);
    results.push_back(r.result);
  } else {
    results = run_criteria(suite_criteria(s), opt);
  }
  json out = json::array();
  bool all = true;
  for (const auto& r : results) {
    std::cout << "criterion " << r.criterion << " [" << r.name << "]: " << (r.pass ? "PASS" : "FAIL") << " - " << r.detail << '\n';
    out.push_back({{"criterion", r.criterion}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}, {"seconds", r.seconds}});
    all = all && r.pass;
  }
  write_json(dir / "verify.json", out);
  if (c.check && !all) throw CheckBreach("verification failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle in a random Poisson force field: simulation and verification"};
  app.require_subcommand(1);

  Common c_fs, c_sim, c_lim, c_cov, c_cmp, c_ver;
  FieldFlags f_fs, f_sim, f_cov, f_cmp;
  DynamicsFlags d_sim, d_cmp;

  auto* fs_cmd = app.add_subcommand("field-stats", "sample field instances: cell counts, force moments, gap probability");
  c_fs.add(fs_cmd);
  f_fs.add(fs_cmd);
  std::int64_t fs_samples = 10000;
  fs_cmd->add_option("--samples", fs_samples, "number of field instances");

  auto* sim = app.add_subcommand("simulate", "particle trajectories (X, Y, Z) or ensembles");
  c_sim.add(sim);
  f_sim.add(sim);
  d_sim.add(sim);
  std::int64_t index = 0;
  sim->add_option("--index", index, "trajectory index for single runs");

  auto* lim = app.add_subcommand("limit", "limit-law sampling: exact marginals, density table, Euler-Maruyama");
  c_lim.add(lim);
  LimitFlags lf;
  lim->add_flag("--exact", lf.exact, "exact samples of E(t) started at 0");
  lim->add_flag("--density", lf.density, "table x,p,cdf of the limit density");
  lim->add_flag("--em", lf.em, "Euler-Maruyama ensemble");
  lim->add_option("--model", lf.model, "E (energy) or V (velocity) for --em");
  lim->add_option("--t", lf.t, "time");
  lim->add_option("--n", lf.n, "samples or paths");
  lim->add_option("--sigma", lf.sigma, "sigma");
  lim->add_option("--lambda", lf.lambda, "lambda");
  lim->add_option("--energy-h", lf.h, "energy step (upper bound)");
  lim->add_option("--x-max", lf.x_max, "density table cutoff");
  lim->add_option("--points", lf.points, "density table points");

  auto* cov = app.add_subcommand("covariance", "sigma^2 and lambda^2 of a bump family");
  c_cov.add(cov);
  f_cov.add(cov);
  std::optional<std::int64_t> cov_draws;
  std::optional<std::string> cov_method;
  std::optional<int> cov_windows;
  cov->add_option("--draws", cov_draws, "Monte Carlo field draws (>= 1000)");
  cov->add_option("--method", cov_method, "mc | quadrature | both");
  cov->add_option("--windows", cov_windows, "windows per axis in each draw");

  auto* cmp = app.add_subcommand("compare", "KS table of particle energies against the limit law");
  c_cmp.add(cmp);
  f_cmp.add(cmp);
  d_cmp.add(cmp);
  std::optional<double> t_min;
  std::optional<std::int64_t> cmp_draws;
  cmp->add_option("--t-min", t_min, "smallest c^3 entering the table");
  cmp->add_option("--covariance-draws", cmp_draws, "estimate sigma^2 by Monte Carlo (0 = quadrature)");

  auto* ver = app.add_subcommand("verify", "acceptance suites");
  c_ver.add(ver);
  std::optional<std::string> suite, budget, family;
  ver->add_option("--suite", suite, "density | sde | covariance | particle | intersection | engineering | all");
  ver->add_option("--budget", budget, "full | small");
  ver->add_option("--family", family, "bump family for the covariance suite");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*fs_cmd) return cmd_field_stats(c_fs, f_fs, fs_samples);
    if (*sim) return cmd_simulate(c_sim, f_sim, d_sim, index);
    if (*lim) return cmd_limit(c_lim, lf);
    if (*cov) return cmd_covariance(c_cov, f_cov, cov_draws, cov_method, cov_windows);
    if (*cmp) return cmd_compare(c_cmp, f_cmp, d_cmp, t_min, cmp_draws);
    if (*ver) return cmd_verify(c_ver, suite, budget, family);
  } catch (const CheckBreach& e) {
    std::cerr << "check failed: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
