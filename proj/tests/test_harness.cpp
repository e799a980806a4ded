#include <catch_amalgamated.hpp>

#include <cmath>

#include "rfflab/covariance.hpp"
#include "rfflab/harness.hpp"

using namespace rfflab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

EnsembleConfig particle_config(double A, double t_max, std::int64_t n) {
  EnsembleConfig c;
  c.model = Model::particle_x;
  c.d = 4;
  c.trajectories = n;
  c.seed = 17;
  c.v0 = 10.0;
  c.family = make_family_unbounded(FamilyKind::uniform_direction, 0.5, A);
  c.schedule = geometric_schedule(t_max);
  c.integrator.h0 = 0.1;
  return c;
}

}  // namespace

TEST_CASE("model names", "[harness]") {
  for (auto m : {Model::particle_x, Model::particle_y, Model::particle_z, Model::limit_v, Model::limit_e})
    CHECK(model_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(model_from_string("W"), std::invalid_argument);
  CHECK(is_particle(Model::particle_z));
  CHECK_FALSE(is_particle(Model::limit_e));
}

TEST_CASE("limit mean", "[harness]") {
  CHECK_THAT(limit_mean(4), WithinRel(1.0 / std::tgamma(4.0 / 3.0), 1e-14));
  CHECK_THAT(limit_mean(5), WithinRel(std::tgamma(7.0 / 3.0) / std::tgamma(5.0 / 3.0), 1e-14));
}

TEST_CASE("force-free ensemble moves ballistically", "[harness]") {
  auto cfg = particle_config(0.0, 64.0, 2);
  const auto rep = run_ensemble<4>(cfg);
  CHECK(rep.run == 2);
  CHECK(rep.used == 2);
  for (const auto& m : rep.marginals) {
    CHECK(m.mean_energy == 50.0);
    CHECK_THAT(m.mean_distance, WithinRel(10.0 * m.t, 1e-12));
    CHECK(std::isnan(m.ks_energy));
  }
  REQUIRE(rep.energy_fit);
  REQUIRE(rep.distance_fit);
  CHECK_THAT(rep.energy_fit->exponent, WithinAbs(0.0, 1e-12));
  CHECK_THAT(rep.distance_fit->exponent, WithinAbs(1.0, 1e-12));
  CHECK(rep.excluded_fraction() == 0.0);
}

TEST_CASE("ensemble output does not depend on the worker count", "[harness]") {
  auto cfg = particle_config(8.0, 64.0, 6);
  cfg.workers = 1;
  const auto a = run_ensemble<4>(cfg);
  cfg.workers = 4;
  const auto b = run_ensemble<4>(cfg);
  REQUIRE(a.paths.size() == b.paths.size());
  for (std::size_t i = 0; i < a.paths.size(); ++i) {
    CHECK(a.paths[i].index == b.paths[i].index);
    CHECK(a.paths[i].energy == b.paths[i].energy);
    CHECK(a.paths[i].distance == b.paths[i].distance);
  }
}

TEST_CASE("limit-E ensemble sits at the KS noise floor", "[harness]") {
  EnsembleConfig cfg;
  cfg.model = Model::limit_e;
  cfg.trajectories = 800;
  cfg.seed = 5;
  cfg.schedule = {0.25, 0.5, 1.0, 2.0};
  const auto rep = run_ensemble<4>(cfg);
  CHECK(rep.used == 800);
  for (const auto& m : rep.marginals) CHECK(m.ks_energy < 3.0 * ks_noise_floor(800));
  CHECK_THAT(rep.derived_cbar, WithinRel(LimitLaw::from(cfg.diffusion).cbar, 1e-15));
  CHECK(std::abs(rep.fitted_cbar / rep.derived_cbar - 1.0) < 0.1);
  REQUIRE(rep.energy_fit);
  CHECK(std::abs(rep.energy_fit->exponent - 2.0 / 3.0) < 0.1);
  CHECK_FALSE(rep.distance_fit);
}

TEST_CASE("limit-V ensemble: energy ~ t^{2/3}, distance ~ t^{4/3}", "[harness]") {
  EnsembleConfig cfg;
  cfg.model = Model::limit_v;
  cfg.trajectories = 300;
  cfg.seed = 8;
  cfg.schedule = {0.125, 0.25, 0.5, 1.0};
  const auto rep = run_ensemble<4>(cfg);
  CHECK(rep.used == 300);
  for (const auto& m : rep.marginals) CHECK(m.ks_energy < 3.5 * ks_noise_floor(300));
  REQUIRE(rep.distance_fit);
  CHECK(std::abs(rep.energy_fit->exponent - 2.0 / 3.0) < 0.15);
  CHECK(std::abs(rep.distance_fit->exponent - 4.0 / 3.0) < 0.15);
}

TEST_CASE("exclusions are counted and the used set is capped", "[harness]") {
  SECTION("trapped paths") {
    auto cfg = particle_config(0.0, 300.0, 3);
    cfg.v0 = 0.5;
    cfg.integrator.v_min = 1.0;
    const auto rep = run_ensemble<4>(cfg);
    CHECK(rep.run == 3);
    CHECK(rep.used == 0);
    CHECK(rep.excluded_trapped == 3);
    CHECK(rep.trapping_rate == 1.0);
    CHECK(rep.excluded_fraction() == 1.0);
  }
  SECTION("truncated renewal runs") {
    auto cfg = particle_config(8.0, 64.0, 4);
    cfg.model = Model::particle_y;
    cfg.integrator.max_segments = 1;
    const auto rep = run_ensemble<4>(cfg);
    CHECK(rep.excluded_truncated == 4);
    CHECK(rep.used == 0);
  }
  SECTION("target_used") {
    auto cfg = particle_config(8.0, 32.0, 10);
    cfg.target_used = 3;
    const auto rep = run_ensemble<4>(cfg);
    CHECK(rep.used == 3);
    CHECK(rep.run >= 3);
    for (std::size_t i = 1; i < rep.paths.size(); ++i) CHECK(rep.paths[i].index > rep.paths[i - 1].index);
  }
}

TEST_CASE("invalid ensembles are rejected", "[harness]") {
  auto cfg = particle_config(1.0, 8.0, 1);
  cfg.d = 3;
  CHECK_THROWS_AS(run_ensemble<4>(cfg), std::invalid_argument);
  cfg.d = 5;
  CHECK_THROWS_AS(run_ensemble<4>(cfg), std::invalid_argument);
  cfg.d = 4;
  cfg.schedule = {1.0, 1.0};
  CHECK_THROWS_AS(run_ensemble<4>(cfg), std::invalid_argument);
  cfg.schedule = {};
  CHECK_THROWS_AS(run_ensemble<4>(cfg), std::invalid_argument);
  cfg.schedule = {1.0};
  cfg.trajectories = 0;
  CHECK_THROWS_AS(run_ensemble<4>(cfg), std::invalid_argument);
}

TEST_CASE("particle-to-limit comparison", "[harness]") {
  // Synthetic report whose energies follow the limit law exactly.
  const DiffusionParams p{4, 0.3, 0.3};
  EnsembleReport rep;
  rep.config.d = 4;
  rep.config.schedule = geometric_schedule(64.0);
  const std::size_t n = 2000;
  std::vector<std::vector<double>> by_time;
  for (double t : rep.config.schedule) by_time.push_back(exact_energy_sample(t, p, n, 2));
  for (std::size_t i = 0; i < n; ++i) {
    PathSummary ps;
    for (const auto& col : by_time) ps.energy.push_back(col[i]);
    rep.paths.push_back(ps);
  }
  rep.used = static_cast<std::int64_t>(n);
  CovarianceEstimate cov;
  cov.sigma2 = 0.09;
  cov.lambda2 = 0.09;

  const auto cs = c_values_on_schedule(rep.config.schedule, 1.0, 8.0);
  REQUIRE(cs.size() == 4);
  CHECK_THAT(cs.front(), WithinAbs(2.0, 1e-14));
  const auto table = compare_particle_to_limit(rep, cov, cs);
  REQUIRE(table.rows.size() == 4);
  for (const auto& r : table.rows) CHECK(r.ks < 3.0 * r.noise_floor);
  CHECK(table.monotone);

  CHECK_THROWS_AS(compare_particle_to_limit(rep, cov, {1.5}), std::invalid_argument);
  cov.csi_violated = true;
  CHECK_THROWS_WITH(compare_particle_to_limit(rep, cov, cs), Catch::Matchers::ContainsSubstring("csi_violated"));
}

TEST_CASE("dyadic crossing report", "[harness]") {
  SECTION("monotone escape: every level exits upward") {
    DyadicCrossingLog log{3, {}};
    for (int m = 3; m < 8; ++m) log.crossings.push_back({std::ldexp(1.0, 3 * (m + 1)), m, m + 1});
    const auto levels = dyadic_crossing_report({log});
    REQUIRE(levels.size() == 5);
    for (const auto& s : levels) {
      CHECK(s.p_up == 1.0);
      CHECK(s.down == 0);
    }
    // entered at 2^{3m}, left at 2^{3(m+1)}: sojourn / 2^{3m} = 7
    CHECK_THAT(levels[2].mean_sojourn_scaled, WithinAbs(7.0, 1e-12));
  }
  SECTION("limit radial process goes up with probability 2/3") {
    const DiffusionParams p{4, 1.0, 1.0};
    std::vector<DyadicCrossingLog> logs;
    for (int i = 0; i < 200; ++i) logs.push_back(limit_radial_crossings(p, 1.0, 50.0, 4, i, 1e-3));
    std::int64_t up = 0, down = 0;
    for (const auto& s : dyadic_crossing_report(logs)) {
      up += s.up;
      down += s.down;
    }
    const double n = static_cast<double>(up + down), ph = up / n;
    CHECK(ph > 0.5);
    CHECK(std::abs(ph - 2.0 / 3.0) < 4.0 * std::sqrt(ph * (1 - ph) / n) + 0.02);
  }
}
