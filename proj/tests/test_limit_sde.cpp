#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "rfflab/limit_sde.hpp"
#include "rfflab/stats.hpp"

using namespace rfflab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("limit constants", "[limit_sde]") {
  const auto L = LimitLaw::from(DiffusionParams{4, 1.0, 1.0});
  CHECK_THAT(L.a * L.a, WithinRel(L.a2, 1e-14));
  CHECK_THAT(L.cbar, WithinRel(std::pow(2.0 * L.a2, 2.0 / 3.0), 1e-14));
  CHECK_THAT(L.cbar, WithinAbs(1.36284, 5e-6));
  CHECK(L.bessel_dim == 8.0 / 3.0);
  // cbar scales as sigma^{4/3}
  CHECK_THAT(LimitLaw::from(DiffusionParams{4, 2.0, 1.0}).cbar, WithinRel(L.cbar * std::pow(2.0, 4.0 / 3.0), 1e-14));
}

TEST_CASE("parameter validation", "[limit_sde]") {
  CHECK_THROWS_AS((DiffusionParams{3, 1.0, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((DiffusionParams{4, 0.0, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((DiffusionParams{4, 1.0, -1.0}.validate()), std::invalid_argument);
  CHECK_NOTHROW((DiffusionParams{5, 1.0, 0.0}.validate()));
  CHECK_THROWS_AS(exact_energy_sample(1.0, DiffusionParams{3, 1.0, 1.0}, 10, 1), std::invalid_argument);
}

TEST_CASE("Euler-Maruyama velocity step", "[limit_sde]") {
  const DiffusionParams p{4, 1.0, 1.0};
  const Vec<4> e1 = Vec<4>::unit(0);
  SECTION("drift (d-2)s^2 - (d-1)l^2 over 2|v|^3") {
    const auto out = em_step_v(e1, p, 0.01, Vec<4>{});
    CHECK_THAT(out[0], WithinAbs(1.0 - 0.005, 1e-15));
    CHECK(out[1] == 0.0);
  }
  SECTION("noise: sigma along v, lambda across") {
    const DiffusionParams q{4, 2.0, 0.5};
    const double h = 0.04;
    const auto z = Vec<4>{1.0, 1.0, 0.0, 0.0};
    const auto out = em_step_v(e1, q, h, z);
    const double drift = (2 * 4.0 - 3 * 0.25) / 2.0 * h;
    CHECK_THAT(out[0], WithinAbs(1.0 + 2.0 * 0.2 + drift, 1e-14));
    CHECK_THAT(out[1], WithinAbs(0.5 * 0.2, 1e-14));
  }
  SECTION("reflection at the floor") {
    const auto out = em_step_v(e1 * 1e-3, p, 1e-6, Vec<4>{-1000.0, 0, 0, 0}, 0.5);
    CHECK(norm(out) >= 0.5);
  }
  SECTION("bad input") {
    CHECK_THROWS_AS(em_step_v(Vec<4>{}, p, 0.01, Vec<4>{}), std::invalid_argument);
    CHECK_THROWS_AS(em_step_v(e1, p, NAN, Vec<4>{}), std::invalid_argument);
    CHECK_THROWS_AS(em_step_v(e1, p, 0.01, Vec<4>{INFINITY, 0, 0, 0}), std::invalid_argument);
  }
}

TEST_CASE("Euler-Maruyama energy step", "[limit_sde]") {
  const DiffusionParams p{4, 1.0, 1.0};
  CHECK_THAT(em_step_energy(1.0, p, 0.01, 0.0), WithinAbs(1.0 + 3.0 / (2.0 * std::sqrt(2.0)) * 0.01, 1e-15));
  // diffusion coefficient sigma (2E)^{1/4}
  CHECK_THAT(em_step_energy(2.0, p, 0.01, 1.0) - em_step_energy(2.0, p, 0.01, 0.0), WithinAbs(std::sqrt(2.0) * 0.1, 1e-14));
  CHECK(em_step_energy(0.0, p, 1e-4, -5.0) >= 0.0);
  CHECK(em_step_energy(0.7, DiffusionParams{4, 0.0, 1.0}, 0.1, 3.0) == 0.7);
  CHECK_THROWS_AS(em_step_energy(-1.0, p, 0.01, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(em_step_energy(NAN, p, 0.01, 0.0), std::invalid_argument);
}

TEST_CASE("exact energy law", "[limit_sde]") {
  const DiffusionParams p{4, 1.0, 1.0};
  const auto L = LimitLaw::from(p);
  const std::size_t n = 40000;
  const auto e = exact_energy_sample(1.0, p, n, 7);
  // E^{3/2} / (2 a^2 t) is Gamma(d/3, 1)
  std::vector<double> g(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = std::pow(e[i], 1.5) / (2.0 * L.a2);
    x[i] = e[i] / L.cbar;
  }
  const auto mg = mean_se(g);
  CHECK(std::abs(mg.mean - 4.0 / 3.0) < 4.0 * mg.se);
  const auto mx = mean_se(x);
  const double m_oracle = std::tgamma(2.0) / std::tgamma(4.0 / 3.0);
  CHECK_THAT(m_oracle, WithinAbs(1.1199, 1e-4));
  CHECK(std::abs(mx.mean - m_oracle) < 4.0 * mx.se);
  CHECK(ks_statistic(e, [&](double v) { return energy_cdf(v, 1.0, p); }) < 3.0 * ks_noise_floor(n));

  // Same seed at 8t: every sample scales by 8^{2/3} = 4.
  const auto e8 = exact_energy_sample(8.0, p, 100, 7);
  for (std::size_t i = 0; i < 100; ++i) CHECK_THAT(e8[i], WithinRel(4.0 * e[i], 1e-12));
  CHECK_THROWS_AS(exact_energy_sample(0.0, p, 1, 1), std::invalid_argument);
}

TEST_CASE("limit density", "[limit_sde]") {
  using Q = boost::math::quadrature::gauss_kronrod<double, 61>;
  for (int d : {4, 5, 6}) {
    auto p = [d](double x) { return limit_density(x, d); };
    const double total = Q::integrate(p, 0.0, 1.0, 10, 1e-13) + Q::integrate(p, 1.0, 4.0, 10, 1e-13) +
                         Q::integrate(p, 4.0, std::numeric_limits<double>::infinity(), 10, 1e-13);
    CHECK_THAT(total, WithinAbs(1.0, 1e-9));
    CHECK_THAT(limit_cdf(2.0, d), WithinAbs(Q::integrate(p, 0.0, 2.0, 10, 1e-13), 1e-10));
    // mode: p'(x) = 0
    const double m = limit_mode(d), dx = 1e-5;
    CHECK(std::abs(p(m + dx) - p(m - dx)) / (2 * dx) < 1e-6);
    CHECK(p(m) > p(0.9 * m));
    CHECK(p(m) > p(1.1 * m));
  }
  CHECK_THAT(limit_density(1.0, 4), WithinAbs(0.6179527689, 1e-9));
  CHECK(limit_density(-1.0, 4) == 0.0);
  CHECK(limit_cdf(0.0, 4) == 0.0);
  CHECK(limit_cdf(50.0, 4) == 1.0);
  // cdf of E(t) / (cbar t^{2/3}) is the limit cdf
  const DiffusionParams q{5, 1.3, 0.2};
  const auto L = LimitLaw::from(q);
  for (double x : {0.3, 1.0, 2.2})
    CHECK_THAT(energy_cdf(x * L.cbar * std::pow(3.0, 2.0 / 3.0), 3.0, q), WithinAbs(limit_cdf(x, 5), 1e-13));
  CHECK(speed_cdf(std::sqrt(2.0 * 0.8), 1.0, q) == energy_cdf(0.8, 1.0, q));
}

TEST_CASE("self-similarity transforms", "[limit_sde]") {
  VPath<4> vp{{0.0, 8.0, 16.0}, {Vec<4>{}, Vec<4>{2, 0, 0, 0}, Vec<4>{0, 4, 0, 0}}};
  const auto t = self_similarity_transform(vp, 2.0);
  CHECK(t.t == std::vector<double>{0.0, 1.0, 2.0});
  CHECK(t.v[2][1] == 2.0);
  EnergyPath ep{{8.0}, {4.0}};
  const auto te = self_similarity_transform(ep, 2.0);
  CHECK(te.t[0] == 1.0);
  CHECK(te.e[0] == 1.0);
  CHECK_THROWS_AS(self_similarity_transform(ep, 0.0), std::invalid_argument);
}

TEST_CASE("integrate_position", "[limit_sde]") {
  VPath<4> vp;
  for (int i = 0; i <= 10; ++i) {
    vp.t.push_back(0.1 * i);
    vp.v.push_back(Vec<4>{2.0, 0.1 * i, 0, 0});
  }
  const auto x = integrate_position(vp);
  CHECK(x[0][0] == 0.0);
  CHECK_THAT(x[10][0], WithinAbs(2.0, 1e-14));
  CHECK_THAT(x[10][1], WithinAbs(0.5, 1e-14));  // trapezoid is exact for linear v
  vp.t[3] = vp.t[2];
  CHECK_THROWS_AS(integrate_position(vp), std::invalid_argument);
}

TEST_CASE("velocity paths", "[limit_sde]") {
  const DiffusionParams p{4, 1.0, 1.0};
  const std::vector<double> grid{0.25, 0.5, 1.0};
  const auto a = simulate_v_path<4>(p, Vec<4>::unit(0), grid, 3, 5);
  const auto b = simulate_v_path<4>(p, Vec<4>::unit(0), grid, 3, 5);
  REQUIRE(a.t == grid);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(a.v[i].c == b.v[i].c);
  const auto c = simulate_v_path<4>(p, Vec<4>::unit(0), grid, 3, 6);
  CHECK(c.v[2].c != a.v[2].c);
  CHECK_THROWS_AS(simulate_v_path<4>(p, Vec<4>::unit(0), {1.0, 0.5}, 3, 5), std::invalid_argument);
  CHECK_THROWS_AS(simulate_v_path<4>(DiffusionParams{5, 1.0, 1.0}, Vec<4>::unit(0), grid, 3, 5), std::invalid_argument);
}

TEST_CASE("energy EM from near 0 matches the exact law", "[limit_sde]") {
  const DiffusionParams p{4, 1.0, 1.0};
  const std::size_t n = 3000;
  std::vector<double> em(n);
  for (std::size_t i = 0; i < n; ++i) em[i] = simulate_energy_path(p, 1e-6, {1.0}, 1e-4, 11, static_cast<std::int64_t>(i)).e[0];
  CHECK(ks_statistic(em, [&](double e) { return energy_cdf(e, 1.0, p); }) < 3.0 * ks_noise_floor(n));
}

TEST_CASE("first passage of the radial process", "[limit_sde]") {
  CHECK_THAT(dyadic_up_probability(4), WithinAbs(2.0 / 3.0, 1e-15));
  // s(v) = -v^{3-d}: d = 5 gives (-1 + 4) / (-1/4 + 4) = 4/5
  CHECK_THAT(dyadic_up_probability(5), WithinAbs(0.8, 1e-15));
  CHECK(hit_probability_oracle(4, 1.0, 1.0, 0.5) == 1.0);
  CHECK(hit_probability_oracle(4, 1.0, 2.0, 1.0) == 0.0);
  const auto est = halfline_hit_probability_check(DiffusionParams{4, 1.0, 1.0}, 1.0, 2000, 5, HitConfig{1e-3, 1e3});
  CHECK(est.oracle == dyadic_up_probability(4));
  CHECK(std::abs(est.p_hat - est.oracle) < 4.0 * est.se + 0.01);
  const auto deg = halfline_hit_probability_check(DiffusionParams{4, 1.0, 1.0}, 1.0, 10, 5, {}, 1.0, 0.5);
  CHECK(deg.p_hat == 1.0);
}
