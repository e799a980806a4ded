#include <catch_amalgamated.hpp>

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <numbers>

#include "rfflab/covariance.hpp"

using namespace rfflab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double sphere(int n) { return 2.0 * std::pow(std::numbers::pi, 0.5 * (n + 1)) / std::tgamma(0.5 * (n + 1)); }

// Uniform-direction bumps, R = 1, A = 1: the Abel transform of the
// squared-profile autocorrelation integrates to a single Beta function.
double uniform_sigma2_closed_form(int d) {
  return sphere(d - 2) / d * std::pow(32.0 / 35.0, 2) * 0.5 * boost::math::beta(0.5 * (d - 1), 8.0);
}

BumpFamily family(FamilyKind k, double R, double A, double w = 0.5) { return make_family_unbounded(k, R, A, w); }

}  // namespace

TEST_CASE("sigma^2 by quadrature matches the closed form", "[covariance]") {
  CHECK_THAT(uniform_sigma2_closed_form(4), WithinAbs(0.049163888, 1e-9));
  for (int d : {4, 5, 6}) {
    const auto c = covariance_quadrature(family(FamilyKind::uniform_direction, 1.0, 1.0), d);
    CHECK_THAT(c.sigma2, WithinRel(uniform_sigma2_closed_form(d), 1e-8));
    // isotropic marks: transverse and longitudinal integrals agree
    CHECK_THAT(c.lambda2, WithinRel(c.sigma2, 1e-8));
    CHECK_FALSE(c.csi_violated);
  }
}

TEST_CASE("second moment at zero lag (Campbell)", "[covariance]") {
  for (int d : {4, 5, 6}) {
    const double A = 0.7, R = 1.3;
    const double uni = A * A / d * sphere(d - 1) * std::pow(R, d) * 0.5 * boost::math::beta(0.5 * d, 7.0);
    CHECK_THAT(correlation_quadrature(family(FamilyKind::uniform_direction, R, A), d, 0.0, 1), WithinRel(uni, 1e-9));
    const double rad = A * A / d * sphere(d - 1) * std::pow(R, d) * 0.5 * boost::math::beta(0.5 * d + 1.0, 7.0);
    CHECK_THAT(correlation_quadrature(family(FamilyKind::radial_gradient, R, A), d, 0.0, 1), WithinRel(rad, 1e-9));
  }
  CHECK_THAT(correlation_quadrature(family(FamilyKind::uniform_direction, 1.0, 1.0), 4, 0.0, 1),
             WithinRel(std::numbers::pi * std::numbers::pi / (56.0 * 4.0), 1e-10));
}

TEST_CASE("correlation support, evenness and scaling", "[covariance]") {
  const auto f = family(FamilyKind::uniform_direction, 0.8, 2.0);
  CHECK(correlation_quadrature(f, 4, 1.6, 1) == 0.0);
  CHECK(correlation_quadrature(f, 4, 2.5, 2) == 0.0);
  CHECK(correlation_quadrature(f, 4, 1.59, 1) > 0.0);
  CHECK(correlation_quadrature(f, 4, 0.3, 1) == correlation_quadrature(f, 4, -0.3, 1));
  CHECK_THROWS_AS(correlation_quadrature(f, 4, 0.1, 3), std::invalid_argument);
  // sigma^2 ~ A^2 R^{d+1}
  const auto base = covariance_quadrature(family(FamilyKind::uniform_direction, 1.0, 1.0), 5);
  const auto scaled = covariance_quadrature(family(FamilyKind::uniform_direction, 0.5, 8.0), 5);
  CHECK_THAT(scaled.sigma2, WithinRel(base.sigma2 * 64.0 * std::pow(0.5, 6), 1e-8));
}

TEST_CASE("gradient field has sigma^2 = 0", "[covariance]") {
  const auto c = covariance_quadrature(family(FamilyKind::radial_gradient, 1.0, 1.0), 4);
  CHECK(std::abs(c.sigma2) < 1e-10 * c.lambda2);
  CHECK(c.lambda2 > 0.0);
  CHECK(c.csi_violated);
  const auto mix = covariance_quadrature(family(FamilyKind::mixture, 1.0, 1.0, 0.3), 4);
  const auto uni = covariance_quadrature(family(FamilyKind::uniform_direction, 1.0, 1.0), 4);
  CHECK_THAT(mix.sigma2, WithinRel(0.3 * uni.sigma2, 1e-7));
  CHECK_THAT(mix.lambda2, WithinRel(0.3 * uni.lambda2 + 0.7 * c.lambda2, 1e-7));
  CHECK(mix.lambda2 > mix.sigma2);
  CHECK_FALSE(mix.csi_violated);
}

TEST_CASE("csi decision rule", "[covariance]") {
  CHECK(csi_violated(0.0, 0.0));
  CHECK(csi_violated(0.01, 0.005));
  CHECK(csi_violated(-1.0, 0.1));
  CHECK_FALSE(csi_violated(0.05, 0.01));
}

TEST_CASE("Monte Carlo agrees with quadrature", "[covariance]") {
  const auto f = family(FamilyKind::uniform_direction, 1.0, 0.5);
  CovarianceConfig cfg;
  cfg.draws = 1500;
  cfg.seed = 3;
  const auto m0 = correlation_at<4>(f, 0.0, 1, cfg);
  const double exact0 = 0.25 * std::numbers::pi * std::numbers::pi / (56.0 * 4.0);
  CHECK(std::abs(m0.mean - exact0) < 3.0 * m0.se);
  const auto q = covariance_quadrature(f, 4);
  const auto mc = estimate_sigma_lambda<4>(f, cfg);
  CHECK(std::abs(mc.sigma2 - q.sigma2) < 4.0 * mc.sigma2_err);
  CHECK(std::abs(mc.lambda2 - q.lambda2) < 4.0 * mc.lambda2_err);
  CHECK_FALSE(mc.csi_violated);
  CHECK(mc.method == "monte-carlo");
  CHECK(mc.budget == 1500);

  // Identical draws give identical estimates.
  const auto again = estimate_sigma_lambda<4>(f, cfg);
  CHECK(again.sigma2 == mc.sigma2);

  CHECK_THROWS_AS(estimate_sigma_lambda<4>(f, CovarianceConfig{1, 3, 8, 0}), std::invalid_argument);
}

TEST_CASE("Monte Carlo flags the gradient family", "[covariance]") {
  CovarianceConfig cfg;
  cfg.draws = 400;
  const auto mc = estimate_sigma_lambda<4>(family(FamilyKind::radial_gradient, 1.0, 0.5), cfg);
  CHECK(mc.csi_violated);
}
