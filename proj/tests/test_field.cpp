#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "rfflab/field.hpp"
#include "rfflab/field_tube.hpp"
#include "rfflab/stats.hpp"

using namespace rfflab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

BumpFamily default_family(FamilyKind k = FamilyKind::uniform_direction) { return make_family(k, BumpProfile{}); }

bool same_bumps(const std::vector<Bump<4>>& a, const std::vector<Bump<4>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (int k = 0; k < 4; ++k)
      if (a[i].center[k] != b[i].center[k] || a[i].direction[k] != b[i].direction[k] || a[i].sign != b[i].sign) return false;
  return true;
}

}  // namespace

TEST_CASE("cells are a pure function of seed, index and coordinates", "[field]") {
  const auto fam = default_family(FamilyKind::mixture);
  FieldInstance<4> a(fam, 9, 2), b(fam, 9, 2), other(fam, 9, 3);
  const CellCoord<4> c0{0, 0, 0, 0}, c1{-3, 5, 1, 0};
  const auto first = a.sample_cell(c0);
  (void)b.sample_cell(c1);  // different query order
  CHECK(same_bumps(first, b.sample_cell(c0)));
  CHECK(same_bumps(first, a.sample_cell(c0)));
  CHECK_FALSE(same_bumps(first, other.sample_cell(c0)));
}

TEST_CASE("exclusion ball empties the cells it covers", "[field]") {
  const auto fam = default_family();
  FieldInstance<4> f(fam, 1, 0, Exclusion<4>{Vec<4>{}, 10.0});
  for (int i = -1; i <= 0; ++i) CHECK(f.sample_cell({i, 0, i, 0}).empty());
  for (const auto& b : f.sample_cell({8, 0, 0, 0})) CHECK(norm(b.center) >= 10.0);
}

TEST_CASE("mean bump count per cell equals the cell volume", "[field]") {
  // Cell side 2R = 2 in d = 4: Poisson mean 16.
  const auto fam = default_family();
  FieldInstance<4> f(fam, 77, 0);
  std::vector<double> counts;
  for (int i = 0; i < 10000; ++i) counts.push_back(static_cast<double>(f.sample_cell({i, i % 7, -i, 3}).size()));
  const MeanSe m = mean_se(counts);
  CHECK(std::abs(m.mean - 16.0) < 3.0 * std::sqrt(16.0 / 1e4) * 3.0);
  CHECK_THAT(m.se * m.se * 1e4, WithinRel(16.0, 0.1));  // Poisson variance = mean
}

TEST_CASE("single bump force at its centre", "[field]") {
  const auto fam = default_family();
  Bump<4> b;
  b.direction = Vec<4>::unit(0);
  auto f = FieldInstance<4>::from_bumps(fam, {b});
  const Vec<4> F = f.force_at(Vec<4>{});
  CHECK(F[0] == 0.5);
  CHECK(F[1] == 0.0);
  CHECK(norm(f.force_at(Vec<4>{1.0, 0.0, 0.0, 0.0})) == 0.0);
  CHECK(norm(FieldInstance<4>::empty(fam).force_at(Vec<4>{0.3, 0, 0, 0})) == 0.0);
}

TEST_CASE("force at a point has zero mean and isotropic covariance", "[field]") {
  const auto fam = default_family();
  std::vector<std::vector<double>> comp(4);
  for (int i = 0; i < 10000; ++i) {
    FieldInstance<4> f(fam, 5, i);
    const Vec<4> F = f.force_at(Vec<4>{});
    for (int k = 0; k < 4; ++k) comp[k].push_back(F[k]);
  }
  // Campbell: E F_1^2 = A^2 / d * int phi^2 = A^2 / d * 2 pi^2 / 112.
  const double second = 0.25 / 4.0 * 2.0 * std::numbers::pi * std::numbers::pi / 112.0;
  for (int k = 0; k < 4; ++k) {
    const MeanSe m = mean_se(comp[k]);
    CHECK(std::abs(m.mean) < 4.0 * m.se);
    std::vector<double> sq;
    for (double v : comp[k]) sq.push_back(v * v);
    const MeanSe s = mean_se(sq);
    CHECK(std::abs(s.mean - second) < 4.0 * s.se);
  }
}

TEST_CASE("analytic Jacobian matches central differences", "[field]") {
  for (auto kind : {FamilyKind::uniform_direction, FamilyKind::radial_gradient}) {
    const auto fam = default_family(kind);
    Stream s(31);
    Bump<4> b;
    b.center = Vec<4>{0.1, -0.2, 0.05, 0.3};
    b.direction = s.unit_vector<4>();
    b.sign = -1.0;
    b.shape = kind == FamilyKind::radial_gradient ? BumpShape::radial_gradient : BumpShape::uniform_direction;
    auto f = FieldInstance<4>::from_bumps(fam, {b});
    for (int trial = 0; trial < 20; ++trial) {
      const Vec<4> x = b.center + s.unit_vector<4>() * s.uniform(0.05, 0.95);
      const Mat<4> J = f.jacobian_at(x);
      double jn = 0.0, diff = 0.0;
      for (int j = 0; j < 4; ++j) {
        const Vec<4> e = Vec<4>::unit(j) * 1e-5;
        const Vec<4> fd = (f.force_at(x + e) - f.force_at(x - e)) * (1.0 / 2e-5);
        for (int i = 0; i < 4; ++i) {
          jn = std::max(jn, std::abs(J(i, j)));
          diff = std::max(diff, std::abs(fd[i] - J(i, j)));
        }
      }
      CHECK(diff <= 1e-6 * jn);
      if (kind == FamilyKind::radial_gradient)
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < i; ++j) CHECK_THAT(J(i, j), WithinAbs(J(j, i), 1e-14));
    }
  }
  CHECK(FieldInstance<4>::empty(default_family()).jacobian_at(Vec<4>{}).a == Mat<4>{}.a);
}

TEST_CASE("gap condition is strict at 2R", "[field]") {
  const auto fam = default_family();
  CHECK(FieldInstance<4>::empty(fam).gap_condition(Vec<4>{}));
  Bump<4> b;
  b.center = Vec<4>{2.0 - 1e-9, 0, 0, 0};
  CHECK_FALSE(FieldInstance<4>::from_bumps(fam, {b}).gap_condition(Vec<4>{}));
  b.center = Vec<4>{2.0, 0, 0, 0};
  CHECK(FieldInstance<4>::from_bumps(fam, {b}).gap_condition(Vec<4>{}));
}

TEST_CASE("gap probability matches the Poisson void probability", "[field]") {
  // R = 1 makes exp(-|B_2|) = exp(-8 pi^2) invisible, so also test R = 0.3.
  for (double R : {1.0, 0.3}) {
    const auto fam = make_family(FamilyKind::uniform_direction, BumpProfile{R, 0.5, 3.0});
    std::vector<double> hit;
    for (int i = 0; i < 10000; ++i) {
      FieldInstance<4> f(fam, 13, i);
      hit.push_back(f.gap_condition(Vec<4>{0.1, 0.2, 0.3, 0.4}) ? 1.0 : 0.0);
    }
    const double vol = std::numbers::pi * std::numbers::pi / 2.0 * std::pow(2.0 * R, 4);
    const double p = std::exp(-vol);
    const MeanSe m = mean_se(hit);
    const double se = std::sqrt(p * (1.0 - p) / 1e4);
    CHECK(std::abs(m.mean - p) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("C2 bound shrinks the amplitude", "[field]") {
  const auto big = make_family(FamilyKind::uniform_direction, BumpProfile{1.0, 10.0, 1.0});
  CHECK(big.profile.amplitude < 10.0);
  CHECK_THAT(big.profile.amplitude * unit_c2_norm(big.profile, BumpShape::uniform_direction), WithinRel(1.0, 1e-12));
  CHECK(default_family().profile.amplitude == 0.5);
  CHECK_THROWS_AS(make_family(FamilyKind::mixture, BumpProfile{1.0, 0.5, 3.0}, 1.5), std::invalid_argument);
}

TEST_CASE("tube evaluation agrees with direct summation", "[field]") {
  const auto fam = make_family_unbounded(FamilyKind::mixture, 0.5, 8.0);
  FieldInstance<4> f(fam, 3, 0), g(fam, 3, 0);
  FieldTube<4> tube(f);
  Stream s(8);
  const Vec<4> dir = s.unit_vector<4>();
  for (int k = 0; k < 2000; ++k) {
    const Vec<4> x = dir * (0.05 * k) + s.normal_vec<4>() * 0.1;
    const Vec<4> a = tube.force(x, dir), b = g.force_at(x);
    CHECK(norm(a - b) <= 1e-12 * (1.0 + norm(b)));
  }
}

TEST_CASE("free path reaches the first support along the line", "[field]") {
  const auto fam = default_family();
  Bump<4> b;
  b.center = Vec<4>{5.0, 0.6, 0, 0};
  b.direction = Vec<4>::unit(1);
  auto f = FieldInstance<4>::from_bumps(fam, {b});
  FieldTube<4> tube(f);
  const double d = tube.free_path(Vec<4>{}, Vec<4>::unit(0), 100.0);
  CHECK_THAT(d, WithinAbs(5.0 - std::sqrt(1.0 - 0.36), 1e-9));
}
