#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "rfflab/config.hpp"
#include "rfflab/io.hpp"

using namespace rfflab;

TEST_CASE("shortest round-trip formatting", "[io]") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, 0.0}) CHECK(std::stod(fmt(x)) == x);
  CHECK(fmt(0.1) == "0.1");
  CHECK(fmt(50.0) == "50");
}

TEST_CASE("CSV headers", "[io]") {
  std::ostringstream a;
  write_trajectory_csv<4>(a, {{1.0, Vec<4>{1, 2, 3, 4}, Vec<4>{0, 2, 0, 0}}});
  CHECK(a.str() == "t,X1,X2,X3,X4,V1,V2,V3,V4,E\n1,1,2,3,4,0,2,0,0,2\n");

  std::ostringstream b;
  SegmentRecord<4> s;
  s.n = 2;
  s.tau = 0.5;
  s.eta = 0.75;
  s.xi_norm = 0.0;
  s.flags = kFlagOpen;
  write_renewal_csv<4>(b, {s});
  CHECK(b.str().rfind("n,tau_n,Y1,Y2,Y3,Y4,v1,v2,v3,v4,eta_n,xi_norm,max_dev,flags\n2,0.5,", 0) == 0);
  CHECK(b.str().find(",0.75,0,0,8\n") != std::string::npos);

  std::ostringstream c;
  write_energy_path_csv(c, EnergyPath{{1.0, 2.0}, {0.5, 0.25}});
  CHECK(c.str() == "t,E\n1,0.5\n2,0.25\n");

  std::ostringstream e;
  write_ecdf_csv(e, {3.0, 1.0});
  CHECK(e.str() == "x,ecdf\n1,0.5\n3,1\n");

  std::ostringstream d;
  write_density_csv(d, 4, 2.0, 3);
  CHECK(d.str().rfind("x,p,cdf\n0,0,0\n1,", 0) == 0);
  CHECK_THROWS_AS(write_density_csv(d, 4, 2.0, 1), std::invalid_argument);
}

TEST_CASE("report JSON carries the schema version", "[io]") {
  EnsembleReport rep;
  rep.run = 4;
  rep.used = 3;
  rep.excluded_trapped = 1;
  const auto j = to_json(rep);
  CHECK(j["schema_version"] == 1);
  CHECK(j["excluded"]["trapped"] == 1);
  CHECK(j["excluded"]["fraction"] == 0.25);
  CHECK(j["config"]["model"] == "X");
}

TEST_CASE("config layering: file over defaults, flags over file", "[io]") {
  const json file = {{"seed", 7}, {"field", {{"R", 0.5}}}};
  const json flags = {{"seed", 9}};
  const json c = merged(merged(default_run_config(), file), flags);
  CHECK(c["seed"] == 9);
  CHECK(c["field"]["R"] == 0.5);
  CHECK(c["field"]["A"] == 0.5);  // untouched default
  CHECK_NOTHROW(validate_run_config(c));
}

TEST_CASE("config validation", "[io]") {
  auto c = default_run_config();
  c["dim"] = 3;
  CHECK_THROWS_WITH(validate_run_config(c), Catch::Matchers::ContainsSubstring("d >= 4 is required"));
  c["dim"] = 7;
  CHECK_THROWS_AS(validate_run_config(c), std::invalid_argument);
  c = default_run_config();
  c["field"]["R"] = 0.0;
  CHECK_THROWS_AS(validate_run_config(c), std::invalid_argument);
  c = default_run_config();
  c["dynamics"]["v0"] = -1.0;
  CHECK_THROWS_AS(validate_run_config(c), std::invalid_argument);
  CHECK_THROWS_AS(load_json_file("/nonexistent/config.json"), std::invalid_argument);
}

TEST_CASE("config to typed objects", "[io]") {
  auto c = default_run_config();
  c["field"]["family"] = "radial";
  c["field"]["enforceC2"] = false;
  c["field"]["A"] = 8.0;
  const auto fam = family_from(c);
  CHECK(fam.kind == FamilyKind::radial_gradient);
  CHECK(fam.profile.amplitude == 8.0);
  c["field"]["family"] = "spiral";
  CHECK_THROWS_AS(family_from(c), std::invalid_argument);

  c = default_run_config();
  c["dynamics"]["t_max"] = 16.0;
  CHECK(schedule_from(c) == std::vector<double>{1, 2, 4, 8, 16});
  c["dynamics"]["schedule"] = json::array({0.5, 3.0});
  CHECK(schedule_from(c) == std::vector<double>{0.5, 3.0});

  const auto e = ensemble_from(c, Model::particle_y);
  CHECK(e.schedule == std::vector<double>{0.5, 3.0});
  CHECK(e.seed == 42);
  CHECK(e.model == Model::particle_y);
  CHECK(ensemble_from(c, Model::limit_e).schedule.empty());
}
