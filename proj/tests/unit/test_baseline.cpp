#include <doctest.h>

#include "generators.hpp"
#include "v2g/baseline.hpp"
#include "v2g/simgen.hpp"

using gen::catalog_spec;
using gen::make_session;
using v2g::Mode;

TEST_CASE("baseline: full rate until full with a partial last period") {
  auto spec = catalog_spec("Ford Focus EV");
  auto sc = gen::flat_scenario(6, 0.0, 2.0);
  const double cap = spec.battery_capacity_kwh;
  sc.sessions.push_back(make_session(0, spec, 1, 6, cap - 3.0, cap - 3.0, 5.0, Mode::V2G));
  const auto s = v2g::bau_schedule(sc);
  CHECK(s.x_c[0][0] == 0.0);
  CHECK(s.x_c[0][1] == 1.0);
  CHECK(s.x_c[0][2] == 1.0);
  CHECK(s.x_c[0][3] == doctest::Approx(3.0 / 1.485 - 2.0));
  CHECK(s.x_c[0][3] == doctest::Approx(0.0202).epsilon(1e-2));
  CHECK(s.x_c[0][4] == 0.0);
  for (double x : s.x_d[0]) CHECK(x == 0.0);
  CHECK(s.soc[0][6] == doctest::Approx(cap));
  CHECK(v2g::validate_schedule(sc, s).empty());
}

TEST_CASE("baseline: a full battery stays idle") {
  auto spec = catalog_spec("Nissan Leaf 2017");
  auto sc = gen::flat_scenario(4, 0.0, 2.0);
  sc.sessions.push_back(make_session(0, spec, 0, 4, spec.battery_capacity_kwh, spec.battery_capacity_kwh, 5.0,
                                     Mode::G2V));
  const auto s = v2g::bau_schedule(sc);
  for (double x : s.x_c[0]) CHECK(x == 0.0);
  for (double g : s.g_kwh) CHECK(g == 0.0);
}

TEST_CASE("baseline: two identical sessions double the grid draw") {
  auto spec = catalog_spec("Chevy Bolt");
  auto one = gen::flat_scenario(12, 0.0, 2.0);
  one.sessions.push_back(make_session(0, spec, 2, 12, 10.0, 40.0, 5.0, Mode::G2V));
  auto two = one;
  two.sessions.push_back(make_session(1, spec, 2, 12, 10.0, 40.0, 5.0, Mode::G2V));
  const auto a = v2g::bau_schedule(one), b = v2g::bau_schedule(two);
  for (int t = 0; t < 12; ++t) CHECK(b.g_kwh[t] == doctest::Approx(2.0 * a.g_kwh[t]));
}

TEST_CASE("baseline: wind covers demand before the grid does") {
  auto spec = catalog_spec("Ford Focus EV");
  auto sc = gen::flat_scenario(4, 1.0, 2.0);
  sc.sessions.push_back(make_session(0, spec, 0, 4, 0.0, 10.0, 5.0, Mode::G2V));
  const auto s = v2g::bau_schedule(sc);
  CHECK(s.g_kwh[0] == doctest::Approx(0.65));
  CHECK(s.omega_kwh[0] == 0.0);
}

TEST_CASE("baseline: generated fleets validate and never exceed capacity") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    v2g::ScenarioConfig cfg;
    cfg.n_vehicles = 30;
    cfg.days = 2;
    cfg.seed = seed;
    const auto sc = v2g::generate_with_traces(cfg);
    const auto s = v2g::bau_schedule(sc);
    CAPTURE(seed);
    CHECK(v2g::validate_schedule(sc, s).empty());
    for (std::size_t i = 0; i < sc.sessions.size(); ++i)
      for (double soc : s.soc[i]) CHECK(soc <= sc.sessions[i].spec.battery_capacity_kwh + 1e-9);
  }
}
