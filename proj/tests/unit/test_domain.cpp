#include <doctest.h>

#include <algorithm>

#include "generators.hpp"
#include "v2g/baseline.hpp"
#include "v2g/domain.hpp"
#include "v2g/error.hpp"

using gen::catalog_spec;
using gen::make_session;
using v2g::Mode;

namespace {

bool has_kind(const std::vector<v2g::Violation>& vs, v2g::ViolationKind kind) {
  return std::any_of(vs.begin(), vs.end(), [&](const auto& v) { return v.kind == kind; });
}

}  // namespace

TEST_CASE("domain: time grid arithmetic") {
  const auto grid = v2g::TimeGrid::with_horizon(96);
  CHECK(grid.hours_per_period() == 0.25);
  CHECK(grid.periods_per_step() == 4);
  CHECK(grid.phi(8) == 32);
  v2g::TimeGrid bad = grid;
  bad.planning_interval_minutes = 50;
  CHECK_THROWS_AS(bad.validate(), v2g::InvalidInput);
}

TEST_CASE("domain: energy per period is the smaller power times the period length") {
  const auto grid = v2g::TimeGrid::with_horizon(4);
  CHECK(v2g::max_energy_per_period(catalog_spec("BMW i3 2017"), grid) == doctest::Approx(1.85));
  CHECK(v2g::max_energy_per_period(catalog_spec("Tesla Model X 75 Dual"), grid) == doctest::Approx(3.85));
  v2g::EvSpec zero = catalog_spec("BMW i3 2017");
  zero.acceptance_rate_kw = 0.0;
  zero.charger_power_kw = 0.0;
  CHECK(v2g::max_energy_per_period(zero, grid) == 0.0);
}

TEST_CASE("domain: minimum charging periods") {
  const auto grid = v2g::TimeGrid::with_horizon(20);
  auto s = make_session(0, catalog_spec("BMW i3 2017"), 0, 10, 0.0, 20.0, 5.0, Mode::G2V);
  CHECK(v2g::t_min(s, grid) == 4);  // 5 / 1.665 = 3.003
  s.soc_init_kwh = 5.0;
  CHECK(v2g::t_min(s, grid) == 0);
  auto f = make_session(1, catalog_spec("Ford Focus EV"), 0, 10, 4.9, 20.0, 5.0, Mode::G2V);
  CHECK(v2g::t_min(f, grid) == 1);  // 0.1 / 1.485
  f.soc_init_kwh = 0.0;
  f.t_dep = 2;
  CHECK_THROWS_AS(v2g::t_min(f, grid), v2g::InfeasibleModel);
  CHECK(v2g::t_min_unchecked(f, grid, 0.0) == 4);
  CHECK(v2g::t_min_from(f, grid, 4.0, 0) == 1);
}

TEST_CASE("domain: desired level reachability") {
  const auto grid = v2g::TimeGrid::with_horizon(20);
  const auto s = make_session(0, catalog_spec("Ford Focus EV"), 2, 6, 10.0, 15.94, 5.0, Mode::G2V);
  CHECK(v2g::desired_reachable(s, grid, 10.0, 2));  // 10 + 4 * 1.485 = 15.94
  CHECK_FALSE(v2g::desired_reachable(s, grid, 10.0, 3));
  CHECK_FALSE(v2g::desired_reachable(s, grid, 9.9, 2));
}

TEST_CASE("domain: state of charge trajectories") {
  const auto grid = v2g::TimeGrid::with_horizon(4);
  const auto f = make_session(0, catalog_spec("Ford Focus EV"), 0, 2, 10.0, 12.0, 5.0, Mode::G2V);
  const double xc[] = {1.0, 0.0};
  const auto traj = v2g::soc_trajectory(f, xc, {}, grid);
  REQUIRE(traj.size() == 3);
  CHECK(traj[0] == 10.0);
  CHECK(traj[1] == doctest::Approx(11.485));
  CHECK(traj[2] == doctest::Approx(11.485));

  const double zeros[] = {0.0, 0.0};
  for (double v : v2g::soc_trajectory(f, zeros, zeros, grid)) CHECK(v == 10.0);

  const auto d = make_session(1, catalog_spec("Ford Focus EV"), 0, 1, 10.0, 10.0, 5.0, Mode::V2G);
  const double c0[] = {0.0}, d1[] = {1.0};
  const auto down = v2g::soc_trajectory(d, c0, d1, grid);
  CHECK(down[1] == doctest::Approx(10.0 - 1.65 / 0.9));
}

TEST_CASE("domain: mode names round-trip") {
  CHECK(std::string(v2g::to_string(Mode::V2G)) == "V2G");
  CHECK(v2g::mode_from_string("G2V") == Mode::G2V);
  CHECK(v2g::mode_from_string(v2g::to_string(Mode::V2G)) == Mode::V2G);
  CHECK_THROWS_AS(v2g::mode_from_string("both"), v2g::InvalidInput);
}

TEST_CASE("domain: invalid sessions and scenarios are rejected") {
  auto sc = gen::flat_scenario(8, 1.0, 2.0);
  sc.sessions.push_back(make_session(0, catalog_spec("Chevy Bolt"), 2, 6, 10.0, 40.0, 5.0, Mode::G2V));
  CHECK_NOTHROW(sc.validate());

  auto late = sc;
  late.sessions[0].t_dep = 9;
  CHECK_THROWS_AS(late.validate(), v2g::InvalidInput);
  auto backwards = sc;
  backwards.sessions[0].t_dep = 2;
  CHECK_THROWS_AS(backwards.validate(), v2g::InvalidInput);
  auto overfull = sc;
  overfull.sessions[0].soc_desired_kwh = 61.0;
  CHECK_THROWS_AS(overfull.validate(), v2g::InvalidInput);
  auto negative_wind = sc;
  negative_wind.wind_kwh[3] = -0.1;
  CHECK_THROWS_AS(negative_wind.validate(), v2g::InvalidInput);
  auto free_power = sc;
  free_power.price_cents_per_kwh[0] = 0.0;
  CHECK_THROWS_AS(free_power.validate(), v2g::InvalidInput);
  auto heavy = sc;
  heavy.lambda = 1.5;
  CHECK_THROWS_AS(heavy.validate(), v2g::InvalidInput);
  auto dup = sc;
  dup.sessions.push_back(dup.sessions[0]);
  CHECK_THROWS_AS(dup.validate(), v2g::InvalidInput);
  auto zero_delta = sc;
  zero_delta.delta = 0.0;
  CHECK_NOTHROW(zero_delta.validate());
  auto bad_eta = sc;
  bad_eta.sessions[0].spec.eta_c = 1.2;
  CHECK_THROWS_AS(bad_eta.validate(), v2g::InvalidInput);
}

TEST_CASE("domain: grid flows follow the balance identity") {
  auto sc = gen::flat_scenario(3, 0.0, 2.0);
  sc.wind_kwh = {1.0, 5.0, 0.0};
  sc.sessions.push_back(make_session(0, catalog_spec("Ford Focus EV"), 0, 3, 10.0, 12.0, 5.0, Mode::V2G));
  auto s = v2g::Schedule::empty_for(sc);
  s.x_c[0] = {1.0, 1.0, 0.0};
  s.x_d[0] = {0.0, 0.0, 0.5};
  v2g::recompute_soc(sc, s);
  v2g::derive_grid_flows(sc, s);
  CHECK(s.g_kwh[0] == doctest::Approx(0.65));
  CHECK(s.omega_kwh[0] == 0.0);
  CHECK(s.g_kwh[1] == 0.0);
  CHECK(s.omega_kwh[1] == doctest::Approx(3.35));
  CHECK(s.omega_kwh[2] == doctest::Approx(0.825));
  CHECK(v2g::fleet_charge_kwh(sc, s, 0) == doctest::Approx(1.65));
  CHECK(v2g::fleet_discharge_kwh(sc, s, 2) == doctest::Approx(0.825));
  CHECK(v2g::validate_schedule(sc, s).empty());

  const double fd[] = {1.0, 0.0, 0.0};
  v2g::derive_grid_flows(sc, s, fd);
  CHECK(s.g_kwh[0] == doctest::Approx(1.65));
}

TEST_CASE("domain: schedule validation reports each broken rule") {
  auto sc = gen::flat_scenario(4, 0.0, 2.0);
  sc.sessions.push_back(make_session(0, catalog_spec("Ford Focus EV"), 0, 4, 10.0, 12.0, 5.0, Mode::V2G));
  sc.sessions.push_back(make_session(1, catalog_spec("Nissan Leaf 2017"), 1, 3, 10.0, 11.0, 5.0, Mode::G2V));
  const auto good = v2g::bau_schedule(sc);
  CHECK(v2g::validate_schedule(sc, good).empty());

  SUBCASE("simultaneous charge and discharge") {
    auto s = good;
    s.x_c[0][2] = 1.0;
    s.x_d[0][2] = 1.0;
    v2g::recompute_soc(sc, s);
    v2g::derive_grid_flows(sc, s);
    CHECK(has_kind(v2g::validate_schedule(sc, s), v2g::ViolationKind::Complementarity));
  }
  SUBCASE("discharging a G2V vehicle") {
    auto s = good;
    s.x_d[1][1] = 0.2;
    v2g::recompute_soc(sc, s);
    v2g::derive_grid_flows(sc, s);
    CHECK(has_kind(v2g::validate_schedule(sc, s), v2g::ViolationKind::G2VDischarge));
  }
  SUBCASE("charging while unplugged") {
    auto s = good;
    s.x_c[1][3] = 0.5;
    v2g::derive_grid_flows(sc, s);
    CHECK(has_kind(v2g::validate_schedule(sc, s), v2g::ViolationKind::OutsidePlugPeriod));
  }
  SUBCASE("broken balance") {
    auto s = good;
    s.g_kwh[0] += 1.0;
    s.omega_kwh[0] += 1.0;
    const auto vs = v2g::validate_schedule(sc, s);
    CHECK(has_kind(vs, v2g::ViolationKind::GridCurtailmentOverlap));
    s.omega_kwh[0] -= 1.0;
    CHECK(has_kind(v2g::validate_schedule(sc, s), v2g::ViolationKind::Balance));
  }
  SUBCASE("transformer cap") {
    auto s = good;
    sc.p_g_max_kwh = 1.0;
    CHECK(has_kind(v2g::validate_schedule(sc, s), v2g::ViolationKind::TransformerCap));
  }
  SUBCASE("desired level missed") {
    auto s = v2g::Schedule::empty_for(sc);
    v2g::derive_grid_flows(sc, s);
    CHECK(has_kind(v2g::validate_schedule(sc, s), v2g::ViolationKind::DesiredLevel));
  }
  SUBCASE("stale SOC row") {
    auto s = good;
    s.soc[0][2] += 0.5;
    CHECK(has_kind(v2g::validate_schedule(sc, s), v2g::ViolationKind::SocTrajectory));
  }
  SUBCASE("shape mismatch throws") {
    auto s = good;
    s.x_c.pop_back();
    CHECK_THROWS_AS(v2g::validate_schedule(sc, s), v2g::InvalidInput);
  }
  SUBCASE("violations describe themselves") {
    v2g::Violation v{v2g::ViolationKind::Balance, -1, 3, 0.5};
    CHECK(v2g::describe(v).find("3") != std::string::npos);
  }
}

TEST_CASE("domain: minimum charging from arrival is enforced") {
  auto sc = gen::flat_scenario(6, 0.0, 2.0);
  sc.sessions.push_back(make_session(0, catalog_spec("Ford Focus EV"), 0, 6, 2.0, 2.0, 5.0, Mode::G2V));
  auto s = v2g::Schedule::empty_for(sc);
  s.x_c[0][3] = 1.0;
  s.x_c[0][4] = 1.0;
  v2g::recompute_soc(sc, s);
  v2g::derive_grid_flows(sc, s);
  const auto vs = v2g::validate_schedule(sc, s);
  CHECK(has_kind(vs, v2g::ViolationKind::MinimumCharging));
}
