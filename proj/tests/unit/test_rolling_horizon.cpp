#include <doctest.h>

#include <json.hpp>

#include "generators.hpp"
#include "v2g/error.hpp"
#include "v2g/metrics.hpp"
#include "v2g/miqp.hpp"
#include "v2g/rolling_horizon.hpp"
#include "v2g/simgen.hpp"

using gen::catalog_spec;
using gen::make_session;
using v2g::Mode;

TEST_CASE("rolling horizon: future demand from one expected arrival") {
  v2g::FutureDemandModel m;
  m.expected_required_charge = 20.0;
  m.expected_plug_periods = 16.0;
  m.arrival_rate.assign(96, 0.0);
  const auto none = v2g::estimate_future_demand(m, 4, {4, 40});
  for (double d : none) CHECK(d == 0.0);

  m.arrival_rate[10] = 1.0;
  m.arrival_rate[4] = 1.0;  // at the planning instant itself: already known
  const auto d = v2g::estimate_future_demand(m, 4, {4, 40});
  REQUIRE(d.size() == 36);
  for (int t = 4; t < 40; ++t) {
    CAPTURE(t);
    const double expected = (t >= 10 && t < 26) ? 1.25 : 0.0;
    CHECK(d[t - 4] == doctest::Approx(expected));
  }
}

TEST_CASE("rolling horizon: arrival rates repeat daily") {
  v2g::FutureDemandModel m;
  m.expected_required_charge = 8.0;
  m.expected_plug_periods = 4.0;
  m.arrival_rate.assign(96, 0.0);
  m.arrival_rate[2] = 0.5;
  const auto d = v2g::estimate_future_demand(m, 96, {96, 110});
  CHECK(d[2] == doctest::Approx(1.0));
  CHECK(d[5] == doctest::Approx(1.0));
  CHECK(d[6] == 0.0);
  m.expected_plug_periods = 0.0;
  CHECK_THROWS_AS(v2g::estimate_future_demand(m, 0, {0, 4}), v2g::InvalidInput);
}

TEST_CASE("rolling horizon: arrivals are batched to the next planning instant") {
  auto sc = gen::flat_scenario(96, 0.0, 2.0);
  const auto spec = catalog_spec("Ford Focus EV");
  sc.sessions.push_back(make_session(0, spec, 28, 40, 10.0, 12.0, 5.0, Mode::G2V));
  sc.sessions.push_back(make_session(1, spec, 29, 40, 10.0, 12.0, 5.0, Mode::G2V));
  sc.sessions.push_back(make_session(2, spec, 32, 40, 10.0, 12.0, 5.0, Mode::G2V));
  sc.sessions.push_back(make_session(3, spec, 0, 40, 10.0, 12.0, 5.0, Mode::G2V));
  CHECK(v2g::arrivals_for_step(sc, 0) == std::vector<int>{3});
  CHECK(v2g::arrivals_for_step(sc, 7) == std::vector<int>{0});
  CHECK(v2g::arrivals_for_step(sc, 8) == std::vector<int>{1, 2});
  CHECK(v2g::arrivals_for_step(sc, 9).empty());
}

TEST_CASE("rolling horizon: morning arrivals open the window 32..56") {
  auto sc = gen::flat_scenario(96, 1.0, 2.0);
  const auto spec = catalog_spec("Ford Focus EV");
  sc.sessions.push_back(make_session(0, spec, 29, 40, 10.0, 14.0, 5.0, Mode::G2V));
  sc.sessions.push_back(make_session(1, spec, 30, 48, 8.0, 15.0, 5.0, Mode::V2G));
  sc.sessions.push_back(make_session(2, spec, 31, 56, 12.0, 18.0, 5.0, Mode::G2V));
  auto state = v2g::initial_state(sc);
  const v2g::PlannerConfig cfg;
  for (int j = 0; j < 8; ++j) {
    const auto d = v2g::step(sc, state, v2g::arrivals_for_step(sc, j), cfg);
    CHECK_FALSE(d.solved);
    CHECK(d.status == "idle");
  }
  CHECK(state.committed_until == 32);
  const auto d = v2g::step(sc, state, v2g::arrivals_for_step(sc, 8), cfg);
  CHECK(d.solved);
  CHECK(d.arrivals == 3);
  CHECK(d.active == 3);
  CHECK(d.window_start == 32);
  CHECK(d.window_start + d.window_length == 56);
  CHECK(state.j == 9);
  CHECK(state.committed_until == 36);
  for (int i = 0; i < 3; ++i) CHECK(state.committed.plan_start[i] == 32);
}

TEST_CASE("rolling horizon: idle step leaves the state alone") {
  auto sc = gen::flat_scenario(8, 1.0, 2.0);
  auto state = v2g::initial_state(sc);
  const auto before = state.committed.x_c;
  const auto d = v2g::step(sc, state, {}, {});
  CHECK_FALSE(d.solved);
  CHECK(state.active.empty());
  CHECK(state.committed.x_c == before);
  CHECK(state.j == 1);
}

TEST_CASE("rolling horizon: committed rates never change and SOC carries over") {
  v2g::ScenarioConfig cfg;
  cfg.n_vehicles = 6;
  cfg.days = 1;
  cfg.seed = 3;
  cfg.r_v2g = 0.5;
  auto sc = v2g::generate_with_traces(cfg);
  auto state = v2g::initial_state(sc);
  const v2g::PlannerConfig planner;
  for (int j = 0; sc.grid.phi(j) < sc.horizon(); ++j) {
    const auto frozen = state.committed;
    const int until = state.committed_until;
    v2g::step(sc, state, v2g::arrivals_for_step(sc, j), planner);
    for (std::size_t i = 0; i < sc.sessions.size(); ++i)
      for (int t = 0; t < until; ++t) {
        CHECK(state.committed.x_c[i][t] == frozen.x_c[i][t]);
        CHECK(state.committed.x_d[i][t] == frozen.x_d[i][t]);
      }
    const int now = sc.grid.phi(state.j);
    for (const auto& a : state.active) {
      const auto& s = sc.sessions[a.index];
      const int start = state.committed.plan_start[a.index];
      const int end = std::min(now, s.t_dep);
      if (end <= start) continue;
      std::span<const double> xc(state.committed.x_c[a.index].data() + start, end - start);
      std::span<const double> xd(state.committed.x_d[a.index].data() + start, end - start);
      const double expected = v2g::soc_trajectory_from(s, s.soc_init_kwh, xc, xd, sc.grid).back();
      CHECK(a.soc_now == doctest::Approx(expected).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("rolling horizon: perfect forecast is no better than the static optimum") {
  auto sc = gen::flat_scenario(24, 0.0, 2.0);
  for (int t = 0; t < 24; ++t) {
    sc.wind_kwh[t] = t % 6 < 3 ? 2.0 : 0.2;
    sc.price_cents_per_kwh[t] = 2.0 + (t % 8);
  }
  sc.sessions.push_back(make_session(0, catalog_spec("Nissan Leaf 2017"), 4, 20, 10.0, 18.0, 5.0, Mode::V2G));
  const auto stat_p = v2g::build_static(sc);
  const auto stat = v2g::optimize(stat_p);
  REQUIRE(stat.status == v2g::SolveStatus::Optimal);
  const auto dyn = v2g::run(sc, {});
  CHECK(v2g::validate_schedule(sc, dyn.schedule).empty());
  CHECK(stat.objective <= v2g::objective_value(sc, dyn.schedule) + 1e-6);
}

TEST_CASE("rolling horizon: zero wind and flat price buy exactly the deficit") {
  auto sc = gen::flat_scenario(16, 0.0, 3.0);
  const auto spec = catalog_spec("Ford Focus EV");
  sc.sessions.push_back(make_session(0, spec, 0, 16, 10.0, 15.0, 5.0, Mode::G2V));
  const auto res = v2g::run(sc, {});
  const double p = v2g::max_energy_per_period(spec, sc.grid);
  double drawn = 0.0;
  for (double x : res.schedule.x_c[0]) drawn += x * p;
  CHECK(drawn == doctest::Approx(5.0 / 0.9).epsilon(1e-6));
  CHECK(res.schedule.soc[0][16] == doctest::Approx(15.0).epsilon(1e-6));
  CHECK(v2g::validate_schedule(sc, res.schedule).empty());
}

TEST_CASE("rolling horizon: diagnostics serialize as one JSON object") {
  v2g::StepDiagnostics d;
  d.j = 3;
  d.phi = 12;
  d.status = "idle";
  d.seconds = 0.5;
  const auto plain = nlohmann::json::parse(v2g::to_json_line(d));
  CHECK(plain["j"] == 3);
  CHECK_FALSE(plain.contains("objective"));
  CHECK_FALSE(plain.contains("seconds"));
  d.solved = true;
  d.objective = 4.5;
  const auto timed = nlohmann::json::parse(v2g::to_json_line(d, true));
  CHECK(timed["objective"] == 4.5);
  CHECK(timed["seconds"] == 0.5);
}
