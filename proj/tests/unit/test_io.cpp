#include <doctest.h>

#include <filesystem>

#include "generators.hpp"
#include "v2g/baseline.hpp"
#include "v2g/error.hpp"
#include "v2g/io.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / "v2g_io_tests";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("io: series CSV parsing") {
  const auto v = v2g::parse_series_csv("period,kwh\n0,1.5\n1,2\n2,0\n", "kwh");
  CHECK(v == std::vector<double>{1.5, 2.0, 0.0});
  CHECK(v2g::parse_series_csv(v2g::series_to_csv(v, "kwh"), "kwh") == v);
  CHECK_THROWS_AS(v2g::parse_series_csv("period,mw\n0,1\n", "kwh"), v2g::InvalidInput);
  CHECK_THROWS_AS(v2g::parse_series_csv("period,kwh\n0,1\n2,1\n", "kwh"), v2g::InvalidInput);
  CHECK_THROWS_AS(v2g::parse_series_csv("period,kwh\n0,abc\n", "kwh"), v2g::InvalidInput);
  CHECK_THROWS_AS(v2g::parse_series_csv("period,kwh\n0,1,2\n", "kwh"), v2g::InvalidInput);
  CHECK_THROWS_AS(v2g::parse_series_csv("", "kwh"), v2g::InvalidInput);
}

TEST_CASE("io: hourly expansion") {
  const std::vector<double> hourly{1.0, 2.0};
  CHECK(v2g::expand_hourly(hourly, 2) == std::vector<double>{1.0, 1.0, 2.0, 2.0});
  CHECK_THROWS_AS(v2g::expand_hourly(hourly, 0), v2g::InvalidInput);
}

TEST_CASE("io: missing files name their path") {
  const fs::path missing = scratch_dir() / "does_not_exist.csv";
  try {
    v2g::read_text_file(missing);
    FAIL("expected an IoError");
  } catch (const v2g::IoError& e) {
    CHECK(e.path() == missing.string());
    CHECK(std::string(e.what()).find("does_not_exist.csv") != std::string::npos);
  }
}

TEST_CASE("io: file write and read back") {
  const fs::path p = scratch_dir() / "nested" / "a.txt";
  v2g::write_text_file(p, "hello\n");
  CHECK(v2g::read_text_file(p) == "hello\n");
}

TEST_CASE("io: scenario JSON round trip") {
  v2g::ScenarioConfig cfg;
  cfg.n_vehicles = 12;
  cfg.days = 1;
  cfg.seed = 21;
  auto sc = v2g::generate_with_traces(cfg);
  sc.lambda = 0.4;
  sc.degradation.alpha = 0.07;
  const auto text = v2g::scenario_to_json(sc);
  const auto back = v2g::scenario_from_json(text);
  CHECK(v2g::scenario_to_json(back) == text);
  CHECK(back.sessions.size() == sc.sessions.size());
  CHECK(back.lambda == 0.4);
  CHECK(back.degradation.alpha == 0.07);
  CHECK(back.wind_kwh == sc.wind_kwh);
  CHECK_THROWS_AS(v2g::scenario_from_json(R"({"grid": {}})"), v2g::InvalidInput);
}

TEST_CASE("io: schedule CSV round trip") {
  v2g::ScenarioConfig cfg;
  cfg.n_vehicles = 8;
  cfg.days = 1;
  cfg.seed = 6;
  const auto sc = v2g::generate_with_traces(cfg);
  const auto s = v2g::bau_schedule(sc);
  const auto csv = v2g::schedule_to_csv(sc, s);
  CHECK(csv.rfind("session_id,period,x_c,x_d,soc_kwh\n", 0) == 0);
  const auto back = v2g::schedule_from_csv(sc, csv);
  for (std::size_t i = 0; i < sc.sessions.size(); ++i) {
    CHECK(back.x_c[i] == s.x_c[i]);
    CHECK(back.x_d[i] == s.x_d[i]);
    for (std::size_t t = 0; t < s.soc[i].size(); ++t) CHECK(back.soc[i][t] == doctest::Approx(s.soc[i][t]));
  }
  CHECK(back.g_kwh == s.g_kwh);
  auto recomputed = s;
  v2g::recompute_soc(sc, recomputed);
  CHECK(v2g::schedule_to_csv(sc, back) == v2g::schedule_to_csv(sc, recomputed));
  CHECK_THROWS_AS(v2g::schedule_from_csv(sc, "session_id,period,x_c,x_d,soc_kwh\n999,0,1,0,1\n"), v2g::InvalidInput);
}

TEST_CASE("io: experiment config resolves paths against its directory") {
  const auto dir = scratch_dir() / "cfg";
  fs::create_directories(dir);
  const auto c = v2g::parse_experiment_config(R"({
    "generator": {"n_vehicles": 7, "days": 1, "seed": 3, "r_v2g": 0.2},
    "wind_csv": "wind.csv",
    "price_csv": "/abs/price.csv",
    "lambda": 0.5,
    "delta": 0.1,
    "future_demand": false,
    "solver": {"branching_rule": "pseudo-cost", "node_limit": 99, "merge_v2g_level_terms": false}
  })",
                                              dir);
  CHECK(c.generator.n_vehicles == 7);
  CHECK(c.generator.r_v2g == 0.2);
  CHECK(*c.wind_csv == dir / "wind.csv");
  CHECK(*c.price_csv == fs::path("/abs/price.csv"));
  CHECK(c.lambda == 0.5);
  CHECK_FALSE(c.future_demand);
  CHECK(c.solver.branching_rule == v2g::BranchingRule::PseudoCost);
  CHECK(c.solver.node_limit == 99);
  CHECK_FALSE(c.build.merge_v2g_level_terms);
  CHECK_THROWS_AS(v2g::parse_experiment_config(R"({"solver": {"branching_rule": "random"}})", dir),
                  v2g::InvalidInput);
  CHECK_THROWS_AS(v2g::parse_experiment_config("{", dir), v2g::InvalidInput);
}

TEST_CASE("io: building a scenario from config and trace files") {
  const auto dir = scratch_dir() / "build";
  fs::create_directories(dir);
  std::vector<double> wind(96 * 2, 3.0), hourly_price(48, 4.0);
  v2g::write_text_file(dir / "wind.csv", v2g::series_to_csv(wind, "kwh"));
  v2g::write_text_file(dir / "price.csv", v2g::series_to_csv(hourly_price, "cents_per_kwh"));
  v2g::write_text_file(dir / "config.json", R"({
    "generator": {"n_vehicles": 5, "days": 1, "seed": 3},
    "wind_csv": "wind.csv", "price_csv": "price.csv", "price_hourly": true,
    "lambda": 0.25, "delta": 0.5
  })");
  const auto cfg = v2g::load_experiment_config(dir / "config.json");
  const auto sc = v2g::build_scenario(cfg);
  CHECK(sc.sessions.size() == 5);
  CHECK(sc.lambda == 0.25);
  CHECK(sc.delta == 0.5);
  CHECK(sc.wind_kwh.size() == static_cast<std::size_t>(sc.horizon()));
  for (double p : sc.price_cents_per_kwh) CHECK(p == 4.0);
  CHECK(v2g::build_scenario(cfg, 9).seed == 9);

  auto short_trace = cfg;
  v2g::write_text_file(dir / "short.csv", v2g::series_to_csv(std::vector<double>(10, 1.0), "kwh"));
  short_trace.wind_csv = dir / "short.csv";
  CHECK_THROWS_AS(v2g::build_scenario(short_trace), v2g::InvalidInput);
  auto missing = cfg;
  missing.wind_csv = dir / "nope.csv";
  CHECK_THROWS_AS(v2g::build_scenario(missing), v2g::IoError);
}

TEST_CASE("io: the shipped example config loads") {
  const auto cfg = v2g::load_experiment_config(fs::path(V2G_DATA_DIR) / "example_config.json");
  CHECK_NOTHROW(cfg.generator.validate());
}
