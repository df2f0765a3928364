#include <doctest.h>

#include <sstream>
#include <string>

#include "generators.hpp"
#include "oracle.hpp"
#include "v2g/miqp.hpp"

using gen::catalog_spec;
using gen::make_session;
using v2g::Mode;

namespace {

// Two V2G vehicles over eight periods with a large wind surplus and the full
// curtailment weight, so the relaxation wants to charge and discharge at once.
v2g::Scenario desk_2x8() {
  auto sc = gen::flat_scenario(8, 0.0, 1.0);
  const double wind[] = {9.0, 11.0, 2.0, 0.5, 8.0, 12.0, 1.0, 0.0};
  const double price[] = {3.0, 2.5, 6.0, 7.5, 4.0, 2.0, 5.5, 8.0};
  for (int t = 0; t < 8; ++t) {
    sc.wind_kwh[t] = wind[t];
    sc.price_cents_per_kwh[t] = price[t];
  }
  sc.sessions.push_back(make_session(0, catalog_spec("Ford Focus EV"), 0, 4, 8.0, 12.0, 5.0, Mode::V2G));
  sc.sessions.push_back(make_session(1, catalog_spec("Nissan Leaf 2017"), 3, 7, 12.0, 14.0, 5.0, Mode::V2G));
  sc.delta = 1.0;
  sc.lambda = 0.5;
  return sc;
}

double oracle_value(const v2g::Scenario& sc) {
  const auto literal = v2g::build_static(sc, {false, false});
  const auto best = oracle::solve_miqp_by_enumeration(literal);
  REQUIRE(best.has_value());
  return best->objective;
}

// Enumeration on desk-2x8 takes seconds, so it runs once.
double desk_reference() {
  static const double value = oracle_value(desk_2x8());
  return value;
}

}  // namespace

TEST_CASE("miqp: desk-2x8 matches the enumeration oracle") {
  const auto sc = desk_2x8();
  const double reference = desk_reference();
  for (bool literal : {true, false}) {
    const auto p = v2g::build_static(sc, {!literal, !literal});
    const auto sol = v2g::solve(p);
    CAPTURE(literal);
    REQUIRE(sol.status == v2g::SolveStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(reference).epsilon(1e-5));
    CHECK(p.max_violation(sol.x) <= 1e-6);
    const auto via_presolve = v2g::optimize(p);
    REQUIRE(via_presolve.status == v2g::SolveStatus::Optimal);
    CHECK(via_presolve.objective == doctest::Approx(reference).epsilon(1e-5));
  }
}

TEST_CASE("miqp: relaxation is a lower bound on the optimum") {
  const auto sc = desk_2x8();
  const auto p = v2g::build_static(sc);
  const auto relax = v2g::solve_qp(p);
  REQUIRE(relax.status == v2g::QpStatus::Optimal);
  CHECK(relax.objective <= desk_reference() + 1e-7);
}

TEST_CASE("miqp: heuristic incumbent on desk-2x8 is within 5 percent") {
  const auto sc = desk_2x8();
  const auto p = v2g::build_static(sc);
  const auto relax = v2g::solve_qp(p);
  REQUIRE(relax.status == v2g::QpStatus::Optimal);
  const auto inc = v2g::complementarity_heuristic(p, relax.x);
  REQUIRE(inc.has_value());
  const double reference = desk_reference();
  CHECK(inc->objective >= reference - 1e-6);
  CHECK(inc->objective <= reference + 0.05 * std::abs(reference));
  CHECK(p.max_violation(inc->x) <= 1e-6);
}

TEST_CASE("miqp: a fully presolved problem needs one relaxation") {
  auto sc = gen::flat_scenario(6, 2.0, 4.0);
  sc.sessions.push_back(make_session(0, catalog_spec("BMW i3 2017"), 0, 6, 10.0, 14.0, 5.0, Mode::G2V));
  sc.sessions.push_back(make_session(1, catalog_spec("Chevy Bolt"), 1, 5, 20.0, 40.0, 5.0, Mode::G2V));
  const auto p = v2g::build_static(sc);
  const auto sol = v2g::optimize(p);
  REQUIRE(sol.status == v2g::SolveStatus::Optimal);
  CHECK(sol.nodes <= 1);
  CHECK(sol.gap <= 1e-9);
  // Bolt cannot reach 40 kWh in four periods, so its waiver is set.
  for (int j = 0; j < p.num_vars(); ++j)
    if (p.directory[j].role == v2g::VarRole::DesiredWaiver)
      CHECK(sol.x[j] == (p.directory[j].session == 1 ? 1.0 : 0.0));
  CHECK(sol.objective == doctest::Approx(oracle_value(sc)).epsilon(1e-5));
}

TEST_CASE("miqp: waiver forced off for an unreachable target is infeasible") {
  auto sc = gen::flat_scenario(4, 0.0, 2.0);
  sc.sessions.push_back(make_session(0, catalog_spec("Ford Focus EV"), 0, 1, 5.0, 20.0, 5.0, Mode::G2V));
  auto p = v2g::build_static(sc);
  for (int j = 0; j < p.num_vars(); ++j)
    if (p.directory[j].role == v2g::VarRole::DesiredWaiver) p.upper[j] = 0.0;
  CHECK(v2g::solve(p).status == v2g::SolveStatus::Infeasible);
  CHECK(v2g::optimize(p).status == v2g::SolveStatus::Infeasible);
  CHECK_FALSE(oracle::solve_miqp_by_enumeration(p).has_value());
}

TEST_CASE("miqp: one short plug with a large deficit charges at full rate") {
  auto sc = gen::flat_scenario(3, 0.0, 2.0);
  sc.sessions.push_back(make_session(0, catalog_spec("Ford Focus EV"), 1, 2, 5.0, 20.0, 5.0, Mode::V2G));
  const auto p = v2g::build_static(sc);
  const auto sol = v2g::optimize(p);
  REQUIRE(sol.status == v2g::SolveStatus::Optimal);
  const auto sched = v2g::extract_static(sc, p, sol.x);
  CHECK(sched.x_c[0][1] == doctest::Approx(1.0));
  CHECK(sched.x_d[0][1] == doctest::Approx(0.0));
}

TEST_CASE("miqp: heuristic keeps a complementary relaxation as is") {
  auto sc = gen::flat_scenario(4, 0.0, 3.0);
  sc.sessions.push_back(make_session(0, catalog_spec("Ford Focus EV"), 0, 4, 10.0, 12.0, 5.0, Mode::V2G));
  // Without presolve the waiver relaxes to a fraction and the relaxation
  // trades charge against discharge; with the waiver fixed it has no reason to.
  const auto p = v2g::presolve(v2g::build_static(sc)).reduced;
  const auto relax = v2g::solve_qp(p);
  REQUIRE(relax.status == v2g::QpStatus::Optimal);
  REQUIRE_FALSE(p.pairs.empty());
  for (const auto& pair : p.pairs) CHECK(relax.x[pair.charge] * relax.x[pair.discharge] <= 1e-12);
  const auto sol = v2g::solve(p);
  REQUIRE(sol.status == v2g::SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(relax.objective).epsilon(1e-9));
  CHECK(sol.gap <= 1e-9);
  CHECK(sol.nodes == 1);
}

TEST_CASE("miqp: heuristic resolves a half-half overlap to one side") {
  auto sc = gen::flat_scenario(1, 0.0, 3.0);
  sc.sessions.push_back(make_session(0, catalog_spec("Ford Focus EV"), 0, 1, 10.0, 10.0, 5.0, Mode::V2G));
  const auto p = v2g::build_static(sc, {false, false});
  REQUIRE(p.pairs.size() == 1);
  Eigen::VectorXd point = Eigen::VectorXd::Zero(p.num_vars());
  const auto& pair = p.pairs[0];
  point[pair.charge] = 0.5;
  point[pair.discharge] = 0.5;
  point[pair.charge_block] = 0.5;
  point[pair.discharge_block] = 0.5;
  const auto inc = v2g::complementarity_heuristic(p, point);
  REQUIRE(inc.has_value());
  const double yc = inc->x[pair.charge_block], yd = inc->x[pair.discharge_block];
  CHECK(((yc == 1.0 && yd == 0.0) || (yc == 0.0 && yd == 1.0)));
  CHECK(inc->x[pair.charge] * inc->x[pair.discharge] == 0.0);
}

TEST_CASE("miqp: snap_to_integral rejects overlapping points") {
  auto sc = gen::flat_scenario(1, 0.0, 3.0);
  sc.sessions.push_back(make_session(0, catalog_spec("Ford Focus EV"), 0, 1, 10.0, 10.0, 5.0, Mode::V2G));
  const auto p = v2g::build_static(sc);
  Eigen::VectorXd point = Eigen::VectorXd::Zero(p.num_vars());
  const auto& pair = p.pairs[0];
  point[pair.charge] = 0.3;
  point[pair.discharge] = 0.3;
  CHECK_FALSE(v2g::snap_to_integral(p, point, p.lower, p.upper).has_value());
}

TEST_CASE("miqp: trace lines follow the documented format") {
  const auto sc = desk_2x8();
  const auto p = v2g::build_static(sc, {false, false});
  std::ostringstream trace;
  v2g::SolverConfig cfg;
  cfg.trace = &trace;
  const auto sol = v2g::solve(p, cfg);
  REQUIRE(sol.status == v2g::SolveStatus::Optimal);
  std::istringstream lines(trace.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    std::istringstream f(line);
    std::string node, depth, bound, action;
    long id;
    int d;
    double b;
    std::string a;
    f >> node >> id >> depth >> d >> bound >> b >> action >> a;
    CHECK(node == "node");
    CHECK(depth == "depth");
    CHECK(bound == "bound");
    CHECK(action == "action");
    CHECK_FALSE(a.empty());
    ++count;
  }
  CHECK(count >= sol.nodes);
}

TEST_CASE("miqp: node limit stops the search with its own status") {
  const auto sc = desk_2x8();
  const auto p = v2g::build_static(sc, {false, false});
  const auto full = v2g::solve(p);
  REQUIRE(full.status == v2g::SolveStatus::Optimal);
  if (full.nodes > 1) {
    v2g::SolverConfig cfg;
    cfg.node_limit = 1;
    cfg.use_heuristic = false;
    const auto limited = v2g::solve(p, cfg);
    CHECK(limited.status == v2g::SolveStatus::NodeLimit);
  }
}

TEST_CASE("miqp: pseudo-cost branching reaches the same optimum") {
  gen::Rng rng(4242);
  for (int k = 0; k < 8; ++k) {
    const auto sc = gen::random_small_scenario(rng);
    const auto p = v2g::build_static(sc, {false, false});
    v2g::SolverConfig cfg;
    cfg.branching_rule = v2g::BranchingRule::PseudoCost;
    const auto a = v2g::solve(p);
    const auto b = v2g::solve(p, cfg);
    CAPTURE(k);
    REQUIRE(a.status == b.status);
    if (a.status == v2g::SolveStatus::Optimal)
      CHECK(b.objective == doctest::Approx(a.objective).epsilon(1e-6));
  }
}

TEST_CASE("miqp: random small instances agree with the oracle") {
  gen::Rng rng(99);
  for (int k = 0; k < 10; ++k) {
    gen::InstanceShape shape;
    shape.max_binaries = 10;
    const auto sc = gen::random_small_scenario(rng, shape);
    const auto literal = v2g::build_static(sc, {false, false});
    const auto reference = oracle::solve_miqp_by_enumeration(literal);
    const auto sol = v2g::optimize(v2g::build_static(sc));
    CAPTURE(k);
    if (!reference) {
      CHECK(sol.status == v2g::SolveStatus::Infeasible);
      continue;
    }
    REQUIRE(sol.status == v2g::SolveStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(reference->objective).epsilon(1e-5));
  }
}
