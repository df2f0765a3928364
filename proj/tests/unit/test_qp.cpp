#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "oracle.hpp"
#include "v2g/qp.hpp"

using v2g::MiqpProblem;

namespace {

MiqpProblem empty_problem(int n) {
  MiqpProblem p;
  p.q.resize(n, n);
  p.c = Eigen::VectorXd::Zero(n);
  p.a_ineq.resize(0, n);
  p.b_ineq.resize(0);
  p.a_eq.resize(0, n);
  p.b_eq.resize(0);
  p.lower = Eigen::VectorXd::Constant(n, -1e6);
  p.upper = Eigen::VectorXd::Constant(n, 1e6);
  p.directory.assign(n, v2g::VarInfo{v2g::VarRole::GridSupply, -1, 0});
  return p;
}

void set_rows(v2g::SparseMatrix& m, int rows, int cols, std::initializer_list<Eigen::Triplet<double>> entries) {
  m.resize(rows, cols);
  std::vector<Eigen::Triplet<double>> t(entries);
  m.setFromTriplets(t.begin(), t.end());
}

}  // namespace

TEST_CASE("qp: minimize x^2 subject to x >= 3") {
  MiqpProblem p = empty_problem(1);
  set_rows(p.q, 1, 1, {{0, 0, 2.0}});
  p.lower[0] = 3.0;
  const auto sol = v2g::solve_qp(p);
  REQUIRE(sol.status == v2g::QpStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(sol.objective == doctest::Approx(9.0).epsilon(1e-9));
  CHECK(sol.bound_duals[0] < 0.0);
}

TEST_CASE("qp: two-variable LP matches the hand vertex") {
  // max x + 2y  s.t. x + y <= 4, x + 3y <= 6, x, y >= 0  -> (3, 1), value 5.
  MiqpProblem p = empty_problem(2);
  p.c << -1.0, -2.0;
  set_rows(p.a_ineq, 2, 2, {{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 3.0}});
  p.b_ineq = Eigen::Vector2d(4.0, 6.0);
  p.lower.setZero();
  const auto sol = v2g::solve_qp(p);
  REQUIRE(sol.status == v2g::QpStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(sol.x[1] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.objective == doctest::Approx(-5.0).epsilon(1e-9));
  CHECK(sol.active.ineq[0] == 1);
  CHECK(sol.active.ineq[1] == 1);
}

TEST_CASE("qp: equality-constrained projection") {
  // Closest point to (1, 2, 3) on x + y + z = 0.
  MiqpProblem p = empty_problem(3);
  set_rows(p.q, 3, 3, {{0, 0, 2.0}, {1, 1, 2.0}, {2, 2, 2.0}});
  p.c << -2.0, -4.0, -6.0;
  p.constant = 14.0;
  set_rows(p.a_eq, 1, 3, {{0, 0, 1.0}, {0, 1, 1.0}, {0, 2, 1.0}});
  p.b_eq = Eigen::VectorXd::Zero(1);
  const auto sol = v2g::solve_qp(p);
  REQUIRE(sol.status == v2g::QpStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(sol.x[2] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sol.objective == doctest::Approx(12.0).epsilon(1e-9));
}

TEST_CASE("qp: contradictory rows are reported infeasible") {
  MiqpProblem p = empty_problem(1);
  set_rows(p.a_ineq, 1, 1, {{0, 0, 1.0}});
  p.b_ineq = Eigen::VectorXd::Constant(1, 1.0);
  p.lower[0] = 2.0;
  p.upper[0] = 5.0;
  const auto sol = v2g::solve_qp(p);
  CHECK(sol.status == v2g::QpStatus::Infeasible);
  CHECK_FALSE(oracle::solve_qp(oracle::to_dense(p)).feasible);
}

TEST_CASE("qp: fixed columns are substituted") {
  MiqpProblem p = empty_problem(2);
  set_rows(p.q, 2, 2, {{0, 0, 2.0}, {1, 1, 2.0}, {0, 1, 1.0}, {1, 0, 1.0}});
  p.lower[1] = p.upper[1] = 2.0;
  const auto sol = v2g::solve_qp(p);
  REQUIRE(sol.status == v2g::QpStatus::Optimal);
  CHECK(sol.x[1] == 2.0);
  CHECK(sol.x[0] == doctest::Approx(-1.0).epsilon(1e-9));  // d/dx (x^2 + 2x + 4) = 0
  CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("qp: relaxations of built models agree with the dense reference") {
  gen::Rng rng(20240601);
  int checked = 0;
  for (int k = 0; k < 30; ++k) {
    const auto sc = gen::random_small_scenario(rng);
    for (bool literal : {true, false}) {
      const auto p = v2g::build_static(sc, {!literal, !literal});
      const auto mine = v2g::solve_qp(p);
      const auto ref = oracle::solve_qp(oracle::to_dense(p));
      CAPTURE(k);
      CAPTURE(literal);
      REQUIRE(ref.feasible == (mine.status == v2g::QpStatus::Optimal));
      if (!ref.feasible) continue;
      CHECK(mine.objective == doctest::Approx(ref.objective).epsilon(1e-7).scale(1.0));
      CHECK(p.max_violation(mine.x) <= 1e-7);
      ++checked;
    }
  }
  CHECK(checked >= 40);
}

TEST_CASE("qp: a verified warm start is reused") {
  gen::Rng rng(77);
  int reused = 0;
  for (int k = 0; k < 20 && reused < 3; ++k) {
    const auto sc = gen::random_small_scenario(rng);
    const auto p = v2g::build_static(sc);
    const auto cold = v2g::solve_qp(p);
    if (cold.status != v2g::QpStatus::Optimal || !cold.polished) continue;
    const auto warm = v2g::solve_qp(p, p.lower, p.upper, {}, &cold.active);
    REQUIRE(warm.status == v2g::QpStatus::Optimal);
    CHECK(warm.warm_started);
    CHECK(warm.iterations == 0);
    CHECK(warm.objective == doctest::Approx(cold.objective).epsilon(1e-9));
    ++reused;
  }
  CHECK(reused == 3);
}
