#pragma once

#include <Eigen/Core>

#include <vector>

#include "v2g/model.hpp"

namespace v2g {

struct QpSettings {
  /// Absolute bound on primal and dual residuals of a returned optimum.
  double feasibility_tolerance = 1e-7;
  /// Relative stopping target of the interior-point iterations.
  double ipm_tolerance = 1e-10;
  int max_iterations = 200;
  /// Re-solve on the identified active set for an exact vertex-style answer.
  bool polish = true;
};

enum class QpStatus { Optimal, Infeasible, Unbounded, IterationLimit, NumericalFailure };

const char* to_string(QpStatus status);

/// Active constraints of a solution in the full column/row space.
/// `ineq[r]` is 1 when row r is tight; `bounds[j]` is -1 at lower, +1 at upper.
struct ActiveSet {
  std::vector<signed char> ineq;
  std::vector<signed char> bounds;
  /// Point the set was read from; anchors directions of zero curvature when
  /// the set is reused as a warm start. May be empty.
  Eigen::VectorXd point;

  bool empty() const { return ineq.empty() && bounds.empty(); }
};

struct QpSolution {
  QpStatus status = QpStatus::NumericalFailure;
  Eigen::VectorXd x;
  double objective = 0.0;
  Eigen::VectorXd eq_duals;
  Eigen::VectorXd ineq_duals;
  /// Positive at an active upper bound, negative at an active lower bound.
  Eigen::VectorXd bound_duals;
  ActiveSet active;
  int iterations = 0;
  bool polished = false;
  bool warm_started = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double complementarity = 0.0;
};

/// Solves the continuous relaxation of `problem` with the box replaced by
/// [lower, upper]; binaries are treated as continuous within that box.
/// Columns with lower == upper are substituted out. A warm start is tried as
/// an active-set guess first and only accepted if its KKT conditions verify.
QpSolution solve_qp(const MiqpProblem& problem, const Eigen::VectorXd& lower,
                    const Eigen::VectorXd& upper, const QpSettings& settings = {},
                    const ActiveSet* warm_start = nullptr);

QpSolution solve_qp(const MiqpProblem& problem, const QpSettings& settings = {});

}  // namespace v2g
