#pragma once

// Reference solvers used only by tests. They share no code with the library
// solvers: dense linear algebra, a plain primal-dual path-following method
// without predictor-corrector, and brute-force enumeration of binaries.

#include <Eigen/Dense>

#include <optional>

#include "v2g/model.hpp"

namespace oracle {

struct DenseQp {
  Eigen::MatrixXd q;
  Eigen::VectorXd c;
  double constant = 0.0;
  Eigen::MatrixXd a;  // a x <= b
  Eigen::VectorXd b;
  Eigen::MatrixXd e;  // e x = f
  Eigen::VectorXd f;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct QpResult {
  bool feasible = false;
  double objective = 0.0;
  Eigen::VectorXd x;
};

DenseQp to_dense(const v2g::MiqpProblem& problem);

/// Solves the convex QP to high accuracy or reports infeasibility.
QpResult solve_qp(const DenseQp& qp);

/// Minimum over all 0/1 assignments of the binaries of the QP that remains.
/// Returns nothing when every assignment is infeasible.
std::optional<QpResult> solve_miqp_by_enumeration(const v2g::MiqpProblem& problem, long* qp_count = nullptr);

}  // namespace oracle
