#pragma once

#include <Eigen/SparseCore>

#include <vector>

#include "v2g/model.hpp"

namespace v2g::detail {

// Row-major copy of a problem's constraints for activity-based propagation.
// Equalities are stored once and checked in both directions.
class RowStore {
 public:
  explicit RowStore(const MiqpProblem& problem);

  // Tightens [lower, upper] in place. Binary columns are rounded to {0, 1};
  // returns false when some row or bound is provably violated.
  bool propagate(std::vector<double>& lower, std::vector<double>& upper, int max_passes = 8) const;

 private:
  using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  bool propagate_row(const RowMatrix& rows, int r, double rhs, double sign, std::vector<double>& lower,
                     std::vector<double>& upper, bool& changed) const;

  RowMatrix ineq_;
  RowMatrix eq_;
  Eigen::VectorXd b_ineq_;
  Eigen::VectorXd b_eq_;
  std::vector<char> binary_;
};

}  // namespace v2g::detail
