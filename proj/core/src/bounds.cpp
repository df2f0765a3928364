#include "bounds.hpp"

#include <cmath>
#include <limits>

namespace v2g::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-7;
constexpr double kIntTol = 1e-6;

}  // namespace

RowStore::RowStore(const MiqpProblem& problem)
    : ineq_(problem.a_ineq), eq_(problem.a_eq), b_ineq_(problem.b_ineq), b_eq_(problem.b_eq),
      binary_(problem.binary_mask()) {}

// Treats row r (times sign) as  sum a_j x_j <= sign * rhs.
bool RowStore::propagate_row(const RowMatrix& rows, int r, double rhs, double sign,
                             std::vector<double>& lower, std::vector<double>& upper, bool& changed) const {
  double min_act = 0.0;
  int inf_count = 0;
  int inf_col = -1;
  for (RowMatrix::InnerIterator it(rows, r); it; ++it) {
    const double a = sign * it.value();
    const double bound = a > 0.0 ? lower[it.col()] : upper[it.col()];
    if (std::isinf(bound)) {
      ++inf_count;
      inf_col = it.col();
    } else {
      min_act += a * bound;
    }
  }
  const double b = sign * rhs;
  const double slack_tol = kFeasTol * (1.0 + std::abs(b));
  if (inf_count == 0 && min_act > b + slack_tol) return false;
  if (inf_count > 1) return true;

  for (RowMatrix::InnerIterator it(rows, r); it; ++it) {
    const int j = it.col();
    if (inf_count == 1 && j != inf_col) continue;
    const double a = sign * it.value();
    double residual = min_act;
    if (inf_count == 0) residual -= a * (a > 0.0 ? lower[j] : upper[j]);
    const double limit = (b - residual) / a;
    if (a > 0.0) {
      double hi = limit;
      if (binary_[j]) hi = hi < 1.0 - kIntTol ? 0.0 : 1.0;
      if (hi < upper[j] - 1e-9 * (1.0 + std::abs(upper[j]))) {
        upper[j] = hi;
        changed = true;
      }
    } else {
      double lo = limit;
      if (binary_[j]) lo = lo > kIntTol ? 1.0 : 0.0;
      if (lo > lower[j] + 1e-9 * (1.0 + std::abs(lower[j]))) {
        lower[j] = lo;
        changed = true;
      }
    }
    if (lower[j] > upper[j]) {
      if (lower[j] > upper[j] + kFeasTol * (1.0 + std::abs(upper[j])) || binary_[j]) return false;
      const double mid = 0.5 * (lower[j] + upper[j]);
      lower[j] = upper[j] = mid;
    }
  }
  return true;
}

bool RowStore::propagate(std::vector<double>& lower, std::vector<double>& upper, int max_passes) const {
  for (std::size_t j = 0; j < lower.size(); ++j) {
    if (binary_[j]) {
      lower[j] = lower[j] > kIntTol ? 1.0 : 0.0;
      upper[j] = upper[j] < 1.0 - kIntTol ? 0.0 : 1.0;
    }
    if (lower[j] > upper[j] + kFeasTol) return false;
  }
  const int m_in = static_cast<int>(ineq_.rows());
  const int m_eq = static_cast<int>(eq_.rows());
  for (int pass = 0; pass < max_passes; ++pass) {
    bool changed = false;
    const bool forward = pass % 2 == 0;
    for (int k = 0; k < m_eq; ++k) {
      const int r = forward ? k : m_eq - 1 - k;
      if (!propagate_row(eq_, r, b_eq_[r], 1.0, lower, upper, changed)) return false;
      if (!propagate_row(eq_, r, b_eq_[r], -1.0, lower, upper, changed)) return false;
    }
    for (int k = 0; k < m_in; ++k) {
      const int r = forward ? k : m_in - 1 - k;
      if (!propagate_row(ineq_, r, b_ineq_[r], 1.0, lower, upper, changed)) return false;
    }
    if (!changed) break;
  }
  return true;
}

}  // namespace v2g::detail
