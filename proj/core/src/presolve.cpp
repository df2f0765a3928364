#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "bounds.hpp"
#include "v2g/error.hpp"
#include "v2g/model.hpp"

namespace v2g {

namespace {

constexpr double kFixTol = 1e-9;

// The reach row of a waiver binary has the binary as its only entry, so its
// right-hand side decides the binary: negative means the desired level cannot
// be reached and the binary must be 1; otherwise 0 is never worse, because any
// point with the binary at 1 charges at full speed and meets the desired level.
// A binary the caller already restricted keeps that restriction: a required 1
// against an upper bound of 0 leaves an empty box for propagation to report.
void fix_waivers(const MiqpProblem& p, std::vector<double>& lower, std::vector<double>& upper) {
  const Eigen::SparseMatrix<double, Eigen::RowMajor> rows(p.a_ineq);
  for (int r = 0; r < rows.outerSize(); ++r) {
    if (r >= static_cast<int>(p.ineq_tags.size()) || p.ineq_tags[r] != RowTag::DesiredReach) continue;
    Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows, r);
    if (!it) continue;
    const int col = it.col();
    const double a = it.value();
    ++it;
    if (it || a >= 0.0 || p.directory[col].role != VarRole::DesiredWaiver) continue;
    if (p.b_ineq[r] < 0.0) lower[col] = 1.0;
    else if (lower[col] <= 0.0) upper[col] = 0.0;
  }
}

}  // namespace

Eigen::VectorXd PresolveResult::expand(const Eigen::VectorXd& reduced_x) const {
  Eigen::VectorXd full = fixed_values;
  for (std::size_t j = 0; j < column_map.size(); ++j)
    if (column_map[j] >= 0) full[static_cast<int>(j)] = reduced_x[column_map[j]];
  return full;
}

Eigen::VectorXd PresolveResult::restrict(const Eigen::VectorXd& full_x) const {
  Eigen::VectorXd out(reduced.num_vars());
  for (std::size_t j = 0; j < column_map.size(); ++j)
    if (column_map[j] >= 0) out[column_map[j]] = full_x[static_cast<int>(j)];
  return out;
}

PresolveResult presolve(const MiqpProblem& p) {
  p.check_dimensions();
  const int n = p.num_vars();
  PresolveResult result;
  result.column_map.assign(n, -1);
  result.fixed_values = Eigen::VectorXd::Zero(n);

  std::vector<double> lower(p.lower.data(), p.lower.data() + n);
  std::vector<double> upper(p.upper.data(), p.upper.data() + n);
  fix_waivers(p, lower, upper);
  const detail::RowStore rows(p);
  if (!rows.propagate(lower, upper, 16)) {
    result.infeasible = true;
    result.reason = "bound propagation found a contradiction";
    result.reduced = p;
    for (int j = 0; j < n; ++j) result.column_map[j] = j;
    return result;
  }

  // Only fixings are adopted; other tightened continuous bounds stay original.
  std::vector<char> fixed(n, 0);
  int kept = 0;
  for (int j = 0; j < n; ++j) {
    if (upper[j] - lower[j] <= kFixTol * (1.0 + std::abs(lower[j]))) {
      fixed[j] = 1;
      result.fixed_values[j] = 0.5 * (lower[j] + upper[j]);
    } else {
      result.column_map[j] = kept++;
    }
  }

  MiqpProblem& r = result.reduced;
  const Eigen::VectorXd& xf = result.fixed_values;
  // Objective: constant and linear shift from the fixed block.
  const Eigen::VectorXd qxf = p.q * xf;
  r.constant = p.constant + p.c.dot(xf) + 0.5 * xf.dot(qxf);
  r.c.resize(kept);
  r.lower.resize(kept);
  r.upper.resize(kept);
  r.directory.resize(kept);
  const auto mask = p.binary_mask();
  for (int j = 0; j < n; ++j) {
    const int k = result.column_map[j];
    if (k < 0) continue;
    r.c[k] = p.c[j] + qxf[j];
    r.lower[k] = std::max(p.lower[j], lower[j]);
    r.upper[k] = std::min(p.upper[j], upper[j]);
    // Keep the original box for continuous columns; binaries take the rounded box.
    if (!mask[j]) {
      r.lower[k] = p.lower[j];
      r.upper[k] = p.upper[j];
    }
    r.directory[k] = p.directory[j];
  }
  for (int j : p.binaries)
    if (result.column_map[j] >= 0) r.binaries.push_back(result.column_map[j]);

  std::vector<Eigen::Triplet<double>> trip;
  for (int col = 0; col < p.q.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(p.q, col); it; ++it) {
      const int a = result.column_map[it.row()];
      const int b = result.column_map[it.col()];
      if (a >= 0 && b >= 0) trip.emplace_back(a, b, it.value());
    }
  r.q.resize(kept, kept);
  r.q.setFromTriplets(trip.begin(), trip.end());

  // Rows: substitute fixed columns, drop rows left without free entries.
  auto reduce_rows = [&](const SparseMatrix& a, const Eigen::VectorXd& b, const std::vector<RowTag>& tags,
                         bool equality, SparseMatrix& out_a, Eigen::VectorXd& out_b,
                         std::vector<RowTag>& out_tags) -> bool {
    const Eigen::SparseMatrix<double, Eigen::RowMajor> rows_rm(a);
    std::vector<Eigen::Triplet<double>> t;
    std::vector<double> rhs;
    for (int row = 0; row < rows_rm.outerSize(); ++row) {
      double shift = 0.0;
      std::vector<std::pair<int, double>> entries;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows_rm, row); it; ++it) {
        const int k = result.column_map[it.col()];
        if (k < 0) shift += it.value() * xf[it.col()];
        else entries.emplace_back(k, it.value());
      }
      const double new_b = b[row] - shift;
      if (entries.empty()) {
        const double tol = 1e-7 * (1.0 + std::abs(b[row]));
        const bool ok = equality ? std::abs(new_b) <= tol : new_b >= -tol;
        if (!ok) {
          result.reason = fmt::format("row {} ({}) violated by fixed columns", row,
                                      row < static_cast<int>(tags.size()) ? to_string(tags[row]) : "?");
          return false;
        }
        continue;
      }
      const int out_row = static_cast<int>(rhs.size());
      for (const auto& [k, v] : entries) t.emplace_back(out_row, k, v);
      rhs.push_back(new_b);
      out_tags.push_back(row < static_cast<int>(tags.size()) ? tags[row] : RowTag::Generic);
    }
    out_a.resize(static_cast<int>(rhs.size()), kept);
    out_a.setFromTriplets(t.begin(), t.end());
    out_b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), static_cast<int>(rhs.size()));
    return true;
  };
  const bool ok = reduce_rows(p.a_eq, p.b_eq, p.eq_tags, true, r.a_eq, r.b_eq, r.eq_tags) &&
                  reduce_rows(p.a_ineq, p.b_ineq, p.ineq_tags, false, r.a_ineq, r.b_ineq, r.ineq_tags);
  if (!ok) {
    result.infeasible = true;
    return result;
  }

  for (const auto& pair : p.pairs) {
    ComplementarityPair q;
    q.charge = result.column_map[pair.charge];
    q.discharge = result.column_map[pair.discharge];
    q.charge_block = pair.charge_block >= 0 ? result.column_map[pair.charge_block] : -1;
    q.discharge_block = pair.discharge_block >= 0 ? result.column_map[pair.discharge_block] : -1;
    q.charge_fixed = q.charge < 0 ? xf[pair.charge] : 0.0;
    q.discharge_fixed = q.discharge < 0 ? xf[pair.discharge] : 0.0;
    // Nothing left to decide once one rate is pinned at zero and no block is free.
    if (q.charge_block < 0 && q.discharge_block < 0) continue;
    r.pairs.push_back(q);
  }
  return result;
}

}  // namespace v2g
