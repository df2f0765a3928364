#pragma once

#include <Eigen/SparseCore>

#include <span>
#include <utility>
#include <vector>

#include "v2g/model.hpp"

namespace v2g::detail {

using Term = std::pair<int, double>;

// Incremental builder for MiqpProblem; rows and columns are appended in call
// order, which fixes the deterministic layout.
class Assembler {
 public:
  int add_var(VarInfo info, double lower, double upper, double cost = 0.0, bool binary = false);
  void add_eq(std::span<const Term> terms, double rhs, RowTag tag);
  void add_ineq(std::span<const Term> terms, double rhs, RowTag tag);
  void add_eq(std::initializer_list<Term> terms, double rhs, RowTag tag) {
    add_eq(std::span<const Term>(terms.begin(), terms.size()), rhs, tag);
  }
  void add_ineq(std::initializer_list<Term> terms, double rhs, RowTag tag) {
    add_ineq(std::span<const Term>(terms.begin(), terms.size()), rhs, tag);
  }
  // Adds weight * (sum_k a_k x_k + offset)^2 to the objective.
  void add_square(double weight, std::initializer_list<Term> terms, double offset = 0.0);
  void add_pair(const ComplementarityPair& pair) { pairs_.push_back(pair); }

  MiqpProblem finish();

 private:
  std::vector<VarInfo> directory_;
  std::vector<double> lower_, upper_, cost_;
  std::vector<int> binaries_;
  std::vector<Eigen::Triplet<double>> q_, eq_, ineq_;
  std::vector<double> b_eq_, b_ineq_;
  std::vector<RowTag> eq_tags_, ineq_tags_;
  std::vector<ComplementarityPair> pairs_;
  double constant_ = 0.0;
};

// One session's slice of a static or window model.
struct SessionSlice {
  int index = 0;
  int start = 0;  // first controlled period
  int end = 0;    // departure period
  double soc_start = 0.0;
  bool pinned = false;  // window models pin the previous rates as columns
  double last_c = 0.0;
  double last_d = 0.0;
};

struct SessionColumns {
  int index = 0;
  int start = 0;
  std::vector<int> x_c;
  std::vector<int> x_d;
};

SessionColumns emit_session(Assembler& assembler, const Scenario& scenario,
                            const SessionSlice& slice, const BuildOptions& options);

// Grid and curtailment columns plus the per-period balance rows over
// [start, end). `wind` and `future_demand` are window-relative.
void emit_fleet(Assembler& assembler, const Scenario& scenario,
                std::span<const SessionColumns> sessions, int start, int end,
                std::span<const double> wind, std::span<const double> future_demand,
                const BuildOptions& options);

// Clips rates to [0, 1], zeroes tiny values and the smaller side of a
// charge/discharge overlap below `tolerance`.
void clean_rates(double& x_c, double& x_d, double tolerance);

}  // namespace v2g::detail
