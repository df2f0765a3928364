#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "v2g/domain.hpp"

namespace v2g {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// What a column of a built problem stands for.
enum class VarRole {
  ChargeRate,         // X_c[i,t]
  DischargeRate,      // X_d[i,t]
  Soc,                // SOC[i,t]
  GridSupply,         // G[t]
  Curtailment,        // Omega[t]
  ChargeBlock,        // Y_c[i,t]
  DischargeBlock,     // Y_d[i,t]
  DesiredWaiver,      // Z[i]
  PreviousCharge,     // LC pin at the window start
  PreviousDischarge,  // LD pin at the window start
};

const char* to_string(VarRole role);

struct VarInfo {
  VarRole role;
  int session = -1;  // index into Scenario::sessions, -1 for fleet columns
  int period = -1;   // -1 for Z
};

/// Constraint family a row came from; kept for traces and the text dump.
enum class RowTag {
  SocInit,
  SocUpdate,
  BlockChoice,
  Pin,
  Balance,
  GridSupply,
  Curtailment,
  DesiredReach,
  WaiverForcing,
  DesiredLevel,
  ChargeBlock,
  DischargeBlock,
  Generic,
};

const char* to_string(RowTag tag);

/// Charge/discharge exclusivity group of one V2G session period.
///
/// Columns are indices into the owning problem. A member removed by presolve
/// is stored as -1 together with its fixed value.
struct ComplementarityPair {
  int charge = -1;
  int discharge = -1;
  int charge_block = -1;
  int discharge_block = -1;
  double charge_fixed = 0.0;
  double discharge_fixed = 0.0;
};

/// Convex MIQP in standard form:
///
///   minimize    0.5 x'Qx + c'x + constant
///   subject to  A_ineq x <= b_ineq,  A_eq x = b_eq,  lower <= x <= upper,
///               x_j in {0, 1} for j in binaries.
///
/// Q is stored with both triangles.
struct MiqpProblem {
  SparseMatrix q;
  Eigen::VectorXd c;
  double constant = 0.0;
  SparseMatrix a_ineq;
  Eigen::VectorXd b_ineq;
  SparseMatrix a_eq;
  Eigen::VectorXd b_eq;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<int> binaries;
  std::vector<VarInfo> directory;
  std::vector<ComplementarityPair> pairs;
  std::vector<RowTag> ineq_tags;
  std::vector<RowTag> eq_tags;

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_ineq() const { return static_cast<int>(b_ineq.size()); }
  int num_eq() const { return static_cast<int>(b_eq.size()); }
  bool empty() const { return c.size() == 0; }

  double objective(const Eigen::VectorXd& x) const;
  /// Largest violation over rows and bounds (not integrality).
  double max_violation(const Eigen::VectorXd& x) const;
  /// Mask over columns: 1 for binaries.
  std::vector<char> binary_mask() const;
  /// Throws InvalidInput when dimensions disagree.
  void check_dimensions() const;
};

struct ModelStats {
  int variables = 0;
  int binaries = 0;
  int constraints = 0;
  int equalities = 0;
  int inequalities = 0;
  long nonzeros = 0;
};

ModelStats stats(const MiqpProblem& problem);

struct BuildOptions {
  /// For V2G periods, price the two level terms as one square of the summed
  /// stored/drawn energy. Equal on every point with X_c*X_d = 0, tighter in
  /// the relaxation.
  bool merge_v2g_level_terms = true;
  /// Write each period's grid/curtailment pair as one balance equality
  /// instead of two one-sided inequalities. Same optimum for positive prices
  /// and a non-negative curtailment weight; removes a dual degeneracy.
  bool balance_as_equality = true;
};

MiqpProblem build_static(const Scenario& scenario, const BuildOptions& options = {});

/// A session as seen from a planning instant.
struct WindowSession {
  int index = 0;          // into Scenario::sessions
  double soc_now = 0.0;   // SOC at the window start
  double last_c = 0.0;    // rate in the period before the window start
  double last_d = 0.0;
};

/// Half-open period range [start, end).
struct PlanningWindow {
  int start = 0;
  int end = 0;
  int length() const { return end - start; }
};

/// Window model for the re-planner. `wind` and `future_demand` are indexed
/// relative to the window start and must have window.length() entries
/// (`future_demand` may be empty). Prices come from the scenario.
MiqpProblem build_dynamic(const Scenario& scenario, std::span<const WindowSession> sessions,
                          PlanningWindow window, std::span<const double> wind,
                          std::span<const double> future_demand,
                          const BuildOptions& options = {});

struct PresolveResult {
  MiqpProblem reduced;
  /// Column of each original variable in `reduced`, or -1 when fixed.
  std::vector<int> column_map;
  /// Value of every fixed original variable (unused entries are 0).
  Eigen::VectorXd fixed_values;
  bool infeasible = false;
  std::string reason;

  Eigen::VectorXd expand(const Eigen::VectorXd& reduced_x) const;
  Eigen::VectorXd restrict(const Eigen::VectorXd& full_x) const;
};

/// Fixes every waiver binary from data, propagates bounds and removes fixed
/// columns. The optimal value is preserved.
PresolveResult presolve(const MiqpProblem& problem);

/// Schedule over the full horizon from a point of a static model.
Schedule extract_static(const Scenario& scenario, const MiqpProblem& problem,
                        const Eigen::VectorXd& x);

/// Rates of a window solution, indexed [session slot][period - window.start].
struct WindowPlan {
  PlanningWindow window;
  std::vector<int> sessions;  // scenario indices, same order as the input
  std::vector<std::vector<double>> x_c;
  std::vector<std::vector<double>> x_d;
};

WindowPlan extract_window(const Scenario& scenario, std::span<const WindowSession> sessions,
                          PlanningWindow window, const MiqpProblem& problem,
                          const Eigen::VectorXd& x);

/// Plain-text sparse dump, one line per entry:
///   var <col> <role> <session> <period> <lower> <upper> <binary>
///   obj <col> <c_j>
///   quad <row> <col> <q_ij>
///   eq <row> <col> <a_ij>        rhs_eq <row> <b_i> <tag>
///   ineq <row> <col> <a_ij>      rhs_ineq <row> <b_i> <tag>
///   constant <value>
void write_problem_text(const MiqpProblem& problem, std::ostream& out);

}  // namespace v2g
