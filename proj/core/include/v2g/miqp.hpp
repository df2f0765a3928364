#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <limits>
#include <optional>

#include "v2g/model.hpp"
#include "v2g/qp.hpp"

namespace v2g {

enum class BranchingRule { MostFractional, PseudoCost };

struct SolverConfig {
  double relative_gap_tolerance = 1e-6;
  double absolute_feasibility_tolerance = 1e-7;
  long node_limit = 1'000'000;
  /// Wall-clock limit in seconds; 0 disables it (and keeps runs reproducible).
  double time_limit_seconds = 0.0;
  int qp_max_iterations = 200;
  BranchingRule branching_rule = BranchingRule::MostFractional;
  double integrality_tolerance = 1e-6;
  /// A charge/discharge pair counts as overlapping when both rates exceed this.
  double complementarity_tolerance = 1e-8;
  bool use_heuristic = true;
  /// Also run the rounding heuristic every this many nodes (0: root only).
  int heuristic_period = 0;
  /// Optional per-node trace: `node <id> depth <d> bound <b> action <a>`.
  std::ostream* trace = nullptr;
};

enum class SolveStatus {
  Optimal,         // gap within relative_gap_tolerance
  GapLimit,        // stopped by the time limit with a remaining gap
  NodeLimit,       // stopped by the node limit
  Infeasible,      // no integer-feasible point exists
  UnboundedGuard,  // relaxation diverged
};

const char* to_string(SolveStatus status);

struct SolveStats {
  long qp_solves = 0;
  long qp_iterations = 0;
  long warm_start_hits = 0;
  long heuristic_incumbents = 0;
  long pruned = 0;
  int max_depth = 0;
  /// Largest drop of a child's relaxation value below its parent's.
  double max_bound_decrease = 0.0;
  double seconds = 0.0;
};

struct Solution {
  SolveStatus status = SolveStatus::Infeasible;
  Eigen::VectorXd x;
  double objective = std::numeric_limits<double>::infinity();
  double bound = -std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  long nodes = 0;
  SolveStats stats;

  bool has_point() const { return x.size() > 0 || (status == SolveStatus::Optimal); }
};

/// Best-first branch-and-bound over the binaries of `problem`.
/// Throws SolverError when a relaxation cannot be solved reliably.
Solution solve(const MiqpProblem& problem, const SolverConfig& config = {});

/// presolve + solve, with the answer mapped back to the original columns.
Solution optimize(const MiqpProblem& problem, const SolverConfig& config = {});

struct Incumbent {
  Eigen::VectorXd x;
  double objective = 0.0;
};

/// Repairs charge/discharge overlaps of a relaxation point by fixing the
/// block binary of the smaller side and re-solving, for a few rounds.
std::optional<Incumbent> complementarity_heuristic(const MiqpProblem& problem,
                                                   const Eigen::VectorXd& relaxation,
                                                   const Eigen::VectorXd& lower,
                                                   const Eigen::VectorXd& upper,
                                                   const SolverConfig& config = {});
std::optional<Incumbent> complementarity_heuristic(const MiqpProblem& problem,
                                                   const Eigen::VectorXd& relaxation,
                                                   const SolverConfig& config = {});

/// Rounds binaries of `x` when it is integral in the sense used by the
/// solver (overlap-free pairs, binaries near 0/1) and the rounded point is
/// feasible; otherwise returns nothing.
std::optional<Eigen::VectorXd> snap_to_integral(const MiqpProblem& problem, const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& lower,
                                                const Eigen::VectorXd& upper,
                                                const SolverConfig& config = {});

}  // namespace v2g
