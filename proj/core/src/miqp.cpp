#include "v2g/miqp.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <ostream>
#include <queue>

#include "bounds.hpp"
#include "v2g/error.hpp"

namespace v2g {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::GapLimit: return "gap-limit";
    case SolveStatus::NodeLimit: return "node-limit";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::UnboundedGuard: return "unbounded-guard";
  }
  return "?";
}

namespace {

using Vec = Eigen::VectorXd;
constexpr double kInf = std::numeric_limits<double>::infinity();

QpSettings qp_settings(const SolverConfig& config) {
  QpSettings s;
  s.feasibility_tolerance = config.absolute_feasibility_tolerance;
  s.max_iterations = config.qp_max_iterations;
  return s;
}

double pair_value(const Vec& x, int col, double fixed) { return col >= 0 ? x[col] : fixed; }

// Box handed to the relaxation: binaries as propagated, continuous columns
// only when propagation pinned them, otherwise their original box.
void relaxation_box(const MiqpProblem& p, const std::vector<char>& mask, const std::vector<double>& lo,
                    const std::vector<double>& hi, Vec& qlo, Vec& qhi) {
  const int n = p.num_vars();
  qlo.resize(n);
  qhi.resize(n);
  for (int j = 0; j < n; ++j) {
    if (mask[j]) {
      qlo[j] = lo[j];
      qhi[j] = hi[j];
    } else if (hi[j] - lo[j] <= 1e-9 * (1.0 + std::abs(lo[j]))) {
      qlo[j] = qhi[j] = 0.5 * (lo[j] + hi[j]);
    } else {
      qlo[j] = p.lower[j];
      qhi[j] = p.upper[j];
    }
  }
}

void throw_on_failure(const QpSolution& sol, const char* where) {
  if (sol.status == QpStatus::IterationLimit || sol.status == QpStatus::NumericalFailure)
    throw SolverError(fmt::format("relaxation {} failed: {} after {} iterations", where, to_string(sol.status),
                                  sol.iterations));
}

struct BinaryRoles {
  std::vector<char> mask;
  std::vector<char> waiver;     // DesiredWaiver binaries
  std::vector<char> in_pair;    // block binaries owned by a pair
};

BinaryRoles classify(const MiqpProblem& p) {
  BinaryRoles roles;
  roles.mask = p.binary_mask();
  roles.waiver.assign(p.num_vars(), 0);
  roles.in_pair.assign(p.num_vars(), 0);
  for (int j : p.binaries)
    if (j < static_cast<int>(p.directory.size()) && p.directory[j].role == VarRole::DesiredWaiver)
      roles.waiver[j] = 1;
  for (const auto& pr : p.pairs) {
    if (pr.charge_block >= 0) roles.in_pair[pr.charge_block] = 1;
    if (pr.discharge_block >= 0) roles.in_pair[pr.discharge_block] = 1;
  }
  return roles;
}

// Rounds binaries of an integral point; nothing if some binary is fractional
// or some pair overlaps.
std::optional<Vec> round_point(const MiqpProblem& p, const BinaryRoles& roles, const Vec& x, const Vec& lower,
                               const Vec& upper, const SolverConfig& cfg) {
  Vec y = x;
  for (int j : p.binaries) {
    if (roles.in_pair[j]) continue;
    const double r = std::round(x[j]);
    if (std::abs(x[j] - r) > cfg.integrality_tolerance) return std::nullopt;
    y[j] = r;
  }
  for (const auto& pr : p.pairs) {
    const double vc = pair_value(x, pr.charge, pr.charge_fixed);
    const double vd = pair_value(x, pr.discharge, pr.discharge_fixed);
    if (std::min(vc, vd) > cfg.complementarity_tolerance) return std::nullopt;
    // Candidate block settings (y_c, y_d): 1 on a block forbids that side.
    const bool charge_on = vc > cfg.complementarity_tolerance;
    const bool discharge_on = vd > cfg.complementarity_tolerance;
    auto allowed = [&](int col, double v) {
      return col < 0 || (v >= lower[col] - 1e-12 && v <= upper[col] + 1e-12);
    };
    bool done = false;
    for (const auto& [yc, yd] : {std::pair{0.0, 1.0}, std::pair{1.0, 0.0}}) {
      if (yc > 0.5 && charge_on) continue;
      if (yd > 0.5 && discharge_on) continue;
      if (!allowed(pr.charge_block, yc) || !allowed(pr.discharge_block, yd)) continue;
      if (pr.charge_block >= 0) y[pr.charge_block] = yc;
      if (pr.discharge_block >= 0) y[pr.discharge_block] = yd;
      if (yc > 0.5 && pr.charge >= 0) y[pr.charge] = 0.0;
      if (yd > 0.5 && pr.discharge >= 0) y[pr.discharge] = 0.0;
      done = true;
      break;
    }
    if (!done) return std::nullopt;
  }
  return y;
}

// Integer-feasible point from an integral relaxation point. Rounding may
// leave tiny row violations (big-M rows amplify them), in which case the
// continuous part is re-solved with every binary pinned.
std::optional<Incumbent> make_incumbent(const MiqpProblem& p, const BinaryRoles& roles, const Vec& x,
                                        const Vec& lower, const Vec& upper, const SolverConfig& cfg,
                                        SolveStats& stats) {
  auto rounded = round_point(p, roles, x, lower, upper, cfg);
  if (!rounded) return std::nullopt;
  Vec y = *rounded;
  const double tol = cfg.absolute_feasibility_tolerance;
  if (p.max_violation(y) <= tol) return Incumbent{y, p.objective(y)};
  Vec lo = p.lower, hi = p.upper;
  for (int j : p.binaries) lo[j] = hi[j] = y[j];
  const QpSolution sol = solve_qp(p, lo, hi, qp_settings(cfg));
  ++stats.qp_solves;
  stats.qp_iterations += sol.iterations;
  if (sol.status != QpStatus::Optimal) return std::nullopt;
  if (p.max_violation(sol.x) > tol) return std::nullopt;
  return Incumbent{sol.x, sol.objective};
}

std::optional<Incumbent> heuristic_impl(const MiqpProblem& p, const BinaryRoles& roles,
                                        const detail::RowStore& rows, const Vec& relaxation, const Vec& lower,
                                        const Vec& upper, const SolverConfig& cfg, SolveStats& stats) {
  std::vector<double> lo(lower.data(), lower.data() + lower.size());
  std::vector<double> hi(upper.data(), upper.data() + upper.size());
  Vec x = relaxation;
  for (int round = 0; round < 20; ++round) {
    bool changed = false;
    for (const auto& pr : p.pairs) {
      const double vc = pair_value(x, pr.charge, pr.charge_fixed);
      const double vd = pair_value(x, pr.discharge, pr.discharge_fixed);
      if (std::min(vc, vd) <= cfg.complementarity_tolerance) continue;
      // Keep the larger side: block the other one.
      const bool keep_charge = vc >= vd;
      const int block = keep_charge ? pr.discharge_block : pr.charge_block;
      const int other = keep_charge ? pr.charge_block : pr.discharge_block;
      if (block >= 0 && lo[block] < 1.0) {
        lo[block] = hi[block] = 1.0;
        changed = true;
      } else if (other >= 0 && hi[other] > 0.0) {
        lo[other] = hi[other] = 0.0;
        changed = true;
      }
    }
    for (int j : p.binaries) {
      if (roles.in_pair[j] || lo[j] == hi[j]) continue;
      const double r = std::round(x[j]);
      if (std::abs(x[j] - r) > cfg.integrality_tolerance) {
        lo[j] = hi[j] = std::clamp(r, 0.0, 1.0);
        changed = true;
      }
    }
    if (!changed) {
      Vec blo = Eigen::Map<const Vec>(lo.data(), static_cast<int>(lo.size()));
      Vec bhi = Eigen::Map<const Vec>(hi.data(), static_cast<int>(hi.size()));
      return make_incumbent(p, roles, x, blo, bhi, cfg, stats);
    }
    if (!rows.propagate(lo, hi)) return std::nullopt;
    Vec qlo, qhi;
    relaxation_box(p, roles.mask, lo, hi, qlo, qhi);
    const QpSolution sol = solve_qp(p, qlo, qhi, qp_settings(cfg));
    ++stats.qp_solves;
    stats.qp_iterations += sol.iterations;
    if (sol.status != QpStatus::Optimal) return std::nullopt;
    x = sol.x;
  }
  return std::nullopt;
}

struct Node {
  long id = 0;
  int depth = 0;
  double bound = -kInf;
  std::vector<std::pair<int, double>> fixings;
  std::shared_ptr<const ActiveSet> warm;
  int branch_col = -1;
  double branch_distance = 0.0;  // change of the branched value
  int direction = 0;             // 0 down, 1 up
};

struct NodeOrder {
  bool operator()(const std::shared_ptr<Node>& a, const std::shared_ptr<Node>& b) const {
    if (a->bound != b->bound) return a->bound > b->bound;
    return a->id > b->id;
  }
};

class PseudoCosts {
 public:
  explicit PseudoCosts(int n) : sum_(2, std::vector<double>(n, 0.0)), count_(2, std::vector<int>(n, 0)) {}

  void update(int col, int dir, double gain_per_unit) {
    sum_[dir][col] += gain_per_unit;
    ++count_[dir][col];
    total_[dir] += gain_per_unit;
    ++total_count_[dir];
  }

  double estimate(int col, int dir) const {
    if (count_[dir][col] > 0) return sum_[dir][col] / count_[dir][col];
    if (total_count_[dir] > 0) return total_[dir] / total_count_[dir];
    return 1.0;
  }

 private:
  std::vector<std::vector<double>> sum_;
  std::vector<std::vector<int>> count_;
  double total_[2] = {0.0, 0.0};
  int total_count_[2] = {0, 0};
};

struct BranchChoice {
  int col = -1;
  double value = 0.0;
};

BranchChoice choose_branch(const MiqpProblem& p, const BinaryRoles& roles, const Vec& x, const Vec& lower,
                           const Vec& upper, const SolverConfig& cfg, const PseudoCosts& pc) {
  auto score_of = [&](int col, double f, double most_fractional_score) {
    if (cfg.branching_rule == BranchingRule::MostFractional) return most_fractional_score;
    const double down = std::max(pc.estimate(col, 0) * f, 1e-6);
    const double up = std::max(pc.estimate(col, 1) * (1.0 - f), 1e-6);
    return down * up;
  };
  // Tier 0: waiver binaries; tier 1: overlapping pairs and other binaries.
  for (int tier = 0; tier < 2; ++tier) {
    BranchChoice best;
    double best_score = -kInf;
    auto consider = [&](int col, double value, double mf_score) {
      const double s = score_of(col, std::clamp(value, 0.0, 1.0), mf_score);
      if (s > best_score || (s == best_score && col < best.col)) {
        best_score = s;
        best = {col, value};
      }
    };
    for (int j : p.binaries) {
      const bool waiver = roles.waiver[j];
      if ((tier == 0) != waiver || roles.in_pair[j]) continue;
      if (lower[j] == upper[j]) continue;
      const double f = x[j] - std::floor(x[j]);
      const double frac = std::min(f, 1.0 - f);
      if (frac > cfg.integrality_tolerance) consider(j, x[j], frac);
    }
    if (tier == 1) {
      for (const auto& pr : p.pairs) {
        const double vc = pair_value(x, pr.charge, pr.charge_fixed);
        const double vd = pair_value(x, pr.discharge, pr.discharge_fixed);
        const double overlap = std::min(vc, vd);
        if (overlap <= cfg.complementarity_tolerance) continue;
        int col = pr.charge_block;
        if (col < 0 || lower[col] == upper[col]) col = pr.discharge_block;
        if (col < 0 || lower[col] == upper[col]) continue;
        consider(col, x[col], overlap);
      }
    }
    if (best.col >= 0) return best;
  }
  return {};
}

void trace_line(const SolverConfig& cfg, const Node& node, double bound, const char* action) {
  if (cfg.trace == nullptr) return;
  *cfg.trace << fmt::format("node {} depth {} bound {:.12g} action {}\n", node.id, node.depth, bound, action);
}

}  // namespace

std::optional<Vec> snap_to_integral(const MiqpProblem& problem, const Vec& x, const Vec& lower, const Vec& upper,
                                    const SolverConfig& config) {
  SolveStats stats;
  const auto inc = make_incumbent(problem, classify(problem), x, lower, upper, config, stats);
  if (!inc) return std::nullopt;
  return inc->x;
}

std::optional<Incumbent> complementarity_heuristic(const MiqpProblem& problem, const Vec& relaxation,
                                                   const Vec& lower, const Vec& upper,
                                                   const SolverConfig& config) {
  SolveStats stats;
  const detail::RowStore rows(problem);
  return heuristic_impl(problem, classify(problem), rows, relaxation, lower, upper, config, stats);
}

std::optional<Incumbent> complementarity_heuristic(const MiqpProblem& problem, const Vec& relaxation,
                                                   const SolverConfig& config) {
  return complementarity_heuristic(problem, relaxation, problem.lower, problem.upper, config);
}

Solution solve(const MiqpProblem& problem, const SolverConfig& config) {
  problem.check_dimensions();
  const auto t0 = std::chrono::steady_clock::now();
  const int n = problem.num_vars();
  const BinaryRoles roles = classify(problem);
  const detail::RowStore rows(problem);
  const QpSettings qps = qp_settings(config);
  PseudoCosts pseudo(n);

  Solution result;
  std::optional<Incumbent> incumbent;
  double pruned_bound = kInf;  // smallest bound among nodes discarded by the gap test
  auto cutoff = [&]() {
    if (!incumbent) return kInf;
    return incumbent->objective - config.relative_gap_tolerance * std::max(1.0, std::abs(incumbent->objective));
  };
  auto offer = [&](const Incumbent& cand) {
    if (!incumbent || cand.objective < incumbent->objective) {
      incumbent = cand;
      return true;
    }
    return false;
  };
  auto elapsed = [&]() { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  std::priority_queue<std::shared_ptr<Node>, std::vector<std::shared_ptr<Node>>, NodeOrder> open;
  auto root = std::make_shared<Node>();
  open.push(root);
  long next_id = 1;
  bool stopped_by_nodes = false, stopped_by_time = false;

  while (!open.empty()) {
    if (result.nodes >= config.node_limit) {
      stopped_by_nodes = true;
      break;
    }
    if (config.time_limit_seconds > 0.0 && elapsed() > config.time_limit_seconds) {
      stopped_by_time = true;
      break;
    }
    const auto node = open.top();
    open.pop();
    ++result.nodes;
    result.stats.max_depth = std::max(result.stats.max_depth, node->depth);

    if (node->bound >= cutoff()) {
      pruned_bound = std::min(pruned_bound, node->bound);
      ++result.stats.pruned;
      trace_line(config, *node, node->bound, "prune-bound");
      continue;
    }

    std::vector<double> lo(problem.lower.data(), problem.lower.data() + n);
    std::vector<double> hi(problem.upper.data(), problem.upper.data() + n);
    for (const auto& [col, v] : node->fixings) lo[col] = hi[col] = v;
    if (!rows.propagate(lo, hi)) {
      ++result.stats.pruned;
      trace_line(config, *node, node->bound, "prune-infeasible");
      continue;
    }
    Vec qlo, qhi;
    relaxation_box(problem, roles.mask, lo, hi, qlo, qhi);
    const QpSolution rel = solve_qp(problem, qlo, qhi, qps, node->warm.get());
    ++result.stats.qp_solves;
    result.stats.qp_iterations += rel.iterations;
    if (rel.warm_started) ++result.stats.warm_start_hits;
    throw_on_failure(rel, fmt::format("at node {}", node->id).c_str());
    if (rel.status == QpStatus::Unbounded) {
      if (node->id == 0) {
        result.status = SolveStatus::UnboundedGuard;
        result.stats.seconds = elapsed();
        return result;
      }
      throw SolverError("relaxation unbounded below the root");
    }
    if (rel.status == QpStatus::Infeasible) {
      ++result.stats.pruned;
      trace_line(config, *node, node->bound, "prune-infeasible");
      continue;
    }
    const double value = rel.objective;
    if (node->id != 0) {
      result.stats.max_bound_decrease = std::max(result.stats.max_bound_decrease, node->bound - value);
      if (node->branch_col >= 0 && node->branch_distance > 0.0)
        pseudo.update(node->branch_col, node->direction,
                      std::max(value - node->bound, 0.0) / node->branch_distance);
    }
    const double node_bound = std::max(value, node->bound);
    if (node_bound >= cutoff()) {
      pruned_bound = std::min(pruned_bound, node_bound);
      ++result.stats.pruned;
      trace_line(config, *node, node_bound, "prune-bound");
      continue;
    }

    if (auto inc = make_incumbent(problem, roles, rel.x, qlo, qhi, config, result.stats)) {
      offer(*inc);
      trace_line(config, *node, node_bound, "incumbent");
      continue;
    }

    const bool run_heuristic = config.use_heuristic &&
                               (node->id == 0 || (config.heuristic_period > 0 &&
                                                  result.nodes % config.heuristic_period == 0));
    if (run_heuristic) {
      if (auto inc = heuristic_impl(problem, roles, rows, rel.x, qlo, qhi, config, result.stats)) {
        if (offer(*inc)) {
          ++result.stats.heuristic_incumbents;
          trace_line(config, *node, inc->objective, "heuristic");
        }
      }
      if (node_bound >= cutoff()) {
        pruned_bound = std::min(pruned_bound, node_bound);
        ++result.stats.pruned;
        trace_line(config, *node, node_bound, "prune-bound");
        continue;
      }
    }

    const BranchChoice choice = choose_branch(problem, roles, rel.x, qlo, qhi, config, pseudo);
    if (choice.col < 0) {
      // Integral by the branching rules but rounding failed to verify; the
      // relaxation value is still a valid bound for this subtree.
      throw SolverError(fmt::format("node {} is integral but its rounded point is infeasible", node->id));
    }
    trace_line(config, *node, node_bound, "branch");
    auto warm = std::make_shared<const ActiveSet>(rel.active);
    for (int dir = 0; dir < 2; ++dir) {
      auto child = std::make_shared<Node>();
      child->id = next_id++;
      child->depth = node->depth + 1;
      child->bound = node_bound;
      child->fixings = node->fixings;
      child->fixings.emplace_back(choice.col, static_cast<double>(dir));
      child->warm = warm;
      child->branch_col = choice.col;
      child->direction = dir;
      child->branch_distance = dir == 0 ? choice.value : 1.0 - choice.value;
      open.push(child);
    }
  }

  result.stats.seconds = elapsed();
  double open_bound = kInf;
  if (!open.empty()) open_bound = open.top()->bound;
  if (incumbent) {
    result.x = incumbent->x;
    result.objective = incumbent->objective;
    result.bound = std::min({incumbent->objective, pruned_bound, open_bound});
    result.gap = (result.objective - result.bound) / std::max(1.0, std::abs(result.objective));
    if (stopped_by_nodes) result.status = SolveStatus::NodeLimit;
    else if (stopped_by_time) result.status = SolveStatus::GapLimit;
    else result.status = SolveStatus::Optimal;
  } else {
    result.bound = std::min(pruned_bound, open_bound);
    if (stopped_by_nodes) result.status = SolveStatus::NodeLimit;
    else if (stopped_by_time) result.status = SolveStatus::GapLimit;
    else result.status = SolveStatus::Infeasible;
  }
  return result;
}

Solution optimize(const MiqpProblem& problem, const SolverConfig& config) {
  const PresolveResult pre = presolve(problem);
  if (pre.infeasible) {
    Solution s;
    s.status = SolveStatus::Infeasible;
    return s;
  }
  Solution s = solve(pre.reduced, config);
  if (s.x.size() == pre.reduced.num_vars() && (s.status == SolveStatus::Optimal || s.x.size() > 0))
    s.x = pre.expand(s.x);
  return s;
}

}  // namespace v2g
