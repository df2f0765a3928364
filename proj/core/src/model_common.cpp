#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <ostream>

#include "model_detail.hpp"
#include "v2g/error.hpp"
#include "v2g/log.hpp"

namespace v2g {

namespace {

// Well inside kEnergyTolerance, so validation still sees the level as met.
constexpr double kLevelSnapKwh = 1e-7;

}  // namespace

const char* to_string(VarRole role) {
  switch (role) {
    case VarRole::ChargeRate: return "x_c";
    case VarRole::DischargeRate: return "x_d";
    case VarRole::Soc: return "soc";
    case VarRole::GridSupply: return "g";
    case VarRole::Curtailment: return "omega";
    case VarRole::ChargeBlock: return "y_c";
    case VarRole::DischargeBlock: return "y_d";
    case VarRole::DesiredWaiver: return "z";
    case VarRole::PreviousCharge: return "lc";
    case VarRole::PreviousDischarge: return "ld";
  }
  return "?";
}

const char* to_string(RowTag tag) {
  switch (tag) {
    case RowTag::SocInit: return "soc-init";
    case RowTag::SocUpdate: return "soc-update";
    case RowTag::BlockChoice: return "block-choice";
    case RowTag::Pin: return "pin";
    case RowTag::Balance: return "balance";
    case RowTag::GridSupply: return "grid-supply";
    case RowTag::Curtailment: return "curtailment";
    case RowTag::DesiredReach: return "desired-reach";
    case RowTag::WaiverForcing: return "waiver-forcing";
    case RowTag::DesiredLevel: return "desired-level";
    case RowTag::ChargeBlock: return "charge-block";
    case RowTag::DischargeBlock: return "discharge-block";
    case RowTag::Generic: return "generic";
  }
  return "?";
}

double MiqpProblem::objective(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(q * x) + c.dot(x) + constant;
}

double MiqpProblem::max_violation(const Eigen::VectorXd& x) const {
  double worst = 0.0;
  if (num_ineq() > 0) worst = std::max(worst, (a_ineq * x - b_ineq).maxCoeff());
  if (num_eq() > 0) worst = std::max(worst, (a_eq * x - b_eq).cwiseAbs().maxCoeff());
  if (num_vars() > 0) {
    worst = std::max(worst, (lower - x).maxCoeff());
    worst = std::max(worst, (x - upper).maxCoeff());
  }
  return worst;
}

std::vector<char> MiqpProblem::binary_mask() const {
  std::vector<char> mask(num_vars(), 0);
  for (int j : binaries) mask[j] = 1;
  return mask;
}

void MiqpProblem::check_dimensions() const {
  const auto n = c.size();
  const bool ok = q.rows() == n && q.cols() == n && a_ineq.cols() == n && a_eq.cols() == n &&
                  a_ineq.rows() == b_ineq.size() && a_eq.rows() == b_eq.size() &&
                  lower.size() == n && upper.size() == n;
  if (!ok) throw InvalidInput("problem dimensions are inconsistent");
  for (int j : binaries)
    if (j < 0 || j >= n) throw InvalidInput("binary index out of range");
}

ModelStats stats(const MiqpProblem& p) {
  ModelStats s;
  s.variables = p.num_vars();
  s.binaries = static_cast<int>(p.binaries.size());
  s.equalities = p.num_eq();
  s.inequalities = p.num_ineq();
  s.constraints = s.equalities + s.inequalities;
  s.nonzeros = p.a_eq.nonZeros() + p.a_ineq.nonZeros();
  return s;
}

void write_problem_text(const MiqpProblem& p, std::ostream& out) {
  const auto mask = p.binary_mask();
  for (int j = 0; j < p.num_vars(); ++j) {
    const auto& info = j < static_cast<int>(p.directory.size()) ? p.directory[j] : VarInfo{VarRole::Soc};
    out << fmt::format("var {} {} {} {} {:.17g} {:.17g} {}\n", j, to_string(info.role), info.session,
                       info.period, p.lower[j], p.upper[j], mask[j] ? 1 : 0);
  }
  for (int j = 0; j < p.num_vars(); ++j)
    if (p.c[j] != 0.0) out << fmt::format("obj {} {:.17g}\n", j, p.c[j]);
  for (int k = 0; k < p.q.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(p.q, k); it; ++it)
      out << fmt::format("quad {} {} {:.17g}\n", it.row(), it.col(), it.value());
  auto dump_rows = [&out](const SparseMatrix& a, const Eigen::VectorXd& b,
                          const std::vector<RowTag>& tags, const char* kind) {
    const Eigen::SparseMatrix<double, Eigen::RowMajor> rows(a);
    for (int r = 0; r < rows.outerSize(); ++r) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows, r); it; ++it)
        out << fmt::format("{} {} {} {:.17g}\n", kind, r, it.col(), it.value());
      const RowTag tag = r < static_cast<int>(tags.size()) ? tags[r] : RowTag::Generic;
      out << fmt::format("rhs_{} {} {:.17g} {}\n", kind, r, b[r], to_string(tag));
    }
  };
  dump_rows(p.a_eq, p.b_eq, p.eq_tags, "eq");
  dump_rows(p.a_ineq, p.b_ineq, p.ineq_tags, "ineq");
  out << fmt::format("constant {:.17g}\n", p.constant);
}

namespace detail {

int Assembler::add_var(VarInfo info, double lower, double upper, double cost, bool binary) {
  const int col = static_cast<int>(directory_.size());
  directory_.push_back(info);
  lower_.push_back(lower);
  upper_.push_back(upper);
  cost_.push_back(cost);
  if (binary) binaries_.push_back(col);
  return col;
}

void Assembler::add_eq(std::span<const Term> terms, double rhs, RowTag tag) {
  const int row = static_cast<int>(b_eq_.size());
  for (const auto& [col, a] : terms)
    if (a != 0.0) eq_.emplace_back(row, col, a);
  b_eq_.push_back(rhs);
  eq_tags_.push_back(tag);
}

void Assembler::add_ineq(std::span<const Term> terms, double rhs, RowTag tag) {
  const int row = static_cast<int>(b_ineq_.size());
  for (const auto& [col, a] : terms)
    if (a != 0.0) ineq_.emplace_back(row, col, a);
  b_ineq_.push_back(rhs);
  ineq_tags_.push_back(tag);
}

void Assembler::add_square(double weight, std::initializer_list<Term> terms, double offset) {
  if (weight == 0.0) return;
  // w (a'x + o)^2 = 0.5 x'(2w aa')x + 2wo a'x + w o^2
  for (const auto& [ci, ai] : terms) {
    for (const auto& [cj, aj] : terms) q_.emplace_back(ci, cj, 2.0 * weight * ai * aj);
    cost_[ci] += 2.0 * weight * offset * ai;
  }
  constant_ += weight * offset * offset;
}

MiqpProblem Assembler::finish() {
  const int n = static_cast<int>(directory_.size());
  MiqpProblem p;
  p.q.resize(n, n);
  p.q.setFromTriplets(q_.begin(), q_.end());
  p.q.prune(0.0);
  p.c = Eigen::Map<const Eigen::VectorXd>(cost_.data(), n);
  p.constant = constant_;
  p.a_eq.resize(static_cast<int>(b_eq_.size()), n);
  p.a_eq.setFromTriplets(eq_.begin(), eq_.end());
  p.b_eq = Eigen::Map<const Eigen::VectorXd>(b_eq_.data(), static_cast<int>(b_eq_.size()));
  p.a_ineq.resize(static_cast<int>(b_ineq_.size()), n);
  p.a_ineq.setFromTriplets(ineq_.begin(), ineq_.end());
  p.b_ineq = Eigen::Map<const Eigen::VectorXd>(b_ineq_.data(), static_cast<int>(b_ineq_.size()));
  p.lower = Eigen::Map<const Eigen::VectorXd>(lower_.data(), n);
  p.upper = Eigen::Map<const Eigen::VectorXd>(upper_.data(), n);
  p.binaries = binaries_;
  p.directory = directory_;
  p.pairs = pairs_;
  p.eq_tags = eq_tags_;
  p.ineq_tags = ineq_tags_;
  return p;
}

SessionColumns emit_session(Assembler& as, const Scenario& scenario, const SessionSlice& slice,
                            const BuildOptions& options) {
  const auto& s = scenario.sessions[slice.index];
  const int i = slice.index;
  const double p = max_energy_per_period(s.spec, scenario.grid);
  const double kc = s.spec.eta_c * p;
  const double kd = p / s.spec.eta_d;
  const double cap = s.spec.battery_capacity_kwh;
  const double big_m = cap;
  const int start = slice.start;
  const int end = slice.end;
  const int len = end - start;
  const bool v2g = s.is_v2g();
  const auto& dp = scenario.degradation;
  const double lambda = scenario.lambda;

  const int t_below = t_min_unchecked(s, scenario.grid, slice.soc_start);
  const bool min_waived = t_below > 0 && start + t_below > end;
  if (min_waived)
    log::warn(fmt::format("session {}: minimum SOC unreachable from period {}; charging at full "
                          "speed and waiving the minimum",
                          s.id, start));
  const int forced_end = min_waived ? end : start + t_below;

  SessionColumns cols;
  cols.index = i;
  cols.start = start;
  for (int t = start; t < end; ++t)
    cols.x_c.push_back(as.add_var({VarRole::ChargeRate, i, t}, t < forced_end ? 1.0 : 0.0, 1.0));
  if (v2g)
    for (int t = start; t < end; ++t) cols.x_d.push_back(as.add_var({VarRole::DischargeRate, i, t}, 0.0, 1.0));
  std::vector<int> soc;
  for (int t = start; t <= end; ++t) {
    const bool min_applies = !min_waived && t >= start + t_below;
    soc.push_back(as.add_var({VarRole::Soc, i, t}, min_applies ? s.soc_min_kwh : 0.0, cap));
  }
  std::vector<int> yc, yd;
  if (v2g) {
    for (int t = start; t < end; ++t) yc.push_back(as.add_var({VarRole::ChargeBlock, i, t}, 0.0, 1.0, 0.0, true));
    for (int t = start; t < end; ++t) yd.push_back(as.add_var({VarRole::DischargeBlock, i, t}, 0.0, 1.0, 0.0, true));
  }
  const int z = as.add_var({VarRole::DesiredWaiver, i, -1}, 0.0, 1.0, 0.0, true);
  int pin_c = -1, pin_d = -1;
  if (slice.pinned) {
    pin_c = as.add_var({VarRole::PreviousCharge, i, start - 1}, 0.0, 1.0);
    if (v2g) pin_d = as.add_var({VarRole::PreviousDischarge, i, start - 1}, 0.0, 1.0);
  }

  as.add_eq({{soc[0], 1.0}}, slice.soc_start, RowTag::SocInit);
  for (int k = 0; k < len; ++k) {
    if (v2g)
      as.add_eq({{soc[k + 1], 1.0}, {soc[k], -1.0}, {cols.x_c[k], -kc}, {cols.x_d[k], kd}}, 0.0,
                RowTag::SocUpdate);
    else
      as.add_eq({{soc[k + 1], 1.0}, {soc[k], -1.0}, {cols.x_c[k], -kc}}, 0.0, RowTag::SocUpdate);
  }
  if (v2g)
    for (int k = 0; k < len; ++k) as.add_eq({{yc[k], 1.0}, {yd[k], 1.0}}, 1.0, RowTag::BlockChoice);
  if (slice.pinned) {
    as.add_eq({{pin_c, 1.0}}, slice.last_c, RowTag::Pin);
    if (v2g) as.add_eq({{pin_d, 1.0}}, slice.last_d, RowTag::Pin);
  }

  // A carried-over SOC a round-off short of the desired level counts as
  // having reached it. Otherwise the level row leaves a sliver of width
  // ~1e-10 kWh that interior-point iterates cannot enter.
  const double desired = slice.soc_start >= s.soc_desired_kwh - kLevelSnapKwh
                             ? std::min(s.soc_desired_kwh, slice.soc_start)
                             : s.soc_desired_kwh;
  as.add_ineq({{z, -big_m}}, slice.soc_start + kc * len - desired, RowTag::DesiredReach);
  for (int k = 0; k < len; ++k) as.add_ineq({{z, 1.0}, {cols.x_c[k], -1.0}}, 0.0, RowTag::WaiverForcing);
  as.add_ineq({{soc[len], -1.0}, {z, -big_m}}, -desired, RowTag::DesiredLevel);
  if (v2g) {
    for (int k = 0; k < len; ++k) {
      as.add_ineq({{cols.x_c[k], 1.0}, {yc[k], 1.0}}, 1.0, RowTag::ChargeBlock);
      as.add_ineq({{cols.x_d[k], 1.0}, {yd[k], 1.0}}, 1.0, RowTag::DischargeBlock);
      as.add_pair({cols.x_c[k], cols.x_d[k], yc[k], yd[k]});
    }
  }

  const double w_ramp = lambda * dp.alpha;
  const double w_level = lambda * dp.beta;
  for (int k = 0; k < len; ++k) {
    const int xc = cols.x_c[k];
    if (k > 0) as.add_square(w_ramp, {{xc, kc}, {cols.x_c[k - 1], -kc}});
    else if (slice.pinned) as.add_square(w_ramp, {{xc, kc}, {pin_c, -kc}});
    else as.add_square(w_ramp, {{xc, kc}}, -kc * slice.last_c);
    if (v2g) {
      const int xd = cols.x_d[k];
      if (k > 0) as.add_square(w_ramp, {{xd, kd}, {cols.x_d[k - 1], -kd}});
      else if (slice.pinned) as.add_square(w_ramp, {{xd, kd}, {pin_d, -kd}});
      else as.add_square(w_ramp, {{xd, kd}}, -kd * slice.last_d);
      if (options.merge_v2g_level_terms) {
        as.add_square(w_level, {{xc, kc}, {xd, kd}});
      } else {
        as.add_square(w_level, {{xc, kc}});
        as.add_square(w_level, {{xd, kd}});
      }
    } else {
      as.add_square(w_level, {{xc, kc}});
    }
  }
  return cols;
}

void emit_fleet(Assembler& as, const Scenario& scenario, std::span<const SessionColumns> sessions,
                int start, int end, std::span<const double> wind,
                std::span<const double> future_demand, const BuildOptions& options) {
  const int len = end - start;
  std::vector<std::vector<Term>> charge_terms(len);
  std::vector<double> v2g_capacity(len, 0.0);
  for (const auto& sc : sessions) {
    const auto& s = scenario.sessions[sc.index];
    const double p = max_energy_per_period(s.spec, scenario.grid);
    for (std::size_t k = 0; k < sc.x_c.size(); ++k) {
      const int t = sc.start + static_cast<int>(k);
      if (t < start || t >= end) continue;
      charge_terms[t - start].emplace_back(sc.x_c[k], p);
      if (!sc.x_d.empty()) {
        charge_terms[t - start].emplace_back(sc.x_d[k], -p);
        v2g_capacity[t - start] += p;
      }
    }
  }
  std::vector<int> g(len), omega(len);
  for (int k = 0; k < len; ++k) {
    const double price = scenario.price_cents_per_kwh[start + k];
    g[k] = as.add_var({VarRole::GridSupply, -1, start + k}, 0.0, scenario.p_g_max_kwh, price);
  }
  for (int k = 0; k < len; ++k) {
    const double price = scenario.price_cents_per_kwh[start + k];
    omega[k] = as.add_var({VarRole::Curtailment, -1, start + k}, 0.0, wind[k] + v2g_capacity[k],
                          scenario.delta * price);
  }
  for (int k = 0; k < len; ++k) {
    const double d = future_demand.empty() ? 0.0 : future_demand[k];
    auto terms = charge_terms[k];
    if (options.balance_as_equality) {
      terms.emplace_back(g[k], -1.0);
      terms.emplace_back(omega[k], 1.0);
      as.add_eq(terms, wind[k] - d, RowTag::Balance);
    } else {
      auto grid_terms = terms;
      grid_terms.emplace_back(g[k], -1.0);
      as.add_ineq(grid_terms, wind[k] - d, RowTag::GridSupply);
      for (auto& term : terms) term.second = -term.second;
      terms.emplace_back(omega[k], -1.0);
      as.add_ineq(terms, d - wind[k], RowTag::Curtailment);
    }
  }
}

void clean_rates(double& x_c, double& x_d, double tolerance) {
  auto clip = [](double& x) {
    x = std::clamp(x, 0.0, 1.0);
    if (x < 1e-9) x = 0.0;
    if (x > 1.0 - 1e-9) x = 1.0;
  };
  clip(x_c);
  clip(x_d);
  if (std::min(x_c, x_d) <= tolerance) {
    if (x_c < x_d) x_c = 0.0;
    else if (x_d > 0.0 || x_c > 0.0) x_d = 0.0;
  }
}

}  // namespace detail
}  // namespace v2g
