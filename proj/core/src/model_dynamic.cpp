#include <fmt/format.h>

#include <algorithm>

#include "model_detail.hpp"
#include "v2g/error.hpp"

namespace v2g {

MiqpProblem build_dynamic(const Scenario& scenario, std::span<const WindowSession> sessions,
                          PlanningWindow window, std::span<const double> wind,
                          std::span<const double> future_demand, const BuildOptions& options) {
  if (window.start < 0 || window.end > scenario.horizon() || window.length() <= 0)
    throw InvalidInput(fmt::format("planning window [{}, {}) outside the horizon", window.start, window.end));
  if (static_cast<int>(wind.size()) != window.length())
    throw InvalidInput("wind forecast does not cover the planning window");
  if (!future_demand.empty() && static_cast<int>(future_demand.size()) != window.length())
    throw InvalidInput("future demand does not cover the planning window");
  if (sessions.empty()) return MiqpProblem{};

  detail::Assembler as;
  std::vector<detail::SessionColumns> columns;
  columns.reserve(sessions.size());
  for (const auto& ws : sessions) {
    const auto& s = scenario.sessions.at(ws.index);
    if (s.t_dep <= window.start || s.t_dep > window.end)
      throw InvalidInput(fmt::format("session {} does not fit the planning window", s.id));
    detail::SessionSlice slice;
    slice.index = ws.index;
    slice.start = std::max(s.t_arr, window.start);
    slice.end = s.t_dep;
    slice.soc_start = ws.soc_now;
    slice.pinned = true;
    slice.last_c = std::clamp(ws.last_c, 0.0, 1.0);
    slice.last_d = s.is_v2g() ? std::clamp(ws.last_d, 0.0, 1.0) : 0.0;
    columns.push_back(detail::emit_session(as, scenario, slice, options));
  }
  detail::emit_fleet(as, scenario, columns, window.start, window.end, wind, future_demand, options);
  return as.finish();
}

WindowPlan extract_window(const Scenario& scenario, std::span<const WindowSession> sessions,
                          PlanningWindow window, const MiqpProblem& problem, const Eigen::VectorXd& x) {
  if (x.size() != problem.num_vars()) throw InvalidInput("point does not match problem size");
  WindowPlan plan;
  plan.window = window;
  std::vector<int> slot(scenario.sessions.size(), -1);
  for (std::size_t k = 0; k < sessions.size(); ++k) {
    plan.sessions.push_back(sessions[k].index);
    slot[sessions[k].index] = static_cast<int>(k);
  }
  plan.x_c.assign(sessions.size(), std::vector<double>(window.length(), 0.0));
  plan.x_d.assign(sessions.size(), std::vector<double>(window.length(), 0.0));
  for (int j = 0; j < problem.num_vars(); ++j) {
    const auto& info = problem.directory[j];
    if (info.role != VarRole::ChargeRate && info.role != VarRole::DischargeRate) continue;
    const int k = slot[info.session];
    if (k < 0) continue;
    auto& row = info.role == VarRole::ChargeRate ? plan.x_c[k] : plan.x_d[k];
    row[info.period - window.start] = x[j];
  }
  for (std::size_t k = 0; k < sessions.size(); ++k)
    for (int t = 0; t < window.length(); ++t) detail::clean_rates(plan.x_c[k][t], plan.x_d[k][t], 1e-6);
  return plan;
}

}  // namespace v2g
