#include <algorithm>

#include "model_detail.hpp"
#include "v2g/error.hpp"

namespace v2g {

MiqpProblem build_static(const Scenario& scenario, const BuildOptions& options) {
  scenario.validate();
  detail::Assembler as;
  std::vector<detail::SessionColumns> columns;
  columns.reserve(scenario.sessions.size());
  for (std::size_t i = 0; i < scenario.sessions.size(); ++i) {
    const auto& s = scenario.sessions[i];
    detail::SessionSlice slice;
    slice.index = static_cast<int>(i);
    slice.start = s.t_arr;
    slice.end = s.t_dep;
    slice.soc_start = s.soc_init_kwh;
    columns.push_back(detail::emit_session(as, scenario, slice, options));
  }
  const int h = scenario.horizon();
  detail::emit_fleet(as, scenario, columns, 0, h, std::span<const double>(scenario.wind_kwh.data(), h), {},
                     options);
  return as.finish();
}

Schedule extract_static(const Scenario& scenario, const MiqpProblem& problem, const Eigen::VectorXd& x) {
  if (x.size() != problem.num_vars()) throw InvalidInput("point does not match problem size");
  Schedule schedule = Schedule::empty_for(scenario);
  for (int j = 0; j < problem.num_vars(); ++j) {
    const auto& info = problem.directory[j];
    if (info.role == VarRole::ChargeRate) schedule.x_c[info.session][info.period] = x[j];
    else if (info.role == VarRole::DischargeRate) schedule.x_d[info.session][info.period] = x[j];
  }
  for (std::size_t i = 0; i < scenario.sessions.size(); ++i)
    for (int t = 0; t < scenario.horizon(); ++t)
      detail::clean_rates(schedule.x_c[i][t], schedule.x_d[i][t], 1e-6);
  recompute_soc(scenario, schedule);
  derive_grid_flows(scenario, schedule);
  return schedule;
}

}  // namespace v2g
