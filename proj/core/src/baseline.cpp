#include "v2g/baseline.hpp"

#include <algorithm>

namespace v2g {

Schedule bau_schedule(const Scenario& scenario) {
  scenario.validate();
  Schedule out = Schedule::empty_for(scenario);
  for (std::size_t i = 0; i < scenario.sessions.size(); ++i) {
    const EvSession& s = scenario.sessions[i];
    const double step = s.spec.eta_c * max_energy_per_period(s.spec, scenario.grid);
    double room = s.spec.battery_capacity_kwh - s.soc_init_kwh;
    for (int t = s.t_arr; t < s.t_dep && room > 0.0 && step > 0.0; ++t) {
      const double rate = std::min(1.0, room / step);
      out.x_c[i][t] = rate;
      room -= rate * step;
    }
  }
  recompute_soc(scenario, out);
  // Land exactly on capacity despite rounding in the running sum.
  for (std::size_t i = 0; i < scenario.sessions.size(); ++i) {
    const double cap = scenario.sessions[i].spec.battery_capacity_kwh;
    for (double& v : out.soc[i]) v = std::min(v, cap);
  }
  derive_grid_flows(scenario, out);
  return out;
}

}  // namespace v2g
