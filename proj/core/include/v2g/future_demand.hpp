#pragma once

#include <span>
#include <vector>

#include "v2g/domain.hpp"
#include "v2g/model.hpp"

namespace v2g {

/// Average behaviour of vehicles that have not arrived yet.
struct FutureDemandModel {
  /// Mean energy a vehicle needs on arrival (desired minus initial SOC), kWh.
  double expected_required_charge = 0.0;
  /// Mean plug length in periods.
  double expected_plug_periods = 0.0;
  /// Expected arrivals per period slot of the day (periods_per_day entries).
  std::vector<double> arrival_rate;

  void validate() const;
};

/// Expected energy per period drawn by vehicles arriving after the planning
/// instant `phi`, over the periods of `window`:
///
///   D[t] = ER * N[t] / PT,  N[t] = sum over s in (phi, t] of rate(s) * [t - s < PT]
///
/// where rate(s) repeats daily. Entries are window-relative.
std::vector<double> estimate_future_demand(const FutureDemandModel& model, int phi, PlanningWindow window);

}  // namespace v2g
