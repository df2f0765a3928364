#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "v2g/domain.hpp"
#include "v2g/future_demand.hpp"

namespace v2g {

/// The ten vehicle models vehicles are drawn from.
std::vector<EvSpec> ev_catalog();

using HourlyPmf = std::array<double, 24>;

/// Built-in arrival-hour distributions (evening peak at home, morning peak
/// at work). The same numbers ship in data/arrival_pmfs.json.
HourlyPmf default_home_pmf();
HourlyPmf default_work_pmf();

struct ScenarioConfig {
  int n_vehicles = 100;  // sessions per day
  double home_fraction = 0.5;
  double r_v2g = 0.5;
  int days = 10;
  std::uint64_t seed = 1;
  HourlyPmf arrival_pmf_home = default_home_pmf();
  HourlyPmf arrival_pmf_work = default_work_pmf();
  int min_plug_periods = 16;  // 4 h at 15 min
  int max_plug_periods = 48;  // 12 h
  double soc_init_min_frac = 0.0;
  double soc_init_max_frac = 0.65;
  double soc_desired_min_frac = 0.75;
  double soc_desired_max_frac = 0.95;
  double soc_min_kwh = 5.0;
  double eta = 0.9;

  void validate() const;
};

/// Random fleet for `config`. The returned scenario has its grid sized to
/// cover every departure but no wind or price trace yet.
Scenario generate(const ScenarioConfig& config);

/// Diurnal wind for a turbine of `turbine_kw` with autocorrelated noise, in
/// kWh per period. Deterministic in `seed`.
std::vector<double> synthetic_wind(const TimeGrid& grid, double turbine_kw, std::uint64_t seed);

/// Hourly price profile (cents/kWh) with morning and evening peaks, expanded
/// to periods. Deterministic in `seed`; never below 0.5 cents.
std::vector<double> synthetic_price(const TimeGrid& grid, std::uint64_t seed);

/// Turbine size used for synthetic wind: 2.3 kW per daily vehicle.
double default_turbine_kw(int n_vehicles);

/// generate() plus synthetic wind and price traces.
Scenario generate_with_traces(const ScenarioConfig& config);

/// Averages of a session history. `days` is the number of days the history
/// covers; 0 derives it from the latest arrival.
FutureDemandModel fit_future_demand_model(std::span<const EvSession> history, const TimeGrid& grid,
                                          int days = 0);

/// Reads {"home": [...24], "work": [...24]} arrival PMFs.
void load_arrival_pmfs(const std::string& json_text, ScenarioConfig& config);

}  // namespace v2g
