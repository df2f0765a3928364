#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace v2g {

/// Absolute tolerance for every energy comparison, in kWh.
inline constexpr double kEnergyTolerance = 1e-6;

/// Uniform discretization of the scheduling horizon.
///
/// Period `t` is the slot [t, t+1). Planning instants are `phi(j)`, spaced
/// `planning_interval_minutes` apart.
struct TimeGrid {
  int delta_t_minutes = 15;
  int periods_per_day = 96;
  int horizon_periods = 96;
  int planning_interval_minutes = 60;

  /// Hours covered by a single period.
  double hours_per_period() const { return delta_t_minutes / 60.0; }
  /// Number of periods between two consecutive planning instants.
  int periods_per_step() const { return planning_interval_minutes / delta_t_minutes; }
  /// First period of planning step j.
  int phi(int j) const { return periods_per_step() * j; }

  /// Throws InvalidInput when the grid is inconsistent.
  void validate() const;

  /// Grid with the given horizon and a 15 min / 1 h layout.
  static TimeGrid with_horizon(int horizon_periods);
};

struct EvSpec {
  std::string name;
  double acceptance_rate_kw = 0.0;
  double battery_capacity_kwh = 0.0;
  double charger_power_kw = 0.0;
  double battery_cost_usd = 0.0;
  double eta_c = 0.9;
  double eta_d = 0.9;

  void validate() const;
};

enum class Mode { G2V, V2G };

const char* to_string(Mode mode);
Mode mode_from_string(const std::string& text);

/// One plug-in episode of one vehicle. The plug period is [t_arr, t_dep).
struct EvSession {
  int id = 0;
  EvSpec spec;
  int t_arr = 0;
  int t_dep = 0;
  double soc_init_kwh = 0.0;
  double soc_desired_kwh = 0.0;
  double soc_min_kwh = 0.0;
  Mode mode = Mode::G2V;

  bool is_v2g() const { return mode == Mode::V2G; }
  int plug_length() const { return t_dep - t_arr; }
  /// Member of the below-minimum set at arrival.
  bool below_minimum() const { return soc_init_kwh < soc_min_kwh; }

  void validate() const;
};

struct DegradationParams {
  double alpha = 0.05;  // cents, ramp term weight
  double beta = 0.1;    // cents, level term weight
  double linear_rate_cents_per_kwh = 4.2;
  double reference_pack_cost_usd = 5000.0;

  void validate() const;
};

struct Scenario {
  TimeGrid grid;
  std::vector<double> wind_kwh;             // per period
  std::vector<double> price_cents_per_kwh;  // per period
  std::vector<EvSession> sessions;
  double lambda = 1.0;
  double delta = 0.25;
  double p_g_max_kwh = 250.0;
  double discharge_price_factor = 0.9;
  DegradationParams degradation;
  std::uint64_t seed = 0;  // scenario identity for comparisons

  int horizon() const { return grid.horizon_periods; }

  /// Throws InvalidInput on any broken invariant.
  void validate() const;
};

/// Rates, SOC and grid flows over the whole horizon.
///
/// Rate rows have `horizon` entries, SOC rows `horizon + 1`. A session's SOC
/// entries outside [t_arr, t_dep] are unused and kept at the boundary values.
struct Schedule {
  std::vector<std::vector<double>> x_c;
  std::vector<std::vector<double>> x_d;
  std::vector<std::vector<double>> soc;
  std::vector<double> g_kwh;
  std::vector<double> omega_kwh;
  /// First period each session was under control; equals t_arr except for
  /// re-planned sessions that wait for the next planning instant.
  std::vector<int> plan_start;

  /// Zero schedule with SOC held at the initial level.
  static Schedule empty_for(const Scenario& scenario);
};

/// Energy one period of charging (or discharging) at full rate moves, in kWh.
double max_energy_per_period(const EvSpec& spec, const TimeGrid& grid);

/// Periods of full-speed charging needed to lift soc_init to soc_min.
/// Counted from `start`; throws InfeasibleModel when start + result > t_dep.
int t_min(const EvSession& session, const TimeGrid& grid);
int t_min_from(const EvSession& session, const TimeGrid& grid, double soc_now, int start);

/// Same count without the reachability check.
int t_min_unchecked(const EvSession& session, const TimeGrid& grid, double soc_now);

/// Whether full-speed charging from `start` with `soc_now` reaches the desired
/// level by departure (the data-only test that decides the waiver binary).
bool desired_reachable(const EvSession& session, const TimeGrid& grid, double soc_now, int start);

/// SOC at times t0, t0+1, ..., t0+n for rate rows of length n starting at soc0.
/// `x_d` may be empty for G2V sessions.
std::vector<double> soc_trajectory(const EvSession& session, std::span<const double> x_c,
                                   std::span<const double> x_d, const TimeGrid& grid);
std::vector<double> soc_trajectory_from(const EvSession& session, double soc0,
                                        std::span<const double> x_c,
                                        std::span<const double> x_d, const TimeGrid& grid);

/// Total charging and discharging energy at period t (kWh).
double fleet_charge_kwh(const Scenario& scenario, const Schedule& schedule, int t);
double fleet_discharge_kwh(const Scenario& scenario, const Schedule& schedule, int t);

/// Sets G and Omega to the tight values implied by the balance identity.
/// `future_demand` (optional, per period) is added to the net demand.
void derive_grid_flows(const Scenario& scenario, Schedule& schedule,
                       std::span<const double> future_demand = {});

/// Recomputes each SOC row from the rate rows.
void recompute_soc(const Scenario& scenario, Schedule& schedule);

enum class ViolationKind {
  RateBounds,
  OutsidePlugPeriod,
  G2VDischarge,
  Complementarity,
  SocTrajectory,
  SocCapacity,
  SocNegative,
  SocMinimum,
  MinimumCharging,
  DesiredLevel,
  TransformerCap,
  Balance,
  GridCurtailmentOverlap,
  NegativeFlow,
};

const char* to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  int session = -1;  // index into scenario.sessions, -1 for fleet rows
  int period = -1;
  double amount = 0.0;
};

std::string describe(const Violation& violation);

/// Checks every schedule constraint with tolerance kEnergyTolerance.
/// Throws InvalidInput if shapes do not match the scenario.
std::vector<Violation> validate_schedule(const Scenario& scenario, const Schedule& schedule);

}  // namespace v2g
