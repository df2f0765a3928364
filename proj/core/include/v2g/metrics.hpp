#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "v2g/degradation.hpp"
#include "v2g/domain.hpp"

namespace v2g {

struct SessionReport {
  int id = 0;
  double charged_kwh = 0.0;     // energy drawn from the microgrid
  double discharged_kwh = 0.0;  // energy delivered to the microgrid
  double charge_cost_cents = 0.0;
  double degradation_cost_cents = 0.0;
  double discharge_revenue_cents = 0.0;
  double final_soc_kwh = 0.0;
};

/// Outcome measures of one schedule. Money is in cents.
///
/// Charge cost is what the charging vehicles pay: grid energy at the market
/// price plus discharged energy at the discharge price. Discharge revenue is
/// what discharging vehicles earn for the same energy, so the two discharge
/// flows cancel in the fleet total. The curtailment weight is not money and
/// is left out.
struct Report {
  std::string label;
  std::uint64_t seed = 0;
  double total_wind_kwh = 0.0;
  double total_grid_supply_kwh = 0.0;
  double total_curtailment_kwh = 0.0;
  double total_discharged_kwh = 0.0;
  /// (wind - curtailment) / wind in percent; none when there is no wind.
  std::optional<double> wind_utilization_pct;
  double grid_cost_cents = 0.0;
  double discharge_purchase_cents = 0.0;
  double charge_cost_cents = 0.0;
  double degradation_cost_cents = 0.0;
  double discharge_revenue_cents = 0.0;
  double total_cost_cents = 0.0;
  /// Discharge payments falling in periods where no vehicle charges.
  double unallocated_discharge_cents = 0.0;
  std::string degradation_model;
  std::vector<SessionReport> sessions;
};

Report report(const Scenario& scenario, const Schedule& schedule,
              DegradationModel model = DegradationModel::Quadratic, const std::string& label = {});

/// Objective of the day-ahead model evaluated on a schedule: grid cost,
/// curtailment penalty and lambda-weighted quadratic wear.
double objective_value(const Scenario& scenario, const Schedule& schedule);

std::string to_json(const Report& report);
Report report_from_json(const std::string& text);
/// Fleet metrics as a two-column `metric,value` CSV.
std::string to_csv(const Report& report);
/// Per-session breakdown as CSV.
std::string sessions_csv(const Report& report);

/// Metric-by-metric table for reports of the same scenario; deltas are
/// against the first report.
struct ComparisonRow {
  std::string metric;
  std::vector<double> values;  // NaN when not applicable
  std::vector<double> deltas;
};

struct Comparison {
  std::vector<std::string> labels;
  std::vector<ComparisonRow> rows;

  const ComparisonRow& row(const std::string& metric) const;
};

/// Throws InvalidInput with fewer than two reports or differing seeds.
Comparison compare(std::span<const Report> reports);
std::string to_csv(const Comparison& comparison);

}  // namespace v2g
