#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "v2g/domain.hpp"
#include "v2g/forecast.hpp"
#include "v2g/future_demand.hpp"
#include "v2g/miqp.hpp"
#include "v2g/model.hpp"

namespace v2g {

struct PlannerConfig {
  SolverConfig solver;
  BuildOptions build;
  /// Wind seen by each window; null means the realized trace (perfect forecast).
  const MarkovForecaster* forecaster = nullptr;
  /// Expected demand of vehicles not yet arrived; none leaves it out.
  std::optional<FutureDemandModel> future_demand;
};

/// One active session as carried between planning instants.
struct ActiveSession {
  int index = 0;        // into Scenario::sessions
  double soc_now = 0.0;  // SOC at the current planning instant
  double last_c = 0.0;  // committed rate of the period before it
  double last_d = 0.0;
};

struct PlannerState {
  int j = 0;
  std::vector<ActiveSession> active;
  /// Sessions below their minimum SOC at the current planning instant.
  std::vector<int> below_minimum;
  /// Rates are final for every period before committed_until.
  Schedule committed;
  int committed_until = 0;
};

struct StepDiagnostics {
  int j = 0;
  int phi = 0;
  int active = 0;
  int arrivals = 0;
  int window_start = 0;
  int window_length = 0;
  bool solved = false;
  std::string status;
  double objective = 0.0;
  double bound = 0.0;
  double gap = 0.0;
  long nodes = 0;
  double seconds = 0.0;
};

/// Fresh state for `scenario`: nothing committed, no active sessions.
PlannerState initial_state(const Scenario& scenario);

/// Sessions arriving in (phi(j-1), phi(j)]; at j = 0 those arriving at or
/// before phi(0).
std::vector<int> arrivals_for_step(const Scenario& scenario, int j);

/// One planning step at instant phi(state.j): drops departed sessions, adds
/// `arrivals`, solves the window model and commits the first planning
/// interval. Advances state.j. Throws SolverError naming the step when the
/// window cannot be solved.
StepDiagnostics step(const Scenario& scenario, PlannerState& state, std::span<const int> arrivals,
                     const PlannerConfig& config);

struct RunResult {
  Schedule schedule;
  std::vector<StepDiagnostics> steps;
};

/// Re-plans at every planning instant of the horizon and returns the
/// committed schedule with grid flows for the realized wind.
RunResult run(const Scenario& scenario, const PlannerConfig& config);

/// Diagnostics as one JSON object; solve time only when `with_timing`.
std::string to_json_line(const StepDiagnostics& diagnostics, bool with_timing = false);

}  // namespace v2g
