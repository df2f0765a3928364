#include "v2g/rolling_horizon.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>

#include "v2g/error.hpp"
#include "v2g/log.hpp"

namespace v2g {

void FutureDemandModel::validate() const {
  if (!(expected_required_charge >= 0.0)) throw InvalidInput("expected required charge must be non-negative");
  if (!(expected_plug_periods >= 0.0)) throw InvalidInput("expected plug length must be non-negative");
  for (double r : arrival_rate)
    if (!(r >= 0.0)) throw InvalidInput("arrival rates must be non-negative");
}

std::vector<double> estimate_future_demand(const FutureDemandModel& model, int phi, PlanningWindow window) {
  model.validate();
  if (!(model.expected_plug_periods > 0.0)) throw InvalidInput("expected plug length must be positive");
  const int len = std::max(0, window.length());
  std::vector<double> out(len, 0.0);
  const int slots = static_cast<int>(model.arrival_rate.size());
  if (slots == 0) return out;
  const double per_vehicle = model.expected_required_charge / model.expected_plug_periods;
  for (int k = 0; k < len; ++k) {
    const int t = window.start + k;
    if (t <= phi) continue;
    double expected_present = 0.0;
    for (int s = phi + 1; s <= t; ++s)
      if (t - s < model.expected_plug_periods) expected_present += model.arrival_rate[((s % slots) + slots) % slots];
    out[k] = per_vehicle * expected_present;
  }
  return out;
}

PlannerState initial_state(const Scenario& scenario) {
  PlannerState state;
  state.committed = Schedule::empty_for(scenario);
  return state;
}

std::vector<int> arrivals_for_step(const Scenario& scenario, int j) {
  const int phi = scenario.grid.phi(j);
  const int prev = j == 0 ? std::numeric_limits<int>::min() : scenario.grid.phi(j - 1);
  std::vector<int> out;
  for (std::size_t i = 0; i < scenario.sessions.size(); ++i) {
    const int t = scenario.sessions[i].t_arr;
    if (t > prev && t <= phi) out.push_back(static_cast<int>(i));
  }
  return out;
}

namespace {

bool usable(SolveStatus status) {
  return status == SolveStatus::Optimal || status == SolveStatus::GapLimit || status == SolveStatus::NodeLimit;
}

}  // namespace

StepDiagnostics step(const Scenario& scenario, PlannerState& state, std::span<const int> arrivals,
                     const PlannerConfig& config) {
  const TimeGrid& grid = scenario.grid;
  const int j = state.j;
  const int phi = grid.phi(j);
  StepDiagnostics diag;
  diag.j = j;
  diag.phi = phi;
  diag.arrivals = static_cast<int>(arrivals.size());
  diag.window_start = phi;

  std::erase_if(state.active, [&](const ActiveSession& a) { return scenario.sessions[a.index].t_dep <= phi; });
  for (int i : arrivals) {
    const EvSession& s = scenario.sessions.at(i);
    // Vehicles idle between arrival and the planning instant.
    state.committed.plan_start[i] = std::min(phi, s.t_dep);
    if (s.t_dep <= phi) continue;
    state.active.push_back({i, s.soc_init_kwh, 0.0, 0.0});
  }
  std::sort(state.active.begin(), state.active.end(),
            [](const ActiveSession& a, const ActiveSession& b) { return a.index < b.index; });
  state.below_minimum.clear();
  for (const auto& a : state.active)
    if (scenario.sessions[a.index].soc_min_kwh > a.soc_now) state.below_minimum.push_back(a.index);
  diag.active = static_cast<int>(state.active.size());

  const int commit_end_nominal = std::min(grid.phi(j + 1), scenario.horizon());
  if (state.active.empty()) {
    diag.status = "idle";
    state.committed_until = std::max(state.committed_until, commit_end_nominal);
    ++state.j;
    return diag;
  }

  PlanningWindow window{phi, phi};
  for (const auto& a : state.active) window.end = std::max(window.end, scenario.sessions[a.index].t_dep);
  diag.window_length = window.length();

  std::vector<double> wind;
  if (config.forecaster != nullptr) {
    wind = config.forecaster->window(scenario.wind_kwh, window.start, window.length(), grid.periods_per_step());
  } else {
    wind.assign(scenario.wind_kwh.begin() + window.start, scenario.wind_kwh.begin() + window.end);
  }
  std::vector<double> demand;
  if (config.future_demand) demand = estimate_future_demand(*config.future_demand, phi, window);

  std::vector<WindowSession> sessions;
  sessions.reserve(state.active.size());
  for (const auto& a : state.active) sessions.push_back({a.index, a.soc_now, a.last_c, a.last_d});

  const auto t0 = std::chrono::steady_clock::now();
  Solution sol;
  MiqpProblem problem;
  try {
    problem = build_dynamic(scenario, sessions, window, wind, demand, config.build);
    sol = optimize(problem, config.solver);
  } catch (const SolverError& e) {
    throw SolverError(fmt::format("planning step {} (period {}): {}", j, phi, e.what()));
  } catch (const InfeasibleModel& e) {
    throw SolverError(fmt::format("planning step {} (period {}): {}", j, phi, e.what()));
  }
  diag.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  diag.status = to_string(sol.status);
  diag.nodes = sol.nodes;
  if (!usable(sol.status) || sol.x.size() != problem.num_vars())
    throw SolverError(fmt::format("planning step {} (period {}): window model {}", j, phi, to_string(sol.status)));
  if (sol.status != SolveStatus::Optimal)
    log::warn(fmt::format("planning step {}: stopped with status {} and gap {:.3g}", j, to_string(sol.status), sol.gap));
  diag.solved = true;
  diag.objective = sol.objective;
  diag.bound = sol.bound;
  diag.gap = sol.gap;

  const WindowPlan plan = extract_window(scenario, sessions, window, problem, sol.x);
  const int commit_end = std::min(commit_end_nominal, window.end);
  for (std::size_t k = 0; k < state.active.size(); ++k) {
    ActiveSession& a = state.active[k];
    const EvSession& s = scenario.sessions[a.index];
    const int end = std::min(commit_end, s.t_dep);
    for (int t = phi; t < end; ++t) {
      state.committed.x_c[a.index][t] = plan.x_c[k][t - phi];
      state.committed.x_d[a.index][t] = s.is_v2g() ? plan.x_d[k][t - phi] : 0.0;
    }
    if (end > phi) {
      std::span<const double> xc(state.committed.x_c[a.index].data() + phi, end - phi);
      std::span<const double> xd(state.committed.x_d[a.index].data() + phi, end - phi);
      a.soc_now = soc_trajectory_from(s, a.soc_now, xc, xd, grid).back();
      a.last_c = state.committed.x_c[a.index][end - 1];
      a.last_d = state.committed.x_d[a.index][end - 1];
    }
  }
  state.committed_until = std::max(state.committed_until, commit_end_nominal);
  ++state.j;
  return diag;
}

RunResult run(const Scenario& scenario, const PlannerConfig& config) {
  scenario.validate();
  RunResult result;
  PlannerState state = initial_state(scenario);
  const TimeGrid& grid = scenario.grid;
  for (int j = 0; grid.phi(j) < scenario.horizon(); ++j) {
    const auto arrivals = arrivals_for_step(scenario, j);
    result.steps.push_back(step(scenario, state, arrivals, config));
  }
  // Vehicles arriving after the last planning instant are never controlled.
  for (std::size_t i = 0; i < scenario.sessions.size(); ++i) {
    const EvSession& s = scenario.sessions[i];
    if (s.t_arr > grid.phi(state.j - 1)) state.committed.plan_start[i] = s.t_dep;
  }
  result.schedule = std::move(state.committed);
  recompute_soc(scenario, result.schedule);
  derive_grid_flows(scenario, result.schedule);
  return result;
}

std::string to_json_line(const StepDiagnostics& d, bool with_timing) {
  nlohmann::ordered_json j;
  j["j"] = d.j;
  j["phi"] = d.phi;
  j["active"] = d.active;
  j["arrivals"] = d.arrivals;
  j["window_start"] = d.window_start;
  j["window_length"] = d.window_length;
  j["status"] = d.status;
  if (d.solved) {
    j["objective"] = d.objective;
    j["bound"] = d.bound;
    j["gap"] = d.gap;
    j["nodes"] = d.nodes;
  }
  if (with_timing) j["seconds"] = d.seconds;
  return j.dump();
}

}  // namespace v2g
