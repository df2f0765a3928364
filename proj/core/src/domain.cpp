#include "v2g/domain.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "v2g/error.hpp"

namespace v2g {

namespace {

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void TimeGrid::validate() const {
  if (delta_t_minutes <= 0) throw InvalidInput("delta_t_minutes must be positive");
  if (planning_interval_minutes <= 0 || planning_interval_minutes % delta_t_minutes != 0)
    throw InvalidInput("planning interval must be a positive multiple of delta_t");
  if (periods_per_day * delta_t_minutes != 24 * 60)
    throw InvalidInput("periods_per_day does not match delta_t_minutes");
  if (horizon_periods <= 0) throw InvalidInput("horizon must contain at least one period");
}

TimeGrid TimeGrid::with_horizon(int horizon_periods) {
  TimeGrid grid;
  grid.horizon_periods = horizon_periods;
  return grid;
}

void EvSpec::validate() const {
  if (!std::isfinite(acceptance_rate_kw) || acceptance_rate_kw < 0.0 ||
      !std::isfinite(charger_power_kw) || charger_power_kw < 0.0)
    throw InvalidInput(fmt::format("EV '{}': power ratings must be non-negative", name));
  if (!finite_positive(battery_capacity_kwh))
    throw InvalidInput(fmt::format("EV '{}': battery capacity must be positive", name));
  if (!std::isfinite(battery_cost_usd) || battery_cost_usd < 0.0)
    throw InvalidInput(fmt::format("EV '{}': battery cost must be non-negative", name));
  if (!(eta_c > 0.0 && eta_c <= 1.0) || !(eta_d > 0.0 && eta_d <= 1.0))
    throw InvalidInput(fmt::format("EV '{}': efficiencies must lie in (0, 1]", name));
}

const char* to_string(Mode mode) { return mode == Mode::V2G ? "V2G" : "G2V"; }

Mode mode_from_string(const std::string& text) {
  if (text == "V2G" || text == "v2g") return Mode::V2G;
  if (text == "G2V" || text == "g2v") return Mode::G2V;
  throw InvalidInput("unknown session mode '" + text + "'");
}

void EvSession::validate() const {
  spec.validate();
  const double cap = spec.battery_capacity_kwh;
  if (t_arr < 0 || t_arr >= t_dep)
    throw InvalidInput(fmt::format("session {}: need 0 <= t_arr < t_dep", id));
  auto in_range = [cap](double v) { return std::isfinite(v) && v >= 0.0 && v <= cap; };
  if (!in_range(soc_init_kwh) || !in_range(soc_desired_kwh) || !in_range(soc_min_kwh))
    throw InvalidInput(fmt::format("session {}: SOC values must lie in [0, capacity]", id));
}

void DegradationParams::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(linear_rate_cents_per_kwh >= 0.0) ||
      !(reference_pack_cost_usd > 0.0))
    throw InvalidInput("degradation parameters must be non-negative");
}

void Scenario::validate() const {
  grid.validate();
  degradation.validate();
  const auto horizon = static_cast<std::size_t>(grid.horizon_periods);
  if (wind_kwh.size() < horizon) throw InvalidInput("wind trace shorter than horizon");
  if (price_cents_per_kwh.size() < horizon) throw InvalidInput("price trace shorter than horizon");
  for (std::size_t t = 0; t < horizon; ++t) {
    if (!std::isfinite(wind_kwh[t]) || wind_kwh[t] < 0.0)
      throw InvalidInput(fmt::format("wind at period {} must be non-negative", t));
    if (!finite_positive(price_cents_per_kwh[t]))
      throw InvalidInput(fmt::format("price at period {} must be strictly positive", t));
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("lambda must lie in [0, 1]");
  if (!std::isfinite(delta) || delta < 0.0) throw InvalidInput("delta must be non-negative");
  if (!finite_positive(p_g_max_kwh)) throw InvalidInput("p_g_max_kwh must be positive");
  if (!(discharge_price_factor >= 0.0)) throw InvalidInput("discharge price factor must be non-negative");
  std::set<int> ids;
  for (const auto& s : sessions) {
    s.validate();
    if (s.t_dep > grid.horizon_periods)
      throw InvalidInput(fmt::format("session {} departs after the horizon", s.id));
    if (!ids.insert(s.id).second) throw InvalidInput(fmt::format("duplicate session id {}", s.id));
  }
}

Schedule Schedule::empty_for(const Scenario& scenario) {
  const int h = scenario.horizon();
  const std::size_t n = scenario.sessions.size();
  Schedule s;
  s.x_c.assign(n, std::vector<double>(h, 0.0));
  s.x_d.assign(n, std::vector<double>(h, 0.0));
  s.soc.resize(n);
  s.plan_start.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.soc[i].assign(h + 1, scenario.sessions[i].soc_init_kwh);
    s.plan_start[i] = scenario.sessions[i].t_arr;
  }
  s.g_kwh.assign(h, 0.0);
  s.omega_kwh.assign(h, 0.0);
  return s;
}

double max_energy_per_period(const EvSpec& spec, const TimeGrid& grid) {
  return std::min(spec.acceptance_rate_kw, spec.charger_power_kw) * grid.hours_per_period();
}

int t_min_unchecked(const EvSession& session, const TimeGrid& grid, double soc_now) {
  const double deficit = session.soc_min_kwh - soc_now;
  if (deficit <= 0.0) return 0;
  const double step = session.spec.eta_c * max_energy_per_period(session.spec, grid);
  if (step <= 0.0) return session.plug_length() + 1;
  // The small shift keeps an exact multiple from rounding up on re-planning.
  return static_cast<int>(std::ceil(deficit / step - 1e-9));
}

int t_min_from(const EvSession& session, const TimeGrid& grid, double soc_now, int start) {
  const int periods = t_min_unchecked(session, grid, soc_now);
  if (start + periods > session.t_dep)
    throw InfeasibleModel(fmt::format("session {}: minimum SOC unreachable before departure", session.id));
  return periods;
}

int t_min(const EvSession& session, const TimeGrid& grid) {
  return t_min_from(session, grid, session.soc_init_kwh, session.t_arr);
}

bool desired_reachable(const EvSession& session, const TimeGrid& grid, double soc_now, int start) {
  const double step = session.spec.eta_c * max_energy_per_period(session.spec, grid);
  return soc_now + step * (session.t_dep - start) >= session.soc_desired_kwh;
}

std::vector<double> soc_trajectory_from(const EvSession& session, double soc0,
                                        std::span<const double> x_c,
                                        std::span<const double> x_d, const TimeGrid& grid) {
  const double p = max_energy_per_period(session.spec, grid);
  const double up = session.spec.eta_c * p;
  const double down = p / session.spec.eta_d;
  const bool discharge = session.is_v2g() && !x_d.empty();
  std::vector<double> soc(x_c.size() + 1);
  soc[0] = soc0;
  for (std::size_t k = 0; k < x_c.size(); ++k) {
    double next = soc[k] + up * x_c[k];
    if (discharge) next -= down * x_d[k];
    soc[k + 1] = next;
  }
  return soc;
}

std::vector<double> soc_trajectory(const EvSession& session, std::span<const double> x_c,
                                   std::span<const double> x_d, const TimeGrid& grid) {
  return soc_trajectory_from(session, session.soc_init_kwh, x_c, x_d, grid);
}

double fleet_charge_kwh(const Scenario& scenario, const Schedule& schedule, int t) {
  double total = 0.0;
  for (std::size_t i = 0; i < scenario.sessions.size(); ++i)
    total += max_energy_per_period(scenario.sessions[i].spec, scenario.grid) * schedule.x_c[i][t];
  return total;
}

double fleet_discharge_kwh(const Scenario& scenario, const Schedule& schedule, int t) {
  double total = 0.0;
  for (std::size_t i = 0; i < scenario.sessions.size(); ++i) {
    if (!scenario.sessions[i].is_v2g()) continue;
    total += max_energy_per_period(scenario.sessions[i].spec, scenario.grid) * schedule.x_d[i][t];
  }
  return total;
}

void derive_grid_flows(const Scenario& scenario, Schedule& schedule,
                       std::span<const double> future_demand) {
  const int h = scenario.horizon();
  schedule.g_kwh.assign(h, 0.0);
  schedule.omega_kwh.assign(h, 0.0);
  for (int t = 0; t < h; ++t) {
    double net = fleet_charge_kwh(scenario, schedule, t) - fleet_discharge_kwh(scenario, schedule, t) -
                 scenario.wind_kwh[t];
    if (!future_demand.empty()) net += future_demand[t];
    if (net > 0.0) schedule.g_kwh[t] = net;
    else schedule.omega_kwh[t] = -net;
  }
}

void recompute_soc(const Scenario& scenario, Schedule& schedule) {
  const int h = scenario.horizon();
  for (std::size_t i = 0; i < scenario.sessions.size(); ++i) {
    const auto& s = scenario.sessions[i];
    const int len = s.plug_length();
    std::span<const double> xc(schedule.x_c[i].data() + s.t_arr, len);
    std::span<const double> xd(schedule.x_d[i].data() + s.t_arr, len);
    const auto traj = soc_trajectory(s, xc, xd, scenario.grid);
    auto& row = schedule.soc[i];
    row.assign(h + 1, s.soc_init_kwh);
    for (int k = 0; k <= len; ++k) row[s.t_arr + k] = traj[k];
    for (int t = s.t_dep + 1; t <= h; ++t) row[t] = traj[len];
  }
}

const char* to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::RateBounds: return "rate-bounds";
    case ViolationKind::OutsidePlugPeriod: return "outside-plug-period";
    case ViolationKind::G2VDischarge: return "g2v-discharge";
    case ViolationKind::Complementarity: return "complementarity";
    case ViolationKind::SocTrajectory: return "soc-trajectory";
    case ViolationKind::SocCapacity: return "soc-capacity";
    case ViolationKind::SocNegative: return "soc-negative";
    case ViolationKind::SocMinimum: return "soc-minimum";
    case ViolationKind::MinimumCharging: return "minimum-charging";
    case ViolationKind::DesiredLevel: return "desired-level";
    case ViolationKind::TransformerCap: return "transformer-cap";
    case ViolationKind::Balance: return "balance";
    case ViolationKind::GridCurtailmentOverlap: return "grid-curtailment-overlap";
    case ViolationKind::NegativeFlow: return "negative-flow";
  }
  return "unknown";
}

std::string describe(const Violation& v) {
  return fmt::format("{} (session {}, period {}, amount {:.3g})", to_string(v.kind), v.session,
                     v.period, v.amount);
}

std::vector<Violation> validate_schedule(const Scenario& scenario, const Schedule& schedule) {
  const double tol = kEnergyTolerance;
  const int h = scenario.horizon();
  const std::size_t n = scenario.sessions.size();
  auto rows_ok = [&](const std::vector<std::vector<double>>& m, std::size_t len) {
    if (m.size() != n) return false;
    return std::all_of(m.begin(), m.end(), [len](const auto& r) { return r.size() == len; });
  };
  if (!rows_ok(schedule.x_c, h) || !rows_ok(schedule.x_d, h) || !rows_ok(schedule.soc, h + 1) ||
      schedule.g_kwh.size() != static_cast<std::size_t>(h) ||
      schedule.omega_kwh.size() != static_cast<std::size_t>(h) || schedule.plan_start.size() != n)
    throw InvalidInput("schedule shape does not match scenario");

  std::vector<Violation> out;
  auto report = [&](ViolationKind k, int i, int t, double amount) {
    out.push_back(Violation{k, i, t, amount});
  };

  for (std::size_t ii = 0; ii < n; ++ii) {
    const int i = static_cast<int>(ii);
    const auto& s = scenario.sessions[ii];
    const auto& xc = schedule.x_c[ii];
    const auto& xd = schedule.x_d[ii];
    const auto& soc = schedule.soc[ii];
    const int start = std::clamp(schedule.plan_start[ii], s.t_arr, s.t_dep);
    const double cap = s.spec.battery_capacity_kwh;

    for (int t = 0; t < h; ++t) {
      for (double x : {xc[t], xd[t]})
        if (x < -tol || x > 1.0 + tol) report(ViolationKind::RateBounds, i, t, x);
      const bool controlled = t >= start && t < s.t_dep;
      if (!controlled && (std::abs(xc[t]) > tol || std::abs(xd[t]) > tol))
        report(ViolationKind::OutsidePlugPeriod, i, t, std::max(std::abs(xc[t]), std::abs(xd[t])));
      if (!s.is_v2g() && std::abs(xd[t]) > tol) report(ViolationKind::G2VDischarge, i, t, xd[t]);
      if (std::min(xc[t], xd[t]) > tol) report(ViolationKind::Complementarity, i, t, std::min(xc[t], xd[t]));
    }

    const int len = s.plug_length();
    const auto traj = soc_trajectory(s, std::span<const double>(xc.data() + s.t_arr, len),
                                     std::span<const double>(xd.data() + s.t_arr, len), scenario.grid);
    for (int k = 0; k <= len; ++k) {
      const int t = s.t_arr + k;
      if (std::abs(soc[t] - traj[k]) > tol) report(ViolationKind::SocTrajectory, i, t, soc[t] - traj[k]);
      if (soc[t] > cap + tol) report(ViolationKind::SocCapacity, i, t, soc[t] - cap);
      if (soc[t] < -tol) report(ViolationKind::SocNegative, i, t, soc[t]);
    }

    const double soc_start = soc[start];
    if (soc_start < s.soc_min_kwh) {
      const int periods = t_min_unchecked(s, scenario.grid, soc_start);
      const bool waived = start + periods > s.t_dep;
      const int forced_end = waived ? s.t_dep : start + periods;
      for (int t = start; t < forced_end; ++t)
        if (xc[t] < 1.0 - tol) report(ViolationKind::MinimumCharging, i, t, 1.0 - xc[t]);
      if (!waived)
        for (int t = forced_end; t <= s.t_dep; ++t)
          if (soc[t] < s.soc_min_kwh - tol) report(ViolationKind::SocMinimum, i, t, s.soc_min_kwh - soc[t]);
    } else {
      for (int t = start; t <= s.t_dep; ++t)
        if (soc[t] < s.soc_min_kwh - tol) report(ViolationKind::SocMinimum, i, t, s.soc_min_kwh - soc[t]);
    }

    const bool reachable = desired_reachable(s, scenario.grid, soc_start, start);
    if (reachable) {
      if (soc[s.t_dep] < s.soc_desired_kwh - tol)
        report(ViolationKind::DesiredLevel, i, s.t_dep, s.soc_desired_kwh - soc[s.t_dep]);
    } else {
      for (int t = start; t < s.t_dep; ++t)
        if (xc[t] < 1.0 - tol) report(ViolationKind::DesiredLevel, i, t, 1.0 - xc[t]);
    }
  }

  for (int t = 0; t < h; ++t) {
    const double g = schedule.g_kwh[t];
    const double w = schedule.omega_kwh[t];
    if (g < -tol || w < -tol) report(ViolationKind::NegativeFlow, -1, t, std::min(g, w));
    if (g > scenario.p_g_max_kwh + tol) report(ViolationKind::TransformerCap, -1, t, g - scenario.p_g_max_kwh);
    const double net = fleet_charge_kwh(scenario, schedule, t) - fleet_discharge_kwh(scenario, schedule, t) -
                       scenario.wind_kwh[t];
    if (std::abs((g - w) - net) > tol) report(ViolationKind::Balance, -1, t, (g - w) - net);
    if (std::min(g, w) > tol) report(ViolationKind::GridCurtailmentOverlap, -1, t, std::min(g, w));
  }
  return out;
}

}  // namespace v2g
