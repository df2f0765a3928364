#include "v2g/degradation.hpp"

#include <cmath>
#include <cstring>

#include "v2g/error.hpp"

namespace v2g {

double quadratic_cost(const EvSession& session, std::span<const double> x_c,
                      std::span<const double> x_d, const DegradationParams& params,
                      const TimeGrid& grid, double previous_rate_c, double previous_rate_d) {
  const double p = max_energy_per_period(session.spec, grid);
  const double kc = session.spec.eta_c * p;
  const double kd = p / session.spec.eta_d;
  double cost = 0.0;
  double prev = previous_rate_c;
  for (double x : x_c) {
    const double ramp = kc * (x - prev);
    const double level = kc * x;
    cost += params.alpha * ramp * ramp + params.beta * level * level;
    prev = x;
  }
  if (session.is_v2g()) {
    prev = previous_rate_d;
    for (double x : x_d) {
      const double ramp = kd * (x - prev);
      const double level = kd * x;
      cost += params.alpha * ramp * ramp + params.beta * level * level;
      prev = x;
    }
  }
  return cost;
}

double linear_cost(const EvSession& session, std::span<const double> x_c,
                   std::span<const double> x_d, const DegradationParams& params,
                   const TimeGrid& grid, LinearMode mode) {
  const double p = max_energy_per_period(session.spec, grid);
  const double scale = params.linear_rate_cents_per_kwh *
                       (session.spec.battery_cost_usd / params.reference_pack_cost_usd) /
                       session.spec.battery_capacity_kwh;
  double cost = 0.0;
  for (std::size_t k = 0; k < x_c.size(); ++k) {
    const double in = p * x_c[k];
    const double out = (session.is_v2g() && k < x_d.size()) ? p * x_d[k] : 0.0;
    cost += scale * (mode == LinearMode::Signed ? in - out : std::abs(in) + std::abs(out));
  }
  return cost;
}

const char* to_string(DegradationModel model) {
  switch (model) {
    case DegradationModel::Quadratic: return "quadratic";
    case DegradationModel::Linear: return "linear";
    case DegradationModel::LinearThroughput: return "linear-throughput";
  }
  return "quadratic";
}

DegradationModel degradation_model_from_string(const char* text) {
  if (std::strcmp(text, "quadratic") == 0) return DegradationModel::Quadratic;
  if (std::strcmp(text, "linear") == 0) return DegradationModel::Linear;
  if (std::strcmp(text, "linear-throughput") == 0) return DegradationModel::LinearThroughput;
  throw InvalidInput(std::string("unknown degradation model '") + text + "'");
}

double session_degradation(const Scenario& scenario, const Schedule& schedule, std::size_t index,
                           DegradationModel model) {
  const auto& s = scenario.sessions[index];
  const int start = schedule.plan_start.empty() ? s.t_arr : schedule.plan_start[index];
  const int len = s.t_dep - start;
  if (len <= 0) return 0.0;
  std::span<const double> xc(schedule.x_c[index].data() + start, len);
  std::span<const double> xd(schedule.x_d[index].data() + start, len);
  switch (model) {
    case DegradationModel::Quadratic:
      return quadratic_cost(s, xc, xd, scenario.degradation, scenario.grid);
    case DegradationModel::Linear:
      return linear_cost(s, xc, xd, scenario.degradation, scenario.grid, LinearMode::Signed);
    case DegradationModel::LinearThroughput:
      return linear_cost(s, xc, xd, scenario.degradation, scenario.grid, LinearMode::Throughput);
  }
  return 0.0;
}

}  // namespace v2g
