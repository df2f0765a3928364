#pragma once

#include <span>

#include "v2g/domain.hpp"

namespace v2g {

// Battery wear costs in cents.
//
// The quadratic model penalises rate swings (alpha) and rate level (beta) in
// terms of energy actually stored or drawn: eta_c*P for charging and P/eta_d
// for discharging. The linear model charges a fixed rate per fraction of the
// pack moved, scaled by pack price.

double quadratic_cost(const EvSession& session, std::span<const double> x_c,
                      std::span<const double> x_d, const DegradationParams& params,
                      const TimeGrid& grid, double previous_rate_c = 0.0,
                      double previous_rate_d = 0.0);

enum class LinearMode {
  Signed,      // net (charge - discharge) energy per period, may go negative
  Throughput,  // |charge| + |discharge| energy per period
};

double linear_cost(const EvSession& session, std::span<const double> x_c,
                   std::span<const double> x_d, const DegradationParams& params,
                   const TimeGrid& grid, LinearMode mode = LinearMode::Signed);

enum class DegradationModel { Quadratic, Linear, LinearThroughput };

const char* to_string(DegradationModel model);
DegradationModel degradation_model_from_string(const char* text);

// Per-session cost of a full-horizon schedule row (static boundary: the rate
// before plan_start is taken as zero).
double session_degradation(const Scenario& scenario, const Schedule& schedule, std::size_t index,
                           DegradationModel model);

}  // namespace v2g
