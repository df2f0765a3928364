#include "v2g/metrics.hpp"

#include <fmt/format.h>

#include <cmath>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "v2g/error.hpp"

namespace v2g {

Report report(const Scenario& scenario, const Schedule& schedule, DegradationModel model,
              const std::string& label) {
  const int h = scenario.horizon();
  const std::size_t n = scenario.sessions.size();
  if (schedule.x_c.size() != n || schedule.g_kwh.size() != static_cast<std::size_t>(h))
    throw InvalidInput("schedule shape does not match scenario");

  Report r;
  r.label = label;
  r.seed = scenario.seed;
  r.degradation_model = to_string(model);
  r.sessions.resize(n);
  std::vector<double> energy(n);
  for (std::size_t i = 0; i < n; ++i) energy[i] = max_energy_per_period(scenario.sessions[i].spec, scenario.grid);

  for (int t = 0; t < h; ++t) {
    const double price = scenario.price_cents_per_kwh[t];
    const double discharge_price = scenario.discharge_price_factor * price;
    r.total_wind_kwh += scenario.wind_kwh[t];
    r.total_grid_supply_kwh += schedule.g_kwh[t];
    r.total_curtailment_kwh += schedule.omega_kwh[t];

    double charge = 0.0, discharge = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double in = energy[i] * schedule.x_c[i][t];
      const double out = scenario.sessions[i].is_v2g() ? energy[i] * schedule.x_d[i][t] : 0.0;
      charge += in;
      discharge += out;
      r.sessions[i].charged_kwh += in;
      r.sessions[i].discharged_kwh += out;
      r.sessions[i].discharge_revenue_cents += discharge_price * out;
    }
    const double grid_cost = price * schedule.g_kwh[t];
    const double purchase = discharge_price * discharge;
    r.total_discharged_kwh += discharge;
    r.grid_cost_cents += grid_cost;
    r.discharge_purchase_cents += purchase;
    r.discharge_revenue_cents += purchase;
    // Each charging vehicle pays its share of the period's bill by energy drawn.
    if (charge > 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        const double in = energy[i] * schedule.x_c[i][t];
        if (in > 0.0) r.sessions[i].charge_cost_cents += (grid_cost + purchase) * (in / charge);
      }
    } else {
      r.unallocated_discharge_cents += purchase;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = scenario.sessions[i];
    auto& sr = r.sessions[i];
    sr.id = s.id;
    sr.degradation_cost_cents = session_degradation(scenario, schedule, i, model);
    sr.final_soc_kwh = schedule.soc[i][s.t_dep];
    r.degradation_cost_cents += sr.degradation_cost_cents;
  }
  r.charge_cost_cents = r.grid_cost_cents + r.discharge_purchase_cents;
  r.total_cost_cents = r.charge_cost_cents + r.degradation_cost_cents - r.discharge_revenue_cents;
  if (r.total_wind_kwh > 0.0)
    r.wind_utilization_pct = 100.0 * (r.total_wind_kwh - r.total_curtailment_kwh) / r.total_wind_kwh;
  return r;
}

double objective_value(const Scenario& scenario, const Schedule& schedule) {
  double value = 0.0;
  for (int t = 0; t < scenario.horizon(); ++t) {
    const double price = scenario.price_cents_per_kwh[t];
    value += price * schedule.g_kwh[t] + scenario.delta * price * schedule.omega_kwh[t];
  }
  double wear = 0.0;
  for (std::size_t i = 0; i < scenario.sessions.size(); ++i)
    wear += session_degradation(scenario, schedule, i, DegradationModel::Quadratic);
  return value + scenario.lambda * wear;
}

namespace {

using Json = nlohmann::ordered_json;

Json session_json(const SessionReport& s) {
  Json j;
  j["id"] = s.id;
  j["charged_kwh"] = s.charged_kwh;
  j["discharged_kwh"] = s.discharged_kwh;
  j["charge_cost_cents"] = s.charge_cost_cents;
  j["degradation_cost_cents"] = s.degradation_cost_cents;
  j["discharge_revenue_cents"] = s.discharge_revenue_cents;
  j["final_soc_kwh"] = s.final_soc_kwh;
  return j;
}

}  // namespace

std::string to_json(const Report& r) {
  Json j;
  j["label"] = r.label;
  j["seed"] = r.seed;
  j["degradation_model"] = r.degradation_model;
  j["total_wind_kwh"] = r.total_wind_kwh;
  j["total_grid_supply_kwh"] = r.total_grid_supply_kwh;
  j["total_curtailment_kwh"] = r.total_curtailment_kwh;
  j["total_discharged_kwh"] = r.total_discharged_kwh;
  j["wind_utilization_pct"] = r.wind_utilization_pct ? Json(*r.wind_utilization_pct) : Json(nullptr);
  j["grid_cost_cents"] = r.grid_cost_cents;
  j["discharge_purchase_cents"] = r.discharge_purchase_cents;
  j["charge_cost_cents"] = r.charge_cost_cents;
  j["degradation_cost_cents"] = r.degradation_cost_cents;
  j["discharge_revenue_cents"] = r.discharge_revenue_cents;
  j["total_cost_cents"] = r.total_cost_cents;
  j["unallocated_discharge_cents"] = r.unallocated_discharge_cents;
  Json sessions = Json::array();
  for (const auto& s : r.sessions) sessions.push_back(session_json(s));
  j["sessions"] = std::move(sessions);
  return j.dump(2) + "\n";
}

Report report_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Report r;
    r.label = j.value("label", "");
    r.seed = j.at("seed").get<std::uint64_t>();
    r.degradation_model = j.value("degradation_model", "quadratic");
    r.total_wind_kwh = j.at("total_wind_kwh").get<double>();
    r.total_grid_supply_kwh = j.at("total_grid_supply_kwh").get<double>();
    r.total_curtailment_kwh = j.at("total_curtailment_kwh").get<double>();
    r.total_discharged_kwh = j.value("total_discharged_kwh", 0.0);
    if (!j.at("wind_utilization_pct").is_null()) r.wind_utilization_pct = j.at("wind_utilization_pct").get<double>();
    r.grid_cost_cents = j.value("grid_cost_cents", 0.0);
    r.discharge_purchase_cents = j.value("discharge_purchase_cents", 0.0);
    r.charge_cost_cents = j.at("charge_cost_cents").get<double>();
    r.degradation_cost_cents = j.at("degradation_cost_cents").get<double>();
    r.discharge_revenue_cents = j.at("discharge_revenue_cents").get<double>();
    r.total_cost_cents = j.at("total_cost_cents").get<double>();
    r.unallocated_discharge_cents = j.value("unallocated_discharge_cents", 0.0);
    if (j.contains("sessions"))
      for (const auto& s : j.at("sessions")) {
        SessionReport sr;
        sr.id = s.at("id").get<int>();
        sr.charged_kwh = s.value("charged_kwh", 0.0);
        sr.discharged_kwh = s.value("discharged_kwh", 0.0);
        sr.charge_cost_cents = s.value("charge_cost_cents", 0.0);
        sr.degradation_cost_cents = s.value("degradation_cost_cents", 0.0);
        sr.discharge_revenue_cents = s.value("discharge_revenue_cents", 0.0);
        sr.final_soc_kwh = s.value("final_soc_kwh", 0.0);
        r.sessions.push_back(sr);
      }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(fmt::format("report JSON: {}", e.what()));
  }
}

namespace {

struct Metric {
  const char* name;
  double (*get)(const Report&);
};

const Metric kMetrics[] = {
    {"total_wind_kwh", [](const Report& r) { return r.total_wind_kwh; }},
    {"total_grid_supply_kwh", [](const Report& r) { return r.total_grid_supply_kwh; }},
    {"total_curtailment_kwh", [](const Report& r) { return r.total_curtailment_kwh; }},
    {"total_discharged_kwh", [](const Report& r) { return r.total_discharged_kwh; }},
    {"wind_utilization_pct",
     [](const Report& r) {
       return r.wind_utilization_pct ? *r.wind_utilization_pct : std::numeric_limits<double>::quiet_NaN();
     }},
    {"grid_cost_cents", [](const Report& r) { return r.grid_cost_cents; }},
    {"charge_cost_cents", [](const Report& r) { return r.charge_cost_cents; }},
    {"degradation_cost_cents", [](const Report& r) { return r.degradation_cost_cents; }},
    {"discharge_revenue_cents", [](const Report& r) { return r.discharge_revenue_cents; }},
    {"total_cost_cents", [](const Report& r) { return r.total_cost_cents; }},
};

std::string csv_number(double v) { return std::isnan(v) ? std::string() : fmt::format("{:.10g}", v); }

}  // namespace

std::string to_csv(const Report& r) {
  std::ostringstream out;
  out << "metric,value\n";
  for (const auto& m : kMetrics) out << m.name << ',' << csv_number(m.get(r)) << '\n';
  return out.str();
}

std::string sessions_csv(const Report& r) {
  std::ostringstream out;
  out << "session_id,charged_kwh,discharged_kwh,charge_cost_cents,degradation_cost_cents,"
         "discharge_revenue_cents,final_soc_kwh\n";
  for (const auto& s : r.sessions)
    out << fmt::format("{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g}\n", s.id, s.charged_kwh,
                       s.discharged_kwh, s.charge_cost_cents, s.degradation_cost_cents, s.discharge_revenue_cents,
                       s.final_soc_kwh);
  return out.str();
}

const ComparisonRow& Comparison::row(const std::string& metric) const {
  for (const auto& r : rows)
    if (r.metric == metric) return r;
  throw InvalidInput(fmt::format("no metric '{}' in comparison", metric));
}

Comparison compare(std::span<const Report> reports) {
  if (reports.size() < 2) throw InvalidInput("comparison needs at least two reports");
  for (const auto& r : reports)
    if (r.seed != reports.front().seed)
      throw InvalidInput(fmt::format("reports come from different scenarios (seed {} vs {})", reports.front().seed,
                                     r.seed));
  Comparison c;
  for (std::size_t k = 0; k < reports.size(); ++k)
    c.labels.push_back(reports[k].label.empty() ? fmt::format("report{}", k) : reports[k].label);
  for (const auto& m : kMetrics) {
    ComparisonRow row;
    row.metric = m.name;
    const double base = m.get(reports.front());
    for (const auto& r : reports) {
      const double v = m.get(r);
      row.values.push_back(v);
      row.deltas.push_back(v - base);
    }
    c.rows.push_back(std::move(row));
  }
  return c;
}

std::string to_csv(const Comparison& c) {
  std::ostringstream out;
  out << "metric";
  for (const auto& l : c.labels) out << ',' << l;
  for (std::size_t k = 1; k < c.labels.size(); ++k) out << ",delta_" << c.labels[k];
  out << '\n';
  for (const auto& row : c.rows) {
    out << row.metric;
    for (double v : row.values) out << ',' << csv_number(v);
    for (std::size_t k = 1; k < row.deltas.size(); ++k) out << ',' << csv_number(row.deltas[k]);
    out << '\n';
  }
  return out.str();
}

}  // namespace v2g
