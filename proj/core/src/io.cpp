#include "v2g/io.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unordered_map>

#include "v2g/error.hpp"

namespace v2g {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open file for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError(path.string(), "read failed");
  return buf.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError(path.parent_path().string(), "cannot create directory: " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open file for writing");
  out << text;
  out.flush();
  if (!out) throw IoError(path.string(), "write failed");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& cell, const std::string& source, int line) {
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    throw InvalidInput(fmt::format("{}:{}: '{}' is not a number", source, line, cell));
  return v;
}

int to_int(const std::string& cell, const std::string& source, int line) {
  int v = 0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    throw InvalidInput(fmt::format("{}:{}: '{}' is not an integer", source, line, cell));
  return v;
}

}  // namespace

std::vector<double> parse_series_csv(const std::string& text, const std::string& value_column,
                                     const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::vector<double> out;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (!header) {
      if (cells.size() != 2 || cells[0] != "period" || cells[1] != value_column)
        throw InvalidInput(fmt::format("{}:{}: expected header 'period,{}'", source, line_no, value_column));
      header = true;
      continue;
    }
    if (cells.size() != 2) throw InvalidInput(fmt::format("{}:{}: expected two columns", source, line_no));
    const int period = to_int(cells[0], source, line_no);
    if (period != static_cast<int>(out.size()))
      throw InvalidInput(fmt::format("{}:{}: period {} out of sequence (expected {})", source, line_no, period,
                                     out.size()));
    out.push_back(to_double(cells[1], source, line_no));
  }
  if (!header) throw InvalidInput(fmt::format("{}: empty trace file", source));
  return out;
}

std::vector<double> read_series_csv(const fs::path& path, const std::string& value_column) {
  return parse_series_csv(read_text_file(path), value_column, path.string());
}

std::string series_to_csv(std::span<const double> values, const std::string& value_column) {
  std::string out = "period," + value_column + "\n";
  for (std::size_t t = 0; t < values.size(); ++t) out += fmt::format("{},{}\n", t, values[t]);
  return out;
}

std::vector<double> expand_hourly(std::span<const double> hourly, int periods_per_hour) {
  if (periods_per_hour < 1) throw InvalidInput("periods per hour must be positive");
  std::vector<double> out;
  out.reserve(hourly.size() * periods_per_hour);
  for (double v : hourly)
    for (int k = 0; k < periods_per_hour; ++k) out.push_back(v);
  return out;
}

std::string scenario_to_json(const Scenario& s) {
  Json j;
  j["seed"] = s.seed;
  j["grid"] = {{"delta_t_minutes", s.grid.delta_t_minutes},
               {"periods_per_day", s.grid.periods_per_day},
               {"horizon_periods", s.grid.horizon_periods},
               {"planning_interval_minutes", s.grid.planning_interval_minutes}};
  j["lambda"] = s.lambda;
  j["delta"] = s.delta;
  j["p_g_max_kwh"] = s.p_g_max_kwh;
  j["discharge_price_factor"] = s.discharge_price_factor;
  j["degradation"] = {{"alpha", s.degradation.alpha},
                      {"beta", s.degradation.beta},
                      {"linear_rate_cents_per_kwh", s.degradation.linear_rate_cents_per_kwh},
                      {"reference_pack_cost_usd", s.degradation.reference_pack_cost_usd}};
  Json sessions = Json::array();
  for (const auto& e : s.sessions) {
    Json spec = {{"name", e.spec.name},
                 {"acceptance_rate_kw", e.spec.acceptance_rate_kw},
                 {"battery_capacity_kwh", e.spec.battery_capacity_kwh},
                 {"charger_power_kw", e.spec.charger_power_kw},
                 {"battery_cost_usd", e.spec.battery_cost_usd},
                 {"eta_c", e.spec.eta_c},
                 {"eta_d", e.spec.eta_d}};
    sessions.push_back({{"id", e.id},
                        {"spec", std::move(spec)},
                        {"t_arr", e.t_arr},
                        {"t_dep", e.t_dep},
                        {"soc_init_kwh", e.soc_init_kwh},
                        {"soc_desired_kwh", e.soc_desired_kwh},
                        {"soc_min_kwh", e.soc_min_kwh},
                        {"mode", to_string(e.mode)}});
  }
  j["sessions"] = std::move(sessions);
  j["wind_kwh"] = s.wind_kwh;
  j["price_cents_per_kwh"] = s.price_cents_per_kwh;
  return j.dump(1) + "\n";
}

Scenario scenario_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Scenario s;
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      s.grid.delta_t_minutes = g.value("delta_t_minutes", 15);
      s.grid.periods_per_day = g.value("periods_per_day", 96);
      s.grid.horizon_periods = g.at("horizon_periods").get<int>();
      s.grid.planning_interval_minutes = g.value("planning_interval_minutes", 60);
    }
    s.lambda = j.value("lambda", 1.0);
    s.delta = j.value("delta", 0.25);
    s.p_g_max_kwh = j.value("p_g_max_kwh", 250.0);
    s.discharge_price_factor = j.value("discharge_price_factor", 0.9);
    if (j.contains("degradation")) {
      const auto& d = j.at("degradation");
      s.degradation.alpha = d.value("alpha", 0.05);
      s.degradation.beta = d.value("beta", 0.1);
      s.degradation.linear_rate_cents_per_kwh = d.value("linear_rate_cents_per_kwh", 4.2);
      s.degradation.reference_pack_cost_usd = d.value("reference_pack_cost_usd", 5000.0);
    }
    for (const auto& e : j.at("sessions")) {
      EvSession x;
      x.id = e.at("id").get<int>();
      const auto& spec = e.at("spec");
      x.spec.name = spec.value("name", "");
      x.spec.acceptance_rate_kw = spec.at("acceptance_rate_kw").get<double>();
      x.spec.battery_capacity_kwh = spec.at("battery_capacity_kwh").get<double>();
      x.spec.charger_power_kw = spec.at("charger_power_kw").get<double>();
      x.spec.battery_cost_usd = spec.at("battery_cost_usd").get<double>();
      x.spec.eta_c = spec.value("eta_c", 0.9);
      x.spec.eta_d = spec.value("eta_d", 0.9);
      x.t_arr = e.at("t_arr").get<int>();
      x.t_dep = e.at("t_dep").get<int>();
      x.soc_init_kwh = e.at("soc_init_kwh").get<double>();
      x.soc_desired_kwh = e.at("soc_desired_kwh").get<double>();
      x.soc_min_kwh = e.at("soc_min_kwh").get<double>();
      x.mode = mode_from_string(e.value("mode", "G2V"));
      s.sessions.push_back(std::move(x));
    }
    if (j.contains("wind_kwh")) s.wind_kwh = j.at("wind_kwh").get<std::vector<double>>();
    if (j.contains("price_cents_per_kwh")) s.price_cents_per_kwh = j.at("price_cents_per_kwh").get<std::vector<double>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(fmt::format("scenario JSON: {}", e.what()));
  }
}

std::string schedule_to_csv(const Scenario& scenario, const Schedule& schedule) {
  std::string out = "session_id,period,x_c,x_d,soc_kwh\n";
  for (std::size_t i = 0; i < scenario.sessions.size(); ++i) {
    const auto& s = scenario.sessions[i];
    for (int t = s.t_arr; t <= s.t_dep; ++t) {
      const double xc = t < s.t_dep ? schedule.x_c[i][t] : 0.0;
      const double xd = t < s.t_dep ? schedule.x_d[i][t] : 0.0;
      out += fmt::format("{},{},{},{},{}\n", s.id, t, xc, xd, schedule.soc[i][t]);
    }
  }
  for (int t = 0; t < scenario.horizon(); ++t)
    out += fmt::format("_grid,{},{},{},\n", t, schedule.g_kwh[t], schedule.omega_kwh[t]);
  return out;
}

Schedule schedule_from_csv(const Scenario& scenario, const std::string& text) {
  Schedule out = Schedule::empty_for(scenario);
  std::unordered_map<int, std::size_t> by_id;
  for (std::size_t i = 0; i < scenario.sessions.size(); ++i) by_id[scenario.sessions[i].id] = i;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() < 4) throw InvalidInput(fmt::format("schedule CSV line {}: too few columns", line_no));
    const int t = to_int(cells[1], "schedule", line_no);
    if (t < 0 || t >= scenario.horizon() + 1) throw InvalidInput(fmt::format("schedule CSV line {}: bad period", line_no));
    if (cells[0] == "_grid") {
      if (t >= scenario.horizon()) continue;
      out.g_kwh[t] = to_double(cells[2], "schedule", line_no);
      out.omega_kwh[t] = to_double(cells[3], "schedule", line_no);
      continue;
    }
    const auto it = by_id.find(to_int(cells[0], "schedule", line_no));
    if (it == by_id.end()) throw InvalidInput(fmt::format("schedule CSV line {}: unknown session", line_no));
    if (t < scenario.horizon()) {
      out.x_c[it->second][t] = to_double(cells[2], "schedule", line_no);
      out.x_d[it->second][t] = to_double(cells[3], "schedule", line_no);
    }
  }
  recompute_soc(scenario, out);
  return out;
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const fs::path& base_dir) {
  ExperimentConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.contains("scenario")) c.scenario_file = resolve(base_dir, j.at("scenario").get<std::string>());
    if (j.contains("generator")) {
      const auto& g = j.at("generator");
      auto& gen = c.generator;
      read_opt(g, "n_vehicles", gen.n_vehicles);
      read_opt(g, "home_fraction", gen.home_fraction);
      read_opt(g, "r_v2g", gen.r_v2g);
      read_opt(g, "days", gen.days);
      read_opt(g, "seed", gen.seed);
      read_opt(g, "min_plug_periods", gen.min_plug_periods);
      read_opt(g, "max_plug_periods", gen.max_plug_periods);
      read_opt(g, "soc_init_min_frac", gen.soc_init_min_frac);
      read_opt(g, "soc_init_max_frac", gen.soc_init_max_frac);
      read_opt(g, "soc_desired_min_frac", gen.soc_desired_min_frac);
      read_opt(g, "soc_desired_max_frac", gen.soc_desired_max_frac);
      read_opt(g, "soc_min_kwh", gen.soc_min_kwh);
      read_opt(g, "eta", gen.eta);
    }
    if (j.contains("wind_csv")) c.wind_csv = resolve(base_dir, j.at("wind_csv").get<std::string>());
    if (j.contains("price_csv")) c.price_csv = resolve(base_dir, j.at("price_csv").get<std::string>());
    read_opt(j, "price_hourly", c.price_hourly);
    if (j.contains("arrival_pmfs")) c.arrival_pmfs = resolve(base_dir, j.at("arrival_pmfs").get<std::string>());
    if (j.contains("forecaster")) c.forecaster_file = resolve(base_dir, j.at("forecaster").get<std::string>());
    read_opt(j, "train_days", c.train_days);
    read_opt(j, "lambda", c.lambda);
    read_opt(j, "delta", c.delta);
    read_opt(j, "p_g_max_kwh", c.p_g_max_kwh);
    read_opt(j, "discharge_price_factor", c.discharge_price_factor);
    read_opt(j, "future_demand", c.future_demand);
    if (j.contains("degradation")) {
      const auto& d = j.at("degradation");
      read_opt(d, "alpha", c.degradation.alpha);
      read_opt(d, "beta", c.degradation.beta);
      read_opt(d, "linear_rate_cents_per_kwh", c.degradation.linear_rate_cents_per_kwh);
      read_opt(d, "reference_pack_cost_usd", c.degradation.reference_pack_cost_usd);
    }
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      read_opt(s, "relative_gap_tolerance", c.solver.relative_gap_tolerance);
      read_opt(s, "absolute_feasibility_tolerance", c.solver.absolute_feasibility_tolerance);
      read_opt(s, "node_limit", c.solver.node_limit);
      read_opt(s, "time_limit_seconds", c.solver.time_limit_seconds);
      read_opt(s, "qp_max_iterations", c.solver.qp_max_iterations);
      read_opt(s, "heuristic_period", c.solver.heuristic_period);
      if (s.contains("branching_rule")) {
        const auto rule = s.at("branching_rule").get<std::string>();
        if (rule == "most-fractional") c.solver.branching_rule = BranchingRule::MostFractional;
        else if (rule == "pseudo-cost") c.solver.branching_rule = BranchingRule::PseudoCost;
        else throw InvalidInput(fmt::format("unknown branching rule '{}'", rule));
      }
      read_opt(s, "merge_v2g_level_terms", c.build.merge_v2g_level_terms);
      read_opt(s, "balance_as_equality", c.build.balance_as_equality);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(fmt::format("config JSON: {}", e.what()));
  }
  if (c.train_days < 1) throw InvalidInput("train_days must be positive");
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  return parse_experiment_config(read_text_file(path), path.parent_path());
}

Scenario build_scenario(const ExperimentConfig& config, std::optional<std::uint64_t> seed) {
  ScenarioConfig gen = config.generator;
  if (seed) gen.seed = *seed;
  if (config.arrival_pmfs) load_arrival_pmfs(read_text_file(*config.arrival_pmfs), gen);

  Scenario s;
  if (config.scenario_file) {
    s = scenario_from_json(read_text_file(*config.scenario_file));
    if (seed) s.seed = *seed;
  } else {
    s = generate(gen);
  }
  const int per_hour = 60 / s.grid.delta_t_minutes;
  if (config.wind_csv) {
    s.wind_kwh = read_series_csv(*config.wind_csv, "kwh");
  } else if (s.wind_kwh.empty()) {
    s.wind_kwh = synthetic_wind(s.grid, default_turbine_kw(gen.n_vehicles), gen.seed);
  }
  if (config.price_csv) {
    s.price_cents_per_kwh = read_series_csv(*config.price_csv, "cents_per_kwh");
    if (config.price_hourly) s.price_cents_per_kwh = expand_hourly(s.price_cents_per_kwh, per_hour);
  } else if (s.price_cents_per_kwh.empty()) {
    s.price_cents_per_kwh = synthetic_price(s.grid, gen.seed);
  }
  const auto h = static_cast<std::size_t>(s.horizon());
  if (s.wind_kwh.size() < h || s.price_cents_per_kwh.size() < h)
    throw InvalidInput(fmt::format("wind/price traces cover {}/{} periods but the scenario needs {}",
                                   s.wind_kwh.size(), s.price_cents_per_kwh.size(), h));
  s.wind_kwh.resize(h);
  s.price_cents_per_kwh.resize(h);
  // The experiment's weights apply to loaded scenarios too.
  s.lambda = config.lambda;
  s.delta = config.delta;
  s.p_g_max_kwh = config.p_g_max_kwh;
  s.discharge_price_factor = config.discharge_price_factor;
  s.degradation = config.degradation;
  s.validate();
  return s;
}

}  // namespace v2g
