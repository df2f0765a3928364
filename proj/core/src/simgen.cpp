#include "v2g/simgen.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numbers>
#include <numeric>
#include <random>

#include "v2g/error.hpp"

namespace v2g {

namespace {

// Draws built directly on the engine output so that a seed gives the same
// scenario on every standard library.
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) {  // inclusive
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  int pick(const HourlyPmf& pmf) {
    const double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
    double u = uniform() * total;
    for (int h = 0; h < 24; ++h) {
      if (u < pmf[h]) return h;
      u -= pmf[h];
    }
    for (int h = 23; h >= 0; --h)
      if (pmf[h] > 0.0) return h;
    return 0;
  }

 private:
  std::mt19937_64 engine_;
};

HourlyPmf normalized(HourlyPmf p) {
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= total;
  return p;
}

void check_pmf(const HourlyPmf& p, const char* name) {
  for (double v : p)
    if (!(v >= 0.0)) throw InvalidInput(fmt::format("{} arrival PMF has a negative entry", name));
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6) throw InvalidInput(fmt::format("{} arrival PMF sums to {}", name, total));
}

}  // namespace

std::vector<EvSpec> ev_catalog() {
  return {
      {"BMW i3 2017", 7.4, 32.0, 7.7, 4640.0, 0.9, 0.9},
      {"Ford Focus EV", 6.6, 23.0, 7.7, 3500.0, 0.9, 0.9},
      {"Ford Focus EV 2017", 6.6, 33.5, 7.7, 4850.0, 0.9, 0.9},
      {"Nissan Leaf S 2016", 6.6, 24.0, 7.7, 3500.0, 0.9, 0.9},
      {"Nissan Leaf 2017", 6.6, 30.0, 7.7, 4350.0, 0.9, 0.9},
      {"VW e-Golf 2017", 7.2, 35.8, 7.7, 5200.0, 0.9, 0.9},
      {"Chevy Bolt", 7.2, 60.0, 7.7, 8700.0, 0.9, 0.9},
      {"Tesla Model S 70 Single", 9.6, 70.0, 11.5, 10150.0, 0.9, 0.9},
      {"Tesla Model X 75 Dual", 17.2, 75.0, 15.4, 10900.0, 0.9, 0.9},
      {"Tesla Model S 90 Dual", 19.2, 90.0, 15.4, 13000.0, 0.9, 0.9},
  };
}

HourlyPmf default_home_pmf() {
  return normalized({0.010, 0.006, 0.004, 0.003, 0.003, 0.006, 0.012, 0.020, 0.025, 0.030, 0.035, 0.040,
                     0.045, 0.048, 0.055, 0.070, 0.090, 0.105, 0.100, 0.085, 0.070, 0.055, 0.045, 0.068});
}

HourlyPmf default_work_pmf() {
  return normalized({0.004, 0.003, 0.003, 0.005, 0.010, 0.030, 0.090, 0.180, 0.200, 0.130, 0.070, 0.045,
                     0.050, 0.045, 0.035, 0.025, 0.020, 0.015, 0.010, 0.008, 0.007, 0.005, 0.004, 0.004});
}

void ScenarioConfig::validate() const {
  if (n_vehicles < 0) throw InvalidInput("n_vehicles must be non-negative");
  if (days < 1) throw InvalidInput("days must be at least 1");
  auto frac = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput(fmt::format("{} must lie in [0, 1]", name));
  };
  frac(home_fraction, "home_fraction");
  frac(r_v2g, "r_v2g");
  frac(soc_init_min_frac, "soc_init_min_frac");
  frac(soc_init_max_frac, "soc_init_max_frac");
  frac(soc_desired_min_frac, "soc_desired_min_frac");
  frac(soc_desired_max_frac, "soc_desired_max_frac");
  if (soc_init_min_frac > soc_init_max_frac || soc_desired_min_frac > soc_desired_max_frac)
    throw InvalidInput("SOC fraction ranges are reversed");
  if (min_plug_periods < 1 || max_plug_periods < min_plug_periods)
    throw InvalidInput("plug duration range is invalid");
  if (soc_min_kwh < 0.0) throw InvalidInput("soc_min_kwh must be non-negative");
  if (!(eta > 0.0 && eta <= 1.0)) throw InvalidInput("eta must lie in (0, 1]");
  check_pmf(arrival_pmf_home, "home");
  check_pmf(arrival_pmf_work, "work");
}

Scenario generate(const ScenarioConfig& config) {
  config.validate();
  const auto catalog = ev_catalog();
  Draw draw(config.seed);
  TimeGrid grid;
  const int per_hour = grid.periods_per_day / 24;
  const int homes = static_cast<int>(std::lround(config.home_fraction * config.n_vehicles));

  std::vector<EvSession> sessions;
  sessions.reserve(static_cast<std::size_t>(config.n_vehicles) * config.days);
  for (int day = 0; day < config.days; ++day) {
    for (int v = 0; v < config.n_vehicles; ++v) {
      EvSession s;
      s.spec = catalog[draw.integer(0, static_cast<int>(catalog.size()) - 1)];
      s.spec.eta_c = s.spec.eta_d = config.eta;
      const int hour = draw.pick(v < homes ? config.arrival_pmf_home : config.arrival_pmf_work);
      const int quarter = draw.integer(0, per_hour - 1);
      s.t_arr = day * grid.periods_per_day + hour * per_hour + quarter;
      s.t_dep = s.t_arr + draw.integer(config.min_plug_periods, config.max_plug_periods);
      const double cap = s.spec.battery_capacity_kwh;
      s.soc_init_kwh = cap * draw.uniform(config.soc_init_min_frac, config.soc_init_max_frac);
      s.soc_desired_kwh = cap * draw.uniform(config.soc_desired_min_frac, config.soc_desired_max_frac);
      s.soc_min_kwh = std::min(config.soc_min_kwh, cap);
      s.mode = draw.uniform() < config.r_v2g ? Mode::V2G : Mode::G2V;
      sessions.push_back(std::move(s));
    }
  }
  std::stable_sort(sessions.begin(), sessions.end(),
                   [](const EvSession& a, const EvSession& b) { return a.t_arr < b.t_arr; });
  int horizon = config.days * grid.periods_per_day;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    sessions[i].id = static_cast<int>(i);
    horizon = std::max(horizon, sessions[i].t_dep);
  }

  Scenario scenario;
  scenario.grid = TimeGrid::with_horizon(horizon);
  scenario.sessions = std::move(sessions);
  scenario.seed = config.seed;
  return scenario;
}

double default_turbine_kw(int n_vehicles) { return 2.3 * n_vehicles; }

std::vector<double> synthetic_wind(const TimeGrid& grid, double turbine_kw, std::uint64_t seed) {
  Draw draw(seed ^ 0x57494e44ULL);
  const int per_hour = 60 / grid.delta_t_minutes;
  const int hours = (grid.horizon_periods + per_hour - 1) / per_hour;
  std::vector<double> hourly(hours);
  double noise = 0.0;
  double day_factor = 1.0;
  for (int h = 0; h < hours; ++h) {
    if (h % 24 == 0) day_factor = draw.uniform(0.3, 1.4);  // calm and windy days alternate
    noise = 0.85 * noise + 0.18 * draw.normal();
    const double diurnal = 0.35 + 0.2 * std::cos(2.0 * std::numbers::pi * ((h % 24) - 3) / 24.0);
    hourly[h] = std::clamp(day_factor * diurnal + noise, 0.0, 1.0) * turbine_kw;
  }
  std::vector<double> out(grid.horizon_periods);
  for (int t = 0; t < grid.horizon_periods; ++t) out[t] = hourly[t / per_hour] * grid.hours_per_period();
  return out;
}

std::vector<double> synthetic_price(const TimeGrid& grid, std::uint64_t seed) {
  Draw draw(seed ^ 0x50524943ULL);
  const int per_hour = 60 / grid.delta_t_minutes;
  const int hours = (grid.horizon_periods + per_hour - 1) / per_hour;
  std::vector<double> hourly(hours);
  double level = 1.0;
  for (int h = 0; h < hours; ++h) {
    if (h % 24 == 0) level = draw.uniform(0.8, 1.25);
    const int hod = h % 24;
    const double morning = 1.2 * std::exp(-0.5 * std::pow((hod - 8.0) / 1.5, 2));
    const double evening = 2.5 * std::exp(-0.5 * std::pow((hod - 19.0) / 2.0, 2));
    const double night = hod < 5 ? -0.6 : 0.0;
    hourly[h] = std::max(0.5, level * (3.0 + morning + evening + night) + 0.15 * draw.normal());
  }
  std::vector<double> out(grid.horizon_periods);
  for (int t = 0; t < grid.horizon_periods; ++t) out[t] = hourly[t / per_hour];
  return out;
}

Scenario generate_with_traces(const ScenarioConfig& config) {
  Scenario s = generate(config);
  s.wind_kwh = synthetic_wind(s.grid, default_turbine_kw(config.n_vehicles), config.seed);
  s.price_cents_per_kwh = synthetic_price(s.grid, config.seed);
  return s;
}

FutureDemandModel fit_future_demand_model(std::span<const EvSession> history, const TimeGrid& grid, int days) {
  if (history.empty()) throw InvalidInput("future-demand model needs a non-empty history");
  const int ppd = grid.periods_per_day;
  FutureDemandModel m;
  m.arrival_rate.assign(ppd, 0.0);
  int latest = 0;
  double need = 0.0, plug = 0.0;
  for (const auto& s : history) {
    need += s.soc_desired_kwh - s.soc_init_kwh;
    plug += s.plug_length();
    latest = std::max(latest, s.t_arr);
    m.arrival_rate[((s.t_arr % ppd) + ppd) % ppd] += 1.0;
  }
  const double n = static_cast<double>(history.size());
  m.expected_required_charge = std::max(0.0, need / n);
  m.expected_plug_periods = plug / n;
  if (days <= 0) days = latest / ppd + 1;
  for (double& r : m.arrival_rate) r /= days;
  return m;
}

void load_arrival_pmfs(const std::string& json_text, ScenarioConfig& config) {
  try {
    const auto j = nlohmann::json::parse(json_text);
    auto read = [&](const char* key, HourlyPmf& out) {
      if (!j.contains(key)) return;
      const auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != 24) throw InvalidInput(fmt::format("arrival PMF '{}' needs 24 entries", key));
      HourlyPmf p{};
      std::copy(v.begin(), v.end(), p.begin());
      check_pmf(p, key);
      out = p;
    };
    read("home", config.arrival_pmf_home);
    read("work", config.arrival_pmf_work);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(fmt::format("arrival PMF JSON: {}", e.what()));
  }
}

}  // namespace v2g
