#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "v2g/domain.hpp"
#include "v2g/miqp.hpp"
#include "v2g/model.hpp"
#include "v2g/simgen.hpp"

namespace v2g {

/// Whole file as text; IoError naming the path when it cannot be read.
std::string read_text_file(const std::filesystem::path& path);
/// Creates parent directories as needed; IoError on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Two-column trace `period,<value_column>` with periods 0, 1, 2, ...
std::vector<double> parse_series_csv(const std::string& text, const std::string& value_column,
                                     const std::string& source = "<memory>");
std::vector<double> read_series_csv(const std::filesystem::path& path, const std::string& value_column);
std::string series_to_csv(std::span<const double> values, const std::string& value_column);

/// Repeats every hourly value `periods_per_hour` times.
std::vector<double> expand_hourly(std::span<const double> hourly, int periods_per_hour);

std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const std::string& text);

/// `session_id,period,x_c,x_d,soc_kwh` rows over [t_arr, t_dep] (rates at
/// t_dep are zero) followed by `_grid,period,g_kwh,omega_kwh,` rows.
std::string schedule_to_csv(const Scenario& scenario, const Schedule& schedule);
/// Inverse of schedule_to_csv; SOC is recomputed from the rates.
Schedule schedule_from_csv(const Scenario& scenario, const std::string& text);

/// Everything a simulation run needs, as read from a JSON config file.
/// Relative paths are resolved against the config file's directory.
struct ExperimentConfig {
  std::optional<std::filesystem::path> scenario_file;  // ready-made scenario JSON
  ScenarioConfig generator;
  std::optional<std::filesystem::path> wind_csv;
  std::optional<std::filesystem::path> price_csv;
  bool price_hourly = false;
  std::optional<std::filesystem::path> arrival_pmfs;
  std::optional<std::filesystem::path> forecaster_file;
  int train_days = 15;

  double lambda = 1.0;
  double delta = 0.25;
  double p_g_max_kwh = 250.0;
  double discharge_price_factor = 0.9;
  DegradationParams degradation;
  bool future_demand = true;
  BuildOptions build;
  SolverConfig solver;
};

/// Parses a config document; `base_dir` anchors relative paths.
ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Scenario described by `config`: loaded or generated sessions, traces from
/// CSV or synthesized, and the config's weights. `seed` overrides the
/// generator seed.
Scenario build_scenario(const ExperimentConfig& config, std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace v2g
