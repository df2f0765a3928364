// v2gsched: batch front end for fleet scheduling experiments.
//
// Exit codes: 0 success, 1 invalid input or flags, 2 solver failure, 3 I/O.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "v2g/baseline.hpp"
#include "v2g/error.hpp"
#include "v2g/forecast.hpp"
#include "v2g/io.hpp"
#include "v2g/log.hpp"
#include "v2g/metrics.hpp"
#include "v2g/miqp.hpp"
#include "v2g/model.hpp"
#include "v2g/rolling_horizon.hpp"
#include "v2g/simgen.hpp"

namespace fs = std::filesystem;
using namespace v2g;

namespace {

enum class RunMode { Bau, Static, Dynamic };

RunMode parse_mode(const std::string& s) {
  if (s == "bau") return RunMode::Bau;
  if (s == "static") return RunMode::Static;
  if (s == "dynamic") return RunMode::Dynamic;
  throw InvalidInput(fmt::format("unknown mode '{}'", s));
}

struct RunOutput {
  Schedule schedule;
  std::vector<std::string> diagnostics;  // JSON lines
};

RunOutput run_static(const Scenario& scenario, const SolverConfig& solver, const BuildOptions& build,
                     std::ostream* trace) {
  const MiqpProblem problem = build_static(scenario, build);
  SolverConfig cfg = solver;
  cfg.trace = trace;
  const Solution sol = optimize(problem, cfg);
  if (sol.status != SolveStatus::Optimal && sol.status != SolveStatus::GapLimit &&
      sol.status != SolveStatus::NodeLimit)
    throw SolverError(fmt::format("static model: {}", to_string(sol.status)));
  if (sol.x.size() != problem.num_vars())
    throw SolverError(fmt::format("static model: {} without a feasible point", to_string(sol.status)));
  RunOutput out;
  out.schedule = extract_static(scenario, problem, sol.x);
  nlohmann::ordered_json d;
  d["mode"] = "static";
  d["status"] = to_string(sol.status);
  d["objective"] = sol.objective;
  d["bound"] = sol.bound;
  d["gap"] = sol.gap;
  d["nodes"] = sol.nodes;
  const ModelStats st = stats(problem);
  d["variables"] = st.variables;
  d["binaries"] = st.binaries;
  d["constraints"] = st.constraints;
  out.diagnostics.push_back(d.dump());
  return out;
}

RunOutput run_dynamic(const Scenario& scenario, const PlannerConfig& planner, bool timings) {
  RunResult r = run(scenario, planner);
  RunOutput out;
  out.schedule = std::move(r.schedule);
  for (const auto& s : r.steps) out.diagnostics.push_back(to_json_line(s, timings));
  return out;
}

// Forecaster for Markov runs: an explicit file, else the training days of the
// configured wind CSV, else a synthetic history drawn with a different seed.
MarkovForecaster make_forecaster(const ExperimentConfig& config, const Scenario& scenario,
                                 std::uint64_t seed) {
  if (config.forecaster_file) return MarkovForecaster::from_json(read_text_file(*config.forecaster_file));
  const int pps = scenario.grid.periods_per_step();
  if (config.wind_csv) {
    const auto trace = read_series_csv(*config.wind_csv, "kwh");
    return MarkovForecaster::fit_periods(training_split(trace, scenario.grid.periods_per_day, config.train_days),
                                         pps);
  }
  const TimeGrid history = TimeGrid::with_horizon(config.train_days * scenario.grid.periods_per_day);
  const auto trace = synthetic_wind(history, default_turbine_kw(config.generator.n_vehicles),
                                    seed + 0x9E3779B97F4A7C15ULL);
  return MarkovForecaster::fit_periods(trace, pps);
}

int days_covered(const Scenario& s) { return std::max(1, s.horizon() / s.grid.periods_per_day); }

// Future-demand statistics come from a separate history: an independent draw
// of the same generator, or the scenario itself when it was loaded from file.
std::optional<FutureDemandModel> history_model(const ExperimentConfig& config, const Scenario& scenario,
                                               std::uint64_t seed) {
  if (!config.scenario_file) {
    ScenarioConfig gen = config.generator;
    gen.seed = seed + 0x9E3779B97F4A7C15ULL;
    if (config.arrival_pmfs) load_arrival_pmfs(read_text_file(*config.arrival_pmfs), gen);
    const Scenario history = generate(gen);
    if (history.sessions.empty()) return std::nullopt;
    return fit_future_demand_model(history.sessions, history.grid, gen.days);
  }
  if (scenario.sessions.empty()) return std::nullopt;
  return fit_future_demand_model(scenario.sessions, scenario.grid, days_covered(scenario));
}

struct SimulateJob {
  ExperimentConfig config;
  std::uint64_t seed = 1;
  RunMode mode = RunMode::Static;
  bool markov = false;
  DegradationModel degradation = DegradationModel::Quadratic;
  fs::path out_dir;
  bool timings = false;
  std::string label;
};

Report simulate_one(const SimulateJob& job) {
  const Scenario scenario = build_scenario(job.config, job.seed);
  RunOutput out;
  switch (job.mode) {
    case RunMode::Bau:
      out.schedule = bau_schedule(scenario);
      out.diagnostics.push_back(R"({"mode":"bau"})");
      break;
    case RunMode::Static:
      out = run_static(scenario, job.config.solver, job.config.build, nullptr);
      break;
    case RunMode::Dynamic: {
      PlannerConfig planner;
      planner.solver = job.config.solver;
      planner.build = job.config.build;
      std::optional<MarkovForecaster> forecaster;
      if (job.markov) {
        forecaster = make_forecaster(job.config, scenario, job.seed);
        planner.forecaster = &*forecaster;
      }
      if (job.config.future_demand) planner.future_demand = history_model(job.config, scenario, job.seed);
      out = run_dynamic(scenario, planner, job.timings);
      break;
    }
  }
  const auto violations = validate_schedule(scenario, out.schedule);
  for (const auto& v : violations) log::warn(fmt::format("{}: {}", job.label, describe(v)));
  Report rep = report(scenario, out.schedule, job.degradation, job.label);

  std::string diag;
  for (const auto& line : out.diagnostics) diag += line + "\n";
  write_text_file(job.out_dir / "schedule.csv", schedule_to_csv(scenario, out.schedule));
  write_text_file(job.out_dir / "report.json", to_json(rep));
  write_text_file(job.out_dir / "report.csv", to_csv(rep));
  write_text_file(job.out_dir / "diagnostics.jsonl", diag);
  if (!violations.empty())
    throw SolverError(fmt::format("{}: schedule has {} constraint violations (first: {})", job.label,
                                  violations.size(), describe(violations.front())));
  return rep;
}

struct Sweep {
  std::string key;
  std::vector<double> values;
};

Sweep parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw InvalidInput("--sweep expects key=v1,v2,...");
  Sweep s;
  s.key = text.substr(0, eq);
  if (s.key != "delta" && s.key != "lambda" && s.key != "r_v2g")
    throw InvalidInput(fmt::format("cannot sweep '{}' (use delta, lambda or r_v2g)", s.key));
  std::stringstream ss(text.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      s.values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidInput(fmt::format("sweep value '{}' is not a number", item));
    }
  }
  if (s.values.empty()) throw InvalidInput("--sweep needs at least one value");
  return s;
}

void apply_sweep(ExperimentConfig& c, const std::string& key, double v) {
  if (key == "delta") c.delta = v;
  else if (key == "lambda") c.lambda = v;
  else c.generator.r_v2g = v;
}

// Runs jobs on up to `jobs` threads; the first failure is rethrown after all
// workers stop.
std::vector<Report> run_jobs(const std::vector<SimulateJob>& work, int jobs) {
  std::vector<Report> reports(work.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= work.size()) return;
      try {
        reports[k] = simulate_one(work[k]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = work.size();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(work.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return reports;
}

Scenario scenario_from_flags(const std::string& scenario_path, const std::string& config_path,
                             std::optional<std::uint64_t> seed, ExperimentConfig* config_out) {
  ExperimentConfig config;
  if (!config_path.empty()) config = load_experiment_config(config_path);
  if (!scenario_path.empty()) config.scenario_file = fs::path(scenario_path);
  if (config_out) *config_out = config;
  if (!config.scenario_file && config_path.empty())
    throw InvalidInput("either --scenario or --config is required");
  if (config.scenario_file && config_path.empty()) {
    Scenario s = scenario_from_json(read_text_file(*config.scenario_file));
    const int per_day = static_cast<int>(s.sessions.size()) / days_covered(s);
    if (s.wind_kwh.empty()) s.wind_kwh = synthetic_wind(s.grid, default_turbine_kw(per_day), s.seed);
    if (s.price_cents_per_kwh.empty()) s.price_cents_per_kwh = synthetic_price(s.grid, s.seed);
    s.validate();
    return s;
  }
  return build_scenario(config, seed);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return 3;
  if (dynamic_cast<const SolverError*>(&e) || dynamic_cast<const InfeasibleModel*>(&e)) return 2;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  log::init_from_env();
  CLI::App app{"v2gsched: charge/discharge scheduling for EV fleets in a wind microgrid"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run one scenario (or a sweep) and write schedule, report, diagnostics");
  std::string sim_config, sim_mode = "dynamic", sim_forecast = "perfect", sim_out, sim_sweep, sim_degr = "quadratic";
  std::uint64_t sim_seed = 1;
  int sim_jobs = 1;
  bool sim_timings = false;
  sim->add_option("--config", sim_config, "Experiment config JSON")->required();
  sim->add_option("--mode", sim_mode, "bau | static | dynamic")->check(CLI::IsMember({"bau", "static", "dynamic"}));
  sim->add_option("--forecast", sim_forecast, "perfect | markov (dynamic mode)")
      ->check(CLI::IsMember({"perfect", "markov"}));
  sim->add_option("--seed", sim_seed, "Scenario seed");
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--sweep", sim_sweep, "key=v1,v2,... over delta, lambda or r_v2g");
  sim->add_option("--jobs", sim_jobs, "Parallel scenario runs (sweeps only)")->check(CLI::PositiveNumber);
  sim->add_option("--degradation", sim_degr, "quadratic | linear | linear-throughput for reporting")
      ->check(CLI::IsMember({"quadratic", "linear", "linear-throughput"}));
  sim->add_flag("--timings", sim_timings, "Record solve times in diagnostics (breaks byte-identical reruns)");

  // solve-static
  auto* ss = app.add_subcommand("solve-static", "Solve the day-ahead model for one scenario");
  std::string ss_scenario, ss_config, ss_out, ss_dump, ss_trace;
  std::optional<std::uint64_t> ss_seed;
  ss->add_option("--scenario", ss_scenario, "Scenario JSON (with traces)");
  ss->add_option("--config", ss_config, "Experiment config JSON");
  ss->add_option("--seed", ss_seed, "Generator seed when using --config");
  ss->add_option("--out", ss_out, "Output directory")->required();
  ss->add_option("--dump-model", ss_dump, "Write the model in sparse text form");
  ss->add_option("--trace", ss_trace, "Write the branch-and-bound node trace");

  // solve-dynamic
  auto* sd = app.add_subcommand("solve-dynamic", "Run the rolling-horizon planner for one scenario");
  std::string sd_scenario, sd_config, sd_out, sd_forecaster;
  std::optional<std::uint64_t> sd_seed;
  bool sd_no_future = false, sd_timings = false;
  sd->add_option("--scenario", sd_scenario, "Scenario JSON (with traces)");
  sd->add_option("--config", sd_config, "Experiment config JSON");
  sd->add_option("--seed", sd_seed, "Generator seed when using --config");
  sd->add_option("--forecaster", sd_forecaster, "Markov forecaster JSON (default: perfect forecast)");
  sd->add_flag("--no-future-demand", sd_no_future, "Leave expected future arrivals out of each window");
  sd->add_flag("--timings", sd_timings, "Record solve times in diagnostics");
  sd->add_option("--out", sd_out, "Output directory")->required();

  // train-forecast
  auto* tf = app.add_subcommand("train-forecast", "Fit a Markov wind forecaster to a wind CSV");
  std::string tf_wind, tf_out;
  int tf_train_days = 15, tf_month_days = 30, tf_states = MarkovForecaster::kDefaultStates, tf_pps = 4,
      tf_ppd = 96;
  tf->add_option("--wind", tf_wind, "Wind CSV (period,kwh)")->required();
  tf->add_option("--out", tf_out, "Forecaster JSON to write")->required();
  tf->add_option("--train-days", tf_train_days, "Training days at the start of each month")->check(CLI::PositiveNumber);
  tf->add_option("--month-days", tf_month_days, "Month length in days for the split")->check(CLI::PositiveNumber);
  tf->add_option("--states", tf_states, "Number of wind levels")->check(CLI::PositiveNumber);
  tf->add_option("--periods-per-step", tf_pps, "Periods per chain step")->check(CLI::PositiveNumber);
  tf->add_option("--periods-per-day", tf_ppd, "Periods per day")->check(CLI::PositiveNumber);

  // compare
  auto* cmp = app.add_subcommand("compare", "Tabulate metric deltas between reports of one scenario");
  std::vector<std::string> cmp_reports;
  std::string cmp_out;
  cmp->add_option("reports", cmp_reports, "report.json files (first is the reference)")->required()->expected(2, -1);
  cmp->add_option("--out", cmp_out, "CSV file to write (default: stdout)");

  // generate
  auto* gen = app.add_subcommand("generate", "Draw a random fleet scenario");
  ScenarioConfig gen_cfg;
  std::string gen_out, gen_pmfs;
  bool gen_traces = false;
  gen->add_option("--seed", gen_cfg.seed, "Seed");
  gen->add_option("--vehicles", gen_cfg.n_vehicles, "Sessions per day")->check(CLI::NonNegativeNumber);
  gen->add_option("--days", gen_cfg.days, "Days")->check(CLI::PositiveNumber);
  gen->add_option("--r-v2g", gen_cfg.r_v2g, "Share of V2G sessions")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--home-fraction", gen_cfg.home_fraction, "Share of home charging")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--arrival-pmfs", gen_pmfs, "Arrival PMF JSON");
  gen->add_flag("--traces", gen_traces, "Attach synthetic wind and price traces");
  gen->add_option("--out", gen_out, "Scenario JSON to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*sim) {
      const ExperimentConfig base = load_experiment_config(sim_config);
      const RunMode mode = parse_mode(sim_mode);
      std::vector<SimulateJob> work;
      auto make_job = [&](ExperimentConfig cfg, fs::path dir, std::string label) {
        SimulateJob job;
        job.config = std::move(cfg);
        job.seed = sim_seed;
        job.mode = mode;
        job.markov = sim_forecast == "markov";
        job.degradation = degradation_model_from_string(sim_degr.c_str());
        job.out_dir = std::move(dir);
        job.timings = sim_timings;
        job.label = std::move(label);
        return job;
      };
      std::optional<Sweep> sweep;
      if (!sim_sweep.empty()) sweep = parse_sweep(sim_sweep);
      if (sweep) {
        for (double v : sweep->values) {
          ExperimentConfig cfg = base;
          apply_sweep(cfg, sweep->key, v);
          const std::string name = fmt::format("{}={}", sweep->key, v);
          work.push_back(make_job(cfg, fs::path(sim_out) / name, fmt::format("{}-{}", sim_mode, name)));
        }
      } else {
        work.push_back(make_job(base, sim_out, sim_mode));
      }
      const auto reports = run_jobs(work, sim_jobs);
      if (sweep) {
        std::string csv = fmt::format("{},wind_utilization_pct,total_grid_supply_kwh,total_curtailment_kwh,"
                                      "charge_cost_cents,degradation_cost_cents,discharge_revenue_cents,"
                                      "total_cost_cents\n",
                                      sweep->key);
        for (std::size_t k = 0; k < reports.size(); ++k) {
          const Report& r = reports[k];
          csv += fmt::format("{},{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g}\n", sweep->values[k],
                             r.wind_utilization_pct ? fmt::format("{:.10g}", *r.wind_utilization_pct) : "",
                             r.total_grid_supply_kwh, r.total_curtailment_kwh, r.charge_cost_cents,
                             r.degradation_cost_cents, r.discharge_revenue_cents, r.total_cost_cents);
        }
        write_text_file(fs::path(sim_out) / "sweep.csv", csv);
      }
      return 0;
    }

    if (*ss) {
      const Scenario scenario = scenario_from_flags(ss_scenario, ss_config, ss_seed, nullptr);
      ExperimentConfig cfg;
      if (!ss_config.empty()) cfg = load_experiment_config(ss_config);
      if (!ss_dump.empty()) {
        std::ostringstream dump;
        write_problem_text(build_static(scenario, cfg.build), dump);
        write_text_file(ss_dump, dump.str());
      }
      std::ofstream trace_file;
      if (!ss_trace.empty()) {
        trace_file.open(ss_trace);
        if (!trace_file) throw IoError(ss_trace, "cannot open file for writing");
      }
      RunOutput out = run_static(scenario, cfg.solver, cfg.build, ss_trace.empty() ? nullptr : &trace_file);
      const Report rep = report(scenario, out.schedule, DegradationModel::Quadratic, "static");
      std::string diag;
      for (const auto& l : out.diagnostics) diag += l + "\n";
      write_text_file(fs::path(ss_out) / "schedule.csv", schedule_to_csv(scenario, out.schedule));
      write_text_file(fs::path(ss_out) / "report.json", to_json(rep));
      write_text_file(fs::path(ss_out) / "diagnostics.jsonl", diag);
      return 0;
    }

    if (*sd) {
      ExperimentConfig cfg;
      const Scenario scenario = scenario_from_flags(sd_scenario, sd_config, sd_seed, &cfg);
      PlannerConfig planner;
      planner.solver = cfg.solver;
      planner.build = cfg.build;
      std::optional<MarkovForecaster> forecaster;
      if (!sd_forecaster.empty()) {
        forecaster = MarkovForecaster::from_json(read_text_file(sd_forecaster));
        planner.forecaster = &*forecaster;
      }
      if (!sd_no_future) planner.future_demand = history_model(cfg, scenario, sd_seed.value_or(cfg.generator.seed));
      RunOutput out = run_dynamic(scenario, planner, sd_timings);
      const Report rep = report(scenario, out.schedule, DegradationModel::Quadratic, "dynamic");
      std::string diag;
      for (const auto& l : out.diagnostics) diag += l + "\n";
      write_text_file(fs::path(sd_out) / "schedule.csv", schedule_to_csv(scenario, out.schedule));
      write_text_file(fs::path(sd_out) / "report.json", to_json(rep));
      write_text_file(fs::path(sd_out) / "diagnostics.jsonl", diag);
      return 0;
    }

    if (*tf) {
      const auto trace = read_series_csv(tf_wind, "kwh");
      const auto train = training_split(trace, tf_ppd, tf_train_days, tf_month_days);
      const auto f = MarkovForecaster::fit_periods(train, tf_pps, tf_states);
      write_text_file(tf_out, f.to_json() + "\n");
      return 0;
    }

    if (*cmp) {
      std::vector<Report> reports;
      for (const auto& p : cmp_reports) {
        Report r = report_from_json(read_text_file(p));
        if (r.label.empty()) r.label = fs::path(p).parent_path().filename().string();
        reports.push_back(std::move(r));
      }
      const std::string csv = to_csv(compare(reports));
      if (cmp_out.empty()) std::cout << csv;
      else write_text_file(cmp_out, csv);
      return 0;
    }

    if (*gen) {
      if (!gen_pmfs.empty()) load_arrival_pmfs(read_text_file(gen_pmfs), gen_cfg);
      Scenario s = gen_traces ? generate_with_traces(gen_cfg) : generate(gen_cfg);
      write_text_file(gen_out, scenario_to_json(s));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "v2gsched: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
