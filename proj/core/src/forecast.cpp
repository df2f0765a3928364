#include "v2g/forecast.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "v2g/error.hpp"

namespace v2g {

MarkovForecaster::MarkovForecaster(std::vector<double> states, Eigen::MatrixXd transition)
    : states_(std::move(states)), transition_(std::move(transition)) {
  const int n = num_states();
  if (n == 0) throw InvalidInput("forecaster needs at least one state");
  if (transition_.rows() != n || transition_.cols() != n)
    throw InvalidInput(fmt::format("transition matrix must be {0}x{0}", n));
  for (int a = 1; a < n; ++a)
    if (!(states_[a] > states_[a - 1])) throw InvalidInput("state representatives must increase strictly");
  for (int a = 0; a < n; ++a) {
    if ((transition_.row(a).array() < 0.0).any()) throw InvalidInput("negative transition probability");
    if (std::abs(transition_.row(a).sum() - 1.0) > 1e-9)
      throw InvalidInput(fmt::format("transition row {} does not sum to 1", a));
  }
  width_ = n > 1 ? states_[1] - states_[0] : 2.0 * states_[0];
  if (!(width_ > 0.0)) width_ = 1.0;
}

int MarkovForecaster::state_of(double wind) const {
  if (!(wind >= 0.0)) wind = 0.0;
  const double lower_edge = states_.front() - 0.5 * width_;
  const int s = static_cast<int>(std::floor((wind - lower_edge) / width_));
  return std::clamp(s, 0, num_states() - 1);
}

MarkovForecaster MarkovForecaster::fit(std::span<const double> trace, int num_states) {
  if (trace.empty()) throw InvalidInput("cannot fit a forecaster to an empty trace");
  if (trace.size() < 2) throw InvalidInput("forecaster training needs at least two steps");
  if (num_states < 1) throw InvalidInput("forecaster needs at least one state");
  for (double w : trace)
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInput("wind trace must be finite and non-negative");
  const double top = *std::max_element(trace.begin(), trace.end());
  // An all-zero trace still needs a usable grid of levels.
  const double width = top > 0.0 ? top / num_states : 1.0;
  std::vector<double> reps(num_states);
  for (int a = 0; a < num_states; ++a) reps[a] = (a + 0.5) * width;

  auto bin = [&](double w) { return std::clamp(static_cast<int>(std::floor(w / width)), 0, num_states - 1); };
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(num_states, num_states);
  for (std::size_t t = 0; t + 1 < trace.size(); ++t) counts(bin(trace[t]), bin(trace[t + 1])) += 1.0;
  for (int a = 0; a < num_states; ++a) {
    const double total = counts.row(a).sum();
    if (total > 0.0) counts.row(a) /= total;
    else counts(a, a) = 1.0;
  }
  return MarkovForecaster(std::move(reps), std::move(counts));
}

MarkovForecaster MarkovForecaster::fit_periods(std::span<const double> per_period, int periods_per_step,
                                               int num_states) {
  if (periods_per_step < 1) throw InvalidInput("periods_per_step must be positive");
  std::vector<double> steps;
  for (std::size_t i = 0; i + periods_per_step <= per_period.size(); i += periods_per_step) {
    double sum = 0.0;
    for (int k = 0; k < periods_per_step; ++k) sum += per_period[i + k];
    steps.push_back(sum / periods_per_step);
  }
  if (steps.empty()) throw InvalidInput("cannot fit a forecaster to an empty trace");
  return fit(steps, num_states);
}

Eigen::MatrixXd MarkovForecaster::power(int k) const {
  if (k < 0) throw InvalidInput("forecast step must be non-negative");
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(num_states(), num_states());
  for (int i = 0; i < k; ++i) out = out * transition_;
  return out;
}

double MarkovForecaster::forecast(double current_wind, int k) const {
  if (k < 0) throw InvalidInput("forecast step must be non-negative");
  if (k == 0) return current_wind;
  Eigen::RowVectorXd dist = Eigen::RowVectorXd::Zero(num_states());
  dist[state_of(current_wind)] = 1.0;
  for (int i = 0; i < k; ++i) dist = dist * transition_;
  const Eigen::Map<const Eigen::VectorXd> reps(states_.data(), num_states());
  return dist.dot(reps);
}

std::vector<double> MarkovForecaster::window(std::span<const double> actual, int start, int length,
                                             int periods_per_step) const {
  if (periods_per_step < 1) throw InvalidInput("periods_per_step must be positive");
  if (start < 0 || length < 0) throw InvalidInput("invalid forecast window");
  std::vector<double> out(length, 0.0);
  const int first_end = std::min(length, periods_per_step);
  double current = 0.0;
  int seen = 0;
  for (int k = 0; k < first_end; ++k) {
    const int t = start + k;
    if (t >= static_cast<int>(actual.size())) throw InvalidInput("wind trace shorter than the forecast window");
    out[k] = actual[t];
    current += actual[t];
    ++seen;
  }
  if (seen > 0) current /= seen;
  if (length <= periods_per_step) return out;

  Eigen::RowVectorXd dist = Eigen::RowVectorXd::Zero(num_states());
  dist[state_of(current)] = 1.0;
  const Eigen::Map<const Eigen::VectorXd> reps(states_.data(), num_states());
  for (int step = 1; step * periods_per_step < length; ++step) {
    dist = dist * transition_;
    const double expected = dist.dot(reps);
    const int end = std::min(length, (step + 1) * periods_per_step);
    for (int k = step * periods_per_step; k < end; ++k) out[k] = expected;
  }
  return out;
}

std::string MarkovForecaster::to_json() const {
  nlohmann::json j;
  j["kind"] = "markov";
  j["states"] = states_;
  std::vector<std::vector<double>> rows(num_states(), std::vector<double>(num_states()));
  for (int a = 0; a < num_states(); ++a)
    for (int b = 0; b < num_states(); ++b) rows[a][b] = transition_(a, b);
  j["transition"] = rows;
  return j.dump(2);
}

MarkovForecaster MarkovForecaster::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(fmt::format("forecaster JSON: {}", e.what()));
  }
  try {
    auto states = j.at("states").get<std::vector<double>>();
    const auto rows = j.at("transition").get<std::vector<std::vector<double>>>();
    const int n = static_cast<int>(states.size());
    if (static_cast<int>(rows.size()) != n) throw InvalidInput("forecaster JSON: transition size mismatch");
    Eigen::MatrixXd p(n, n);
    for (int a = 0; a < n; ++a) {
      if (static_cast<int>(rows[a].size()) != n) throw InvalidInput("forecaster JSON: ragged transition row");
      for (int b = 0; b < n; ++b) p(a, b) = rows[a][b];
    }
    return MarkovForecaster(std::move(states), std::move(p));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(fmt::format("forecaster JSON: {}", e.what()));
  }
}

std::vector<double> training_split(std::span<const double> per_period, int periods_per_day, int train_days,
                                   int month_days) {
  if (periods_per_day < 1 || train_days < 0 || month_days < 1)
    throw InvalidInput("invalid training split parameters");
  std::vector<double> out;
  const std::size_t month = static_cast<std::size_t>(month_days) * periods_per_day;
  const std::size_t keep = static_cast<std::size_t>(std::min(train_days, month_days)) * periods_per_day;
  for (std::size_t i = 0; i < per_period.size(); ++i)
    if (i % month < keep) out.push_back(per_period[i]);
  return out;
}

}  // namespace v2g
