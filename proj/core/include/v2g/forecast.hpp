#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace v2g {

/// Wind forecaster over discrete wind levels.
///
/// The chain steps once per planning interval. States are equal-width bins
/// over [0, max(training)] represented by their midpoints; observations above
/// the training maximum fall into the top state.
class MarkovForecaster {
 public:
  static constexpr int kDefaultStates = 20;

  /// `states` strictly increasing, `transition` square and row-stochastic.
  MarkovForecaster(std::vector<double> states, Eigen::MatrixXd transition);

  /// Fits a chain to a trace sampled once per planning interval.
  static MarkovForecaster fit(std::span<const double> trace, int num_states = kDefaultStates);

  /// Fits on a per-period trace by averaging each group of `periods_per_step`
  /// periods into one chain step (a trailing partial group is dropped).
  static MarkovForecaster fit_periods(std::span<const double> per_period, int periods_per_step,
                                      int num_states = kDefaultStates);

  int num_states() const { return static_cast<int>(states_.size()); }
  const std::vector<double>& states() const { return states_; }
  const Eigen::MatrixXd& transition() const { return transition_; }
  double bin_width() const { return width_; }

  /// Index of the state a wind value maps to.
  int state_of(double wind) const;

  /// k-step transition matrix.
  Eigen::MatrixXd power(int k) const;

  /// Expected wind k steps ahead of `current_wind`; k = 0 returns the input.
  double forecast(double current_wind, int k) const;

  /// Per-period wind over [start, start + length) as seen at `start`: the
  /// first step uses `actual`, later steps the k-step expectation from the
  /// mean actual wind of the first step, held across each step's periods.
  std::vector<double> window(std::span<const double> actual, int start, int length,
                             int periods_per_step) const;

  std::string to_json() const;
  static MarkovForecaster from_json(const std::string& text);

 private:
  std::vector<double> states_;
  Eigen::MatrixXd transition_;
  double width_ = 1.0;
};

/// Training part of a per-period trace: the first `train_days` days of every
/// `month_days`-day block.
std::vector<double> training_split(std::span<const double> per_period, int periods_per_day,
                                   int train_days, int month_days = 30);

}  // namespace v2g
