#pragma once

#include "whd/detection.hpp"
#include "whd/timeseries.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace whd {

enum class Direction { up, down };
enum class Channel { active, reactive };
enum class FilterReason { none, too_long, slow_ramp, reactive_coincidence };
enum class ReactiveMode { automatic, on, off };

std::string_view to_string(Direction d);
std::string_view to_string(Channel c);
std::string_view to_string(FilterReason r);
std::string_view to_string(ReactiveMode m);
ReactiveMode parse_reactive_mode(std::string_view text);

struct JumpEvent {
  Index index = 0;
  Direction direction = Direction::up;
  double magnitude = 0.0;
  Channel channel = Channel::active;
  friend bool operator==(const JumpEvent&, const JumpEvent&) = default;
};

struct JumpTrain {
  std::vector<JumpEvent> events;
  double threshold = 0.0;
  Channel channel = Channel::active;
};

/// ON interval [start, end). `up_index`/`down_index` are the jump indices that
/// delimit it; the nominal duration is measured between them.
struct OnPeriod {
  Index start = 0;
  Index end = 0;
  Index up_index = 0;
  Index down_index = 0;
  bool kept = true;
  FilterReason filter_reason = FilterReason::none;

  Index length() const { return end - start; }
  double duration_minutes(int step_minutes) const {
    return static_cast<double>(down_index - up_index) * step_minutes;
  }
  bool contains(Index t) const { return t >= start && t < end; }
};

struct DisaggregationConfig {
  double margin = 0.10;
  double max_on_minutes = 120.0;
  ReactiveMode use_reactive = ReactiveMode::automatic;
  std::optional<double> rated_override_w;
  double q_bin_width_var = 20.0;
  double q_floor_var = 100.0;
  Index coincidence_window = 1;
  /// A straddling sample counts as ON/OFF only if it moved by at least
  /// edge_fraction * rated relative to its outer neighbour.
  double edge_fraction = 0.10;
  /// In-period power within ramp_fraction * rated of the period maximum
  /// counts as having reached the maximum.
  double ramp_fraction = 0.10;
  /// Leading in-period steps searched for the maximum.
  Index ramp_window = 4;
};

struct DisaggregationResult {
  Eigen::VectorXd wh_active;
  std::vector<OnPeriod> periods;
  bool used_reactive = false;
  double rated_active_w = 0.0;
  std::optional<double> rated_reactive_var;
  JumpTrain active_jumps;
  std::optional<JumpTrain> reactive_jumps;
  std::vector<std::string> warnings;

  Index kept_count() const;
};

/// Two-step difference jumps: d(t) = v[t] - v[t-2] for t >= 2, up when
/// d >= threshold, down when d <= -threshold. Same-direction events no more
/// than two steps apart (with nothing in between) collapse into the one with
/// the largest magnitude; ties keep the earliest.
JumpTrain detect_jumps(const Eigen::Ref<const Eigen::VectorXd>& values, double threshold,
                       Channel channel = Channel::active);

double active_threshold(const WhDetection& detection, double margin = 0.10);

/// Densest |Q| bin center above the floor, or nullopt when no sample clears it.
std::optional<double> estimate_rated_reactive(const Eigen::Ref<const Eigen::VectorXd>& reactive,
                                              double bin_width = 20.0, double floor = 100.0);
std::optional<double> estimate_rated_reactive(const PowerSeries& series, double bin_width = 20.0,
                                              double floor = 100.0);

/// Leading downs dropped, first up of an up-run kept, last down of a
/// down-run kept, trailing unmatched up dropped.
JumpTrain clean_alternation(const JumpTrain& train);

std::vector<OnPeriod> build_periods(const JumpTrain& cleaned, const Eigen::Ref<const Eigen::VectorXd>& total,
                                    int step_minutes, double rated_w, const DisaggregationConfig& config = {});

DisaggregationResult reconstruct(const PowerSeries& series, std::vector<OnPeriod> periods, double rated_w);

/// Drops kept periods whose up (down) jump lies within the coincidence window
/// of a reactive up (down) jump, then re-applies the reconstruction.
DisaggregationResult filter_reactive(const PowerSeries& series, DisaggregationResult result, const JumpTrain& q_train,
                                     Index window = 1);

/// Full chain: threshold, jumps, alternation, periods, reconstruction and
/// (when requested and available) reactive coincidence filtering.
DisaggregationResult disaggregate(const PowerSeries& series, double rated_w, const DisaggregationConfig& config = {});
DisaggregationResult disaggregate(const PowerSeries& series, const WhDetection& detection,
                                  const DisaggregationConfig& config = {});

}  // namespace whd
