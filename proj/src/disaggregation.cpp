#include "whd/disaggregation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace whd {

std::string_view to_string(Direction d) { return d == Direction::up ? "up" : "down"; }

std::string_view to_string(Channel c) { return c == Channel::active ? "active" : "reactive"; }

std::string_view to_string(FilterReason r) {
  switch (r) {
    case FilterReason::none: return "none";
    case FilterReason::too_long: return "too_long";
    case FilterReason::slow_ramp: return "slow_ramp";
    case FilterReason::reactive_coincidence: return "reactive_coincidence";
  }
  return "none";
}

std::string_view to_string(ReactiveMode m) {
  switch (m) {
    case ReactiveMode::automatic: return "auto";
    case ReactiveMode::on: return "on";
    case ReactiveMode::off: return "off";
  }
  return "auto";
}

ReactiveMode parse_reactive_mode(std::string_view text) {
  if (text == "auto") return ReactiveMode::automatic;
  if (text == "on") return ReactiveMode::on;
  if (text == "off") return ReactiveMode::off;
  throw std::invalid_argument("use-reactive must be auto, on or off");
}

Index DisaggregationResult::kept_count() const {
  return std::count_if(periods.begin(), periods.end(), [](const OnPeriod& p) { return p.kept; });
}

JumpTrain detect_jumps(const Eigen::Ref<const Eigen::VectorXd>& values, double threshold, Channel channel) {
  if (!(threshold > 0.0)) throw std::invalid_argument("jump threshold must be positive");
  if (values.size() < 3) throw std::invalid_argument("jump detection needs at least three samples");

  JumpTrain train;
  train.threshold = threshold;
  train.channel = channel;
  std::optional<Index> last_raw;
  for (Index t = 2; t < values.size(); ++t) {
    const double d = values[t] - values[t - 2];
    std::optional<Direction> dir;
    if (d >= threshold) dir = Direction::up;
    else if (d <= -threshold) dir = Direction::down;
    if (!dir) continue;

    const JumpEvent ev{t, *dir, std::abs(d), channel};
    if (!train.events.empty() && last_raw && train.events.back().direction == *dir && t - *last_raw <= 2) {
      if (ev.magnitude > train.events.back().magnitude) train.events.back() = ev;
    } else {
      train.events.push_back(ev);
    }
    last_raw = t;
  }
  return train;
}

double active_threshold(const WhDetection& detection, double margin) {
  if (!detection.detected || !detection.rated_active_w)
    throw std::logic_error("no active threshold without a detected water heater");
  if (margin < 0.0 || margin >= 1.0) throw std::invalid_argument("margin must lie in [0, 1)");
  return (1.0 - margin) * *detection.rated_active_w;
}

std::optional<double> estimate_rated_reactive(const Eigen::Ref<const Eigen::VectorXd>& reactive, double bin_width,
                                              double floor) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");
  const Eigen::VectorXd mag = reactive.cwiseAbs();
  const auto bin_of = [&](double q) { return static_cast<Index>(std::floor(q / bin_width)); };
  if (mag.size() == 0 || mag.maxCoeff() <= floor) return std::nullopt;
  const Index first = bin_of(floor);
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(bin_of(mag.maxCoeff()) - first + 1);
  for (Index i = 0; i < mag.size(); ++i)
    if (mag[i] > floor) ++counts[bin_of(mag[i]) - first];
  Index best = 0;
  counts.maxCoeff(&best);
  return (static_cast<double>(first + best) + 0.5) * bin_width;
}

std::optional<double> estimate_rated_reactive(const PowerSeries& series, double bin_width, double floor) {
  if (!series.has_reactive()) return std::nullopt;
  return estimate_rated_reactive(series.reactive(), bin_width, floor);
}

JumpTrain clean_alternation(const JumpTrain& train) {
  JumpTrain out;
  out.threshold = train.threshold;
  out.channel = train.channel;
  for (const auto& ev : train.events) {
    if (out.events.empty()) {
      if (ev.direction == Direction::up) out.events.push_back(ev);
      continue;
    }
    auto& last = out.events.back();
    if (ev.direction != last.direction) {
      out.events.push_back(ev);
    } else if (ev.direction == Direction::down) {
      last = ev;  // latest down closes the ON period
    }
  }
  if (!out.events.empty() && out.events.back().direction == Direction::up) out.events.pop_back();
  return out;
}

std::vector<OnPeriod> build_periods(const JumpTrain& cleaned, const Eigen::Ref<const Eigen::VectorXd>& total,
                                    int step_minutes, double rated_w, const DisaggregationConfig& config) {
  if (cleaned.events.size() % 2 != 0) throw std::invalid_argument("jump train does not alternate");
  const double edge = config.edge_fraction * rated_w;
  std::vector<OnPeriod> periods;
  for (std::size_t k = 0; k + 1 < cleaned.events.size(); k += 2) {
    const auto& up = cleaned.events[k];
    const auto& down = cleaned.events[k + 1];
    if (up.direction != Direction::up || down.direction != Direction::down || down.index <= up.index)
      throw std::invalid_argument("jump train does not alternate");

    OnPeriod p;
    p.up_index = up.index;
    p.down_index = down.index;
    // the sample before an up jump straddles the switch when it already rose
    p.start = total[up.index - 1] - total[up.index - 2] >= edge ? up.index - 1 : up.index;
    p.end = total[down.index - 1] - total[down.index] >= edge ? down.index : down.index - 1;
    p.end = std::max(p.end, p.start + 1);

    if (p.duration_minutes(step_minutes) > config.max_on_minutes) {
      p.kept = false;
      p.filter_reason = FilterReason::too_long;
    } else {
      const auto seg = total.segment(p.start, std::min<Index>(p.length(), config.ramp_window));
      const double peak = seg.maxCoeff();
      Index reached = 0;
      while (seg[reached] < peak - config.ramp_fraction * rated_w) ++reached;
      if (reached > 1) {
        p.kept = false;
        p.filter_reason = FilterReason::slow_ramp;
      }
    }
    periods.push_back(p);
  }
  return periods;
}

DisaggregationResult reconstruct(const PowerSeries& series, std::vector<OnPeriod> periods, double rated_w) {
  DisaggregationResult r;
  r.rated_active_w = rated_w;
  r.wh_active = Eigen::VectorXd::Zero(series.size());
  const auto& total = series.active();
  for (const auto& p : periods) {
    if (!p.kept) continue;
    if (p.start < 0 || p.end > series.size() || p.end <= p.start) throw std::invalid_argument("period out of range");
    r.wh_active.segment(p.start, p.length()) = total.segment(p.start, p.length()).cwiseMin(rated_w);
  }
  r.periods = std::move(periods);
  return r;
}

DisaggregationResult filter_reactive(const PowerSeries& series, DisaggregationResult result, const JumpTrain& q_train,
                                     Index window) {
  auto coincides = [&](Index index, Direction dir) {
    return std::any_of(q_train.events.begin(), q_train.events.end(), [&](const JumpEvent& q) {
      return q.direction == dir && std::abs(q.index - index) <= window;
    });
  };
  for (auto& p : result.periods) {
    if (!p.kept) continue;
    if (coincides(p.up_index, Direction::up) || coincides(p.down_index, Direction::down)) {
      p.kept = false;
      p.filter_reason = FilterReason::reactive_coincidence;
    }
  }
  auto filtered = reconstruct(series, std::move(result.periods), result.rated_active_w);
  filtered.used_reactive = true;
  filtered.rated_reactive_var = result.rated_reactive_var;
  filtered.active_jumps = std::move(result.active_jumps);
  filtered.reactive_jumps = q_train;
  filtered.warnings = std::move(result.warnings);
  return filtered;
}

DisaggregationResult disaggregate(const PowerSeries& series, double rated_w, const DisaggregationConfig& config) {
  if (config.rated_override_w) rated_w = *config.rated_override_w;
  if (!(rated_w > 0.0)) throw std::invalid_argument("rated power must be positive");
  if (config.margin < 0.0 || config.margin >= 1.0) throw std::invalid_argument("margin must lie in [0, 1)");

  const double threshold = (1.0 - config.margin) * rated_w;
  auto jumps = detect_jumps(series.active(), threshold, Channel::active);
  auto periods = build_periods(clean_alternation(jumps), series.active(), series.step_minutes(), rated_w, config);
  auto result = reconstruct(series, std::move(periods), rated_w);
  result.active_jumps = std::move(jumps);

  const bool want_q = config.use_reactive == ReactiveMode::on ||
                      (config.use_reactive == ReactiveMode::automatic && series.has_reactive());
  if (!want_q) return result;
  if (!series.has_reactive()) throw std::invalid_argument("reactive filtering requested but series has no reactive channel");

  const auto rated_q = estimate_rated_reactive(series.reactive(), config.q_bin_width_var, config.q_floor_var);
  if (!rated_q) {
    result.warnings.emplace_back("no reactive power above the floor; reactive filtering disabled");
    return result;
  }
  result.rated_reactive_var = *rated_q;
  const Eigen::VectorXd magnitude = series.reactive().cwiseAbs();
  auto q_train = detect_jumps(magnitude, (1.0 - config.margin) * *rated_q, Channel::reactive);
  return filter_reactive(series, std::move(result), q_train, config.coincidence_window);
}

DisaggregationResult disaggregate(const PowerSeries& series, const WhDetection& detection,
                                  const DisaggregationConfig& config) {
  if (config.rated_override_w) return disaggregate(series, *config.rated_override_w, config);
  if (!detection.detected) {
    DisaggregationResult r;
    r.wh_active = Eigen::VectorXd::Zero(series.size());
    r.warnings.emplace_back("no water heater detected; estimate is zero");
    return r;
  }
  return disaggregate(series, *detection.rated_active_w, config);
}

}  // namespace whd
