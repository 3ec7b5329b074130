#include "whd/synth.hpp"

#include "whd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace whd::synth {

namespace {

constexpr double kWaterHeatCapacity = 4186.0;  // J/(kg K), 1 L ~ 1 kg
constexpr std::int64_t kDay = 86400;

struct Interval {
  std::int64_t start_s;
  std::int64_t end_s;
  double active_w;
  double reactive_var;
};

HourWeights hours(std::initializer_list<std::pair<int, double>> peaks, double floor) {
  HourWeights w;
  w.fill(floor);
  for (auto [h, v] : peaks) w[static_cast<std::size_t>(h)] = v;
  return w;
}

std::int64_t quantize(double seconds) {
  return static_cast<std::int64_t>(std::llround(seconds / kInternalStepS)) * kInternalStepS;
}

/// Adds a constant power over [a, b) seconds into per-minute averages.
void accumulate(Eigen::VectorXd& per_min, std::int64_t a, std::int64_t b, double power) {
  const std::int64_t horizon = per_min.size() * 60;
  a = std::clamp<std::int64_t>(a, 0, horizon);
  b = std::clamp<std::int64_t>(b, 0, horizon);
  for (std::int64_t m = a / 60; m * 60 < b; ++m) {
    const std::int64_t lo = std::max(a, m * 60);
    const std::int64_t hi = std::min(b, (m + 1) * 60);
    per_min[m] += power * static_cast<double>(hi - lo) / 60.0;
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::int64_t> session_starts(Rng& rng, int days, double daily, const HourWeights& weights) {
  std::vector<std::int64_t> starts;
  for (int d = 0; d < days; ++d) {
    const int n = rng.poisson(daily);
    for (int k = 0; k < n; ++k) {
      const auto h = static_cast<std::int64_t>(rng.weighted_index(weights));
      starts.push_back(quantize(static_cast<double>(d * kDay + h * 3600) + rng.uniform(0.0, 3600.0)));
    }
  }
  std::sort(starts.begin(), starts.end());
  return starts;
}

std::vector<Interval> appliance_intervals(const ApplianceModel& app, int days, Rng& rng) {
  std::vector<Interval> out;
  std::int64_t busy_until = -1;
  auto level_draw = [&] { return std::max(0.1, 1.0 + app.power_jitter * rng.normal()); };
  for (std::int64_t start : session_starts(rng, days, app.daily_cycles, app.schedule_weights)) {
    const double minutes = rng.lognormal(app.on_duration_min.median, app.on_duration_min.sigma);
    const double level = level_draw();
    if (start < busy_until) continue;
    const std::int64_t end = start + std::max<std::int64_t>(kInternalStepS, quantize(minutes * 60.0));
    busy_until = end;
    if (app.segment_min.median > 0.0) {
      // piecewise-linear level profile emitted per internal step
      const double ramp = std::max(1.0, app.ramp_min * 60.0 / kInternalStepS);
      double from = 0.0, to = level;
      std::int64_t seg_start = start;
      std::int64_t seg_end =
          start + std::max<std::int64_t>(kInternalStepS, quantize(rng.lognormal(app.segment_min.median, app.segment_min.sigma) * 60.0));
      for (std::int64_t t = start; t < end; t += kInternalStepS) {
        if (t >= seg_end) {
          from = to;
          to = level_draw();
          seg_start = seg_end;
          seg_end += std::max<std::int64_t>(kInternalStepS,
                                            quantize(rng.lognormal(app.segment_min.median, app.segment_min.sigma) * 60.0));
        }
        const double k = static_cast<double>((t - seg_start) / kInternalStepS) + 1.0;
        double f = from + (to - from) * std::min(1.0, k / ramp);
        const double tail = static_cast<double>((end - t) / kInternalStepS);
        f *= std::min(1.0, tail / ramp);
        out.push_back({t, t + kInternalStepS, app.rated_active_w * f, app.rated_reactive_var * f});
      }
      continue;
    }
    const double p = app.rated_active_w * level;
    const double q = app.rated_reactive_var * level;
    if (app.burst_on_min.median <= 0.0) {
      out.push_back({start, end, p, q});
      continue;
    }
    std::int64_t t = start;
    bool on = true;
    while (t < end) {
      const auto& dist = on ? app.burst_on_min : app.burst_off_min;
      const std::int64_t len =
          std::max<std::int64_t>(kInternalStepS, quantize(rng.lognormal(dist.median, dist.sigma) * 60.0));
      if (on) out.push_back({t, std::min(end, t + len), p, q});
      t += len;
      on = !on;
    }
  }
  return out;
}

struct Draw {
  std::int64_t start_s;
  std::int64_t end_s;
  double flow_l_per_s;
};

std::vector<Draw> draw_events(const DrawProfile& profile, int days, Rng& rng) {
  std::vector<Draw> out;
  const double flow = profile.flow_lpm / 60.0;
  for (std::int64_t start : session_starts(rng, days, profile.daily_draws, profile.schedule_weights)) {
    const double liters = rng.lognormal(profile.volume_l.median, profile.volume_l.sigma);
    const std::int64_t len = std::max<std::int64_t>(kInternalStepS, quantize(liters / flow));
    out.push_back({start, start + len, flow});
  }
  return out;
}

}  // namespace

HourWeights flat_hours() {
  HourWeights w;
  w.fill(1.0);
  return w;
}

void validate(const Scenario& s) {
  const auto& wh = s.wh;
  if (s.days <= 0) throw std::invalid_argument("scenario needs at least one day");
  if (!(wh.rated_power_w > 0.0)) throw std::invalid_argument("rated power must be positive");
  if (!(wh.tank_volume_l > 0.0)) throw std::invalid_argument("tank volume must be positive");
  if (!(wh.deadband_c > 0.0)) throw std::invalid_argument("deadband must be positive");
  if (!(wh.efficiency > 0.0 && wh.efficiency <= 1.0)) throw std::invalid_argument("efficiency must lie in (0, 1]");
  if (wh.loss_coeff_w_per_c < 0.0) throw std::invalid_argument("loss coefficient must be non-negative");
  if (wh.inlet_temp_c >= wh.setpoint_c) throw std::invalid_argument("inlet must be colder than the setpoint");
  if (s.base_load_w < 0.0 || s.noise_sd_w < 0.0 || s.reactive_noise_sd_var < 0.0)
    throw std::invalid_argument("base load and noise levels must be non-negative");
  if (s.draws.daily_draws < 0.0 || !(s.draws.flow_lpm > 0.0) || !(s.draws.volume_l.median > 0.0))
    throw std::invalid_argument("draw profile is not physical");
  for (const auto& a : s.appliances) {
    if (a.rated_active_w < 0.0 || a.daily_cycles < 0.0 || !(a.on_duration_min.median > 0.0))
      throw std::invalid_argument("appliance '" + a.name + "' is not physical");
  }
}

GroundTruth simulate(const Scenario& s) {
  validate(s);
  const Index minutes = static_cast<Index>(s.days) * 1440;
  const std::int64_t horizon = static_cast<std::int64_t>(minutes) * 60;
  const auto& wh = s.wh;

  GroundTruth g{PowerSeries(s.start_epoch_s, Resolution(1), Eigen::VectorXd::Zero(1)), {}, {}, {}, {}, {}, 0.0};

  // hot-water heater
  Rng draw_rng = Rng::stream(s.seed, 0);
  const auto draws = draw_events(s.draws, s.days, draw_rng);
  const double capacity = wh.tank_volume_l * kWaterHeatCapacity;
  const double dt = kInternalStepS;
  const std::int64_t steps = horizon / kInternalStepS;
  g.tank_temp_c.resize(steps + 1);
  double temp = s.initial_temp_c > 0.0 ? s.initial_temp_c : wh.setpoint_c - 0.5 * wh.deadband_c;
  g.tank_temp_c[0] = temp;
  bool heating = false;
  std::int64_t on_since = 0;
  std::size_t next_draw = 0;
  std::vector<const Draw*> active_draws;
  Eigen::VectorXd wh_power = Eigen::VectorXd::Zero(minutes);
  for (std::int64_t k = 0; k < steps; ++k) {
    const std::int64_t t0 = k * kInternalStepS;
    const std::int64_t t1 = t0 + kInternalStepS;
    if (!heating && temp < wh.setpoint_c - wh.deadband_c) {
      heating = true;
      on_since = t0;
      g.switch_log.push_back({t0, true});
    } else if (heating && temp >= wh.setpoint_c) {
      heating = false;
      g.switch_log.push_back({t0, false});
      g.period_sources.push_back({on_since, t0, "wh"});
      accumulate(wh_power, on_since, t0, wh.rated_power_w);
    }
    const double before = temp;
    temp += ((heating ? wh.efficiency * wh.rated_power_w : 0.0) - wh.loss_coeff_w_per_c * (temp - wh.ambient_temp_c)) *
            dt / capacity;
    while (next_draw < draws.size() && draws[next_draw].start_s < t1) active_draws.push_back(&draws[next_draw++]);
    double liters = 0.0;
    for (const Draw* d : active_draws) {
      const auto overlap = std::min(t1, d->end_s) - std::max(t0, d->start_s);
      if (overlap > 0) liters += d->flow_l_per_s * static_cast<double>(overlap);
    }
    std::erase_if(active_draws, [&](const Draw* d) { return d->end_s <= t1; });
    liters = std::min(liters, wh.tank_volume_l);
    temp -= liters / wh.tank_volume_l * (temp - wh.inlet_temp_c);
    g.tank_temp_c[k + 1] = temp;
    g.max_step_temp_change_c = std::max(g.max_step_temp_change_c, std::abs(temp - before));
  }
  if (heating) {
    g.period_sources.push_back({on_since, horizon, "wh"});
    accumulate(wh_power, on_since, horizon, wh.rated_power_w);
  }

  // appliances and base load
  Eigen::VectorXd active = wh_power;
  Eigen::VectorXd reactive = Eigen::VectorXd::Constant(minutes, s.base_reactive_var);
  g.source_power["base"] = Eigen::VectorXd::Constant(minutes, s.base_load_w);
  active += g.source_power["base"];
  for (std::size_t i = 0; i < s.appliances.size(); ++i) {
    const auto& app = s.appliances[i];
    Rng rng = Rng::stream(s.seed, 100 + i);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(minutes);
    for (const auto& iv : appliance_intervals(app, s.days, rng)) {
      accumulate(p, iv.start_s, iv.end_s, iv.active_w);
      accumulate(reactive, iv.start_s, iv.end_s, iv.reactive_var);
      if (app.rated_active_w >= 1000.0 && app.segment_min.median <= 0.0)
        g.period_sources.push_back({iv.start_s, iv.end_s, app.name});
    }
    active += p;
    g.source_power[app.name + "#" + std::to_string(i)] = std::move(p);
  }
  std::sort(g.period_sources.begin(), g.period_sources.end(),
            [](const SourcePeriod& a, const SourcePeriod& b) { return a.start_s < b.start_s; });

  Rng noise_rng = Rng::stream(s.seed, 1);
  Eigen::VectorXd total(minutes);
  for (Index m = 0; m < minutes; ++m) {
    total[m] = std::max(0.0, active[m] + s.noise_sd_w * noise_rng.normal());
    reactive[m] += s.reactive_noise_sd_var * noise_rng.normal();
  }
  g.source_power["noise"] = total - active;
  g.source_power["wh"] = wh_power;
  g.wh_true = wh_power;
  g.total = PowerSeries(s.start_epoch_s, Resolution(1), std::move(total), std::move(reactive), wh_power);
  return g;
}

RealizedStats realized_stats(const GroundTruth& g) {
  RealizedStats r;
  std::vector<double> on, off;
  for (std::size_t i = 1; i < g.switch_log.size(); ++i) {
    const double minutes = static_cast<double>(g.switch_log[i].time_s - g.switch_log[i - 1].time_s) / 60.0;
    (g.switch_log[i - 1].on ? on : off).push_back(minutes);
  }
  r.median_on_min = median(on);
  r.median_off_min = median(off);
  r.cycles = on.size();
  const double total = g.total.active().sum();
  r.energy_share = total > 0.0 ? g.wh_true.sum() / total : 0.0;
  return r;
}

const Table1Row& table1(int house) {
  static const std::array<Table1Row, 3> rows{{
      {1, 6000.0, 10.0, 182.0, 0.27},
      {2, 6000.0, 3.0, 193.0, 0.17},
      {3, 3000.0, 28.0, 506.0, 0.29},
  }};
  if (house < 1 || house > 3) throw std::invalid_argument("house id must be 1, 2 or 3");
  return rows[static_cast<std::size_t>(house - 1)];
}

namespace {

std::vector<ApplianceModel> common_appliances() {
  const auto meals = hours({{6, 3}, {7, 4}, {11, 3}, {12, 4}, {18, 4}, {19, 4}}, 0.2);
  const auto evening = hours({{6, 1.5}, {7, 1.5}, {17, 2}, {18, 3}, {19, 4}, {20, 4}, {21, 3}, {22, 2}}, 0.3);
  const auto daytime = hours({{8, 2}, {9, 3}, {10, 3}, {11, 2}, {14, 2}, {15, 2}, {16, 2}}, 0.3);
  std::vector<ApplianceModel> a;
  a.push_back({"fridge", 150.0, 60.0, {18.0, 0.2}, 26.0, flat_hours(), 0.05, {}, {}, false});
  a.push_back({"lighting", 250.0, 0.0, {90.0, 0.5}, 3.0, evening, 0.4, {}, {}, true});
  a.push_back({"electronics", 400.0, 0.0, {45.0, 0.6}, 4.0, evening, 0.5, {}, {}, true});
  a.push_back({"misc", 700.0, 0.0, {60.0, 0.5}, 4.0, daytime, 0.5, {}, {}, true});
  a.push_back({"kettle", 1900.0, 0.0, {3.0, 0.3}, 2.0, meals, 0.15, {}, {}, false});
  a.push_back({"cooktop", 1200.0, 0.0, {35.0, 0.4}, 1.5, meals, 0.3, {2.0, 0.6}, {1.5, 0.6}, false});
  a.push_back({"washer", 1500.0, 300.0, {20.0, 0.3}, 0.5, daytime, 0.2, {}, {}, false});
  {
    ApplianceModel hp{"heat_pump", 3400.0, 1200.0, {50.0, 0.4}, 2.0, evening, 0.3, {}, {}, false};
    hp.segment_min = {10.0, 0.5};
    hp.ramp_min = 4.0;
    a.push_back(hp);
  }
  a.push_back({"iron", 1200.0, 0.0, {12.0, 0.5}, 0.5, daytime, 0.2, {0.8, 0.3}, {0.5, 0.3}, false});
  a.push_back({"microwave", 1100.0, 150.0, {3.0, 0.4}, 2.0, meals, 0.1, {}, {}, false});
  return a;
}

}  // namespace

Scenario house_preset(int house, std::uint64_t seed, int days) {
  const auto& row = table1(house);
  const auto morning_evening =
      hours({{5, 3}, {6, 5}, {7, 5}, {8, 3}, {12, 2}, {17, 2}, {18, 3}, {19, 4}, {20, 4}, {21, 3}}, 0.3);

  Scenario s;
  s.seed = seed;
  s.days = days;
  s.appliances = common_appliances();
  s.draws.schedule_weights = morning_evening;
  s.wh.rated_power_w = row.rated_power_w;
  s.wh.loss_coeff_w_per_c = 0.5;
  switch (house) {
    case 1:
      s.wh.tank_volume_l = 150.0;
      s.wh.deadband_c = 2.0;
      s.draws.volume_l = {18.0, 0.45};
      s.draws.daily_draws = 8.0;
      s.base_load_w = 180.0;
      // large inductive device with narrow repeated cycles
      s.appliances.push_back({"pump", 5800.0, 400.0, {40.0, 0.4}, 1.2, morning_evening, 0.03, {3.0, 0.4},
                              {4.0, 0.4}, false});
      break;
    case 2:
      s.wh.tank_volume_l = 80.0;
      s.wh.deadband_c = 2.0;
      s.draws.volume_l = {6.0, 0.5};
      s.draws.daily_draws = 8.0;
      s.base_load_w = 120.0;
      s.appliances.push_back({"compressor", 6400.0, 450.0, {25.0, 0.5}, 0.8, morning_evening, 0.12, {2.0, 0.5},
                              {3.0, 0.5}, false});
      break;
    case 3:
      s.wh.tank_volume_l = 200.0;
      s.wh.deadband_c = 3.0;
      s.draws.volume_l = {27.0, 0.2};
      s.draws.daily_draws = 3.0;
      s.base_load_w = 250.0;
      std::erase_if(s.appliances, [](const ApplianceModel& a) { return a.name == "heat_pump"; });
      for (auto& a : s.appliances)
        if (a.name == "misc" || a.name == "electronics") a.daily_cycles *= 0.5;
      s.appliances.push_back({"ac", 3200.0, 950.0, {40.0, 0.5}, 0.5, morning_evening, 0.03, {}, {}, false});
      break;
    default: break;
  }
  return s;
}

namespace {

Scenario apply_knobs(Scenario base, double volume_scale, double draw_scale, double background_scale) {
  base.draws.volume_l.median *= volume_scale;
  base.draws.daily_draws *= draw_scale;
  base.wh.loss_coeff_w_per_c *= draw_scale;
  for (auto& a : base.appliances)
    if (a.background) a.daily_cycles *= background_scale;
  base.base_load_w *= std::sqrt(background_scale);
  return base;
}

double rel_error(double value, double target) { return std::abs(value - target) / target; }

}  // namespace

CalibrationResult calibrate_to_table1(int house, std::uint64_t seed, int days, const CalibrationOptions& options) {
  const auto& target = table1(house);
  const Scenario preset = house_preset(house, seed, days);
  double volume = 1.0, draws = 1.0, background = 1.0;

  CalibrationResult best;
  double best_err = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= options.max_iterations; ++it) {
    Scenario s = apply_knobs(preset, volume, draws, background);
    const auto g = simulate(s);
    const auto stats = realized_stats(g);
    const double err = std::max({rel_error(stats.median_on_min, target.median_on_min),
                                 rel_error(stats.median_off_min, target.median_off_min),
                                 rel_error(stats.energy_share, target.energy_share)});
    if (err < best_err) {
      best_err = err;
      best = {s, stats, it};
    }
    if (err <= options.goal_tolerance) break;
    if (stats.cycles < 2) {
      volume *= 1.5;
      draws *= 1.5;
      continue;
    }
    constexpr double gain = 0.7;
    volume *= std::pow(target.median_on_min / stats.median_on_min, gain);
    draws *= std::pow(stats.median_off_min / target.median_off_min, gain);
    const double wh_energy = g.wh_true.sum();
    const double other = g.total.active().sum() - wh_energy;
    const double wanted_other = wh_energy * (1.0 - target.energy_share) / target.energy_share;
    background *= std::pow(std::max(0.05, wanted_other / other), 1.3);
    background = std::clamp(background, 0.05, 20.0);
  }
  if (best_err > options.accept_tolerance)
    throw std::runtime_error("calibration for house " + std::to_string(house) + " did not converge (worst error " +
                             std::to_string(best_err * 100.0) + "%)");
  return best;
}

Scenario random_scenario(std::uint64_t seed, int days) {
  Rng rng = Rng::stream(seed, 7);
  Scenario s;
  s.seed = seed;
  s.days = days;
  s.wh.rated_power_w = std::round(rng.uniform(2000.0, 6500.0) / 100.0) * 100.0;
  s.wh.tank_volume_l = rng.uniform(80.0, 250.0);
  s.wh.deadband_c = rng.uniform(1.0, 4.0);
  s.wh.loss_coeff_w_per_c = rng.uniform(0.5, 3.0);
  s.draws.daily_draws = rng.uniform(2.0, 10.0);
  s.draws.volume_l = {rng.uniform(4.0, 40.0), rng.uniform(0.2, 0.7)};
  s.base_load_w = rng.uniform(60.0, 300.0);
  s.noise_sd_w = rng.uniform(0.0, 60.0);
  for (auto& a : common_appliances())
    if (rng.uniform() < 0.7) s.appliances.push_back(a);
  if (rng.uniform() < 0.5) {
    ApplianceModel c{"confounder", s.wh.rated_power_w * rng.uniform(0.8, 1.2), rng.uniform(250.0, 600.0),
                     {rng.uniform(15.0, 60.0), 0.4}, rng.uniform(0.3, 1.5), flat_hours(), 0.05, {3.0, 0.4},
                     {4.0, 0.4}, false};
    s.appliances.push_back(c);
  }
  return s;
}

}  // namespace whd::synth
