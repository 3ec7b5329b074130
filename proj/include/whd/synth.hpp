#pragma once

#include "whd/timeseries.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace whd::synth {

using HourWeights = std::array<double, 24>;

HourWeights flat_hours();

struct Lognormal {
  double median = 0.0;
  double sigma = 0.0;
};

/// Single-node storage tank with a hysteresis thermostat.
struct WhModel {
  double rated_power_w = 3000.0;
  double tank_volume_l = 150.0;
  double setpoint_c = 60.0;
  double deadband_c = 2.0;
  double loss_coeff_w_per_c = 1.5;
  double inlet_temp_c = 15.0;
  double ambient_temp_c = 20.0;
  double efficiency = 1.0;
};

struct ApplianceModel {
  std::string name;
  double rated_active_w = 0.0;
  double rated_reactive_var = 0.0;
  Lognormal on_duration_min;  ///< session length
  double daily_cycles = 0.0;  ///< Poisson rate of sessions per day
  HourWeights schedule_weights = flat_hours();
  double power_jitter = 0.0;  ///< relative sd of the per-session power level
  /// When burst_on.median > 0 the session alternates ON/OFF bursts.
  Lognormal burst_on_min;
  Lognormal burst_off_min;
  /// Background appliances are rescaled by calibration to hit an energy share.
  bool background = true;
  /// Modulating load: when segment_min.median > 0 the session level is
  /// re-drawn every segment and every level change (including start and
  /// stop) is a linear ramp of ramp_min minutes.
  Lognormal segment_min;
  double ramp_min = 0.0;
};

struct DrawProfile {
  double daily_draws = 6.0;
  Lognormal volume_l{15.0, 0.4};
  double flow_lpm = 6.0;
  HourWeights schedule_weights = flat_hours();
};

struct Scenario {
  std::uint64_t seed = 1;
  int days = 14;
  std::int64_t start_epoch_s = 1704067200;  // 2024-01-01T00:00:00Z
  WhModel wh;
  std::vector<ApplianceModel> appliances;
  double base_load_w = 150.0;
  double base_reactive_var = 20.0;
  DrawProfile draws;
  double noise_sd_w = 20.0;
  double reactive_noise_sd_var = 3.0;
  double initial_temp_c = 0.0;  ///< 0 means setpoint - deadband / 2
};

struct SwitchEvent {
  std::int64_t time_s = 0;  ///< seconds since scenario start
  bool on = false;
};

struct SourcePeriod {
  std::int64_t start_s = 0;
  std::int64_t end_s = 0;
  std::string source;  ///< "wh" or an appliance name
};

struct GroundTruth {
  PowerSeries total;  ///< 1-min active + reactive, truth channel = wh_true
  Eigen::VectorXd wh_true;
  std::vector<SwitchEvent> switch_log;
  std::vector<SourcePeriod> period_sources;
  /// Per-source 1-min active power; sums exactly to total.active().
  std::map<std::string, Eigen::VectorXd> source_power;
  Eigen::VectorXd tank_temp_c;  ///< at every internal step
  double max_step_temp_change_c = 0.0;
};

struct RealizedStats {
  double median_on_min = 0.0;
  double median_off_min = 0.0;
  double energy_share = 0.0;
  std::size_t cycles = 0;
};

constexpr int kInternalStepS = 10;

void validate(const Scenario& scenario);
GroundTruth simulate(const Scenario& scenario);
RealizedStats realized_stats(const GroundTruth& truth);

struct Table1Row {
  int house = 0;
  double rated_power_w = 0.0;
  double median_on_min = 0.0;
  double median_off_min = 0.0;
  double energy_share = 0.0;
};

/// Reference water-heater figures for houses 1 to 3.
const Table1Row& table1(int house);

/// Uncalibrated starting scenario for a house; appliance set includes the
/// house's high-power confounder.
Scenario house_preset(int house, std::uint64_t seed = 1, int days = 14);

struct CalibrationOptions {
  int max_iterations = 40;
  double goal_tolerance = 0.05;    ///< stop early once every statistic is this close
  double accept_tolerance = 0.20;  ///< fail when the best attempt is further off
};

struct CalibrationResult {
  Scenario scenario;
  RealizedStats stats;
  int iterations = 0;
};

/// Adjusts draw volume, draw frequency and background activity of the house
/// preset until the simulated median ON/OFF durations and WH energy share
/// match the reference targets in table1().
CalibrationResult calibrate_to_table1(int house, std::uint64_t seed = 1, int days = 14,
                                      const CalibrationOptions& options = {});

/// Randomized scenario for property tests: random rated power, tank and
/// appliance mix. Deterministic in the seed.
Scenario random_scenario(std::uint64_t seed, int days = 3);

}  // namespace whd::synth
