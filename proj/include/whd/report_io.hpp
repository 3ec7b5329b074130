#pragma once

#include "whd/detection.hpp"
#include "whd/disaggregation.hpp"
#include "whd/metrics.hpp"
#include "whd/synth.hpp"
#include "whd/timeseries.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace whd {

using Json = nlohmann::ordered_json;

/// Tunables shared by every subcommand. JSON form:
/// {"csv": {...}, "detection": {...}, "disaggregation": {...}, "activity_epsilon_w": 1}
struct Settings {
  CsvOptions csv;
  DetectionConfig detection;
  DisaggregationConfig disaggregation;
  double activity_epsilon_w = 1.0;
};

Json to_json(const Settings& s);
/// Overlays the keys present in `j` on top of `base`; unknown keys are errors.
Settings settings_from_json(const Json& j, Settings base = {});

Json to_json(const WhDetection& d);
Json to_json(const EvalReport& r);
/// Every candidate period with timestamps and its filter verdict.
Json periods_json(const PowerSeries& series, const DisaggregationResult& r);

Json to_json(const synth::Scenario& s);
synth::Scenario scenario_from_json(const Json& j);

std::string histogram_csv(const Histogram& h);
/// `timestamp,total_w,wh_est_w[,wh_true_w]`
std::string disaggregation_csv(const PowerSeries& series, const Eigen::VectorXd& wh_est);
std::string switch_log_csv(const synth::GroundTruth& g, std::int64_t start_epoch_s);
std::string period_sources_csv(const synth::GroundTruth& g, std::int64_t start_epoch_s);
std::string series_csv(const PowerSeries& series);

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace whd
