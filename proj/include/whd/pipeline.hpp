#pragma once

#include "whd/report_io.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace whd {

inline constexpr std::string_view kToolVersion = "1.0.0";

struct HouseInput {
  std::string name;  ///< defaults to the file stem
  std::filesystem::path path;
  /// Rated power used for NMAE; taken from the truth channel maximum when absent.
  std::optional<double> true_rated_w;
};

/// JSON form (also the "config" block of a manifest):
/// {"inputs": [{"name", "path", "true_rated_w"} | "path", ...], "resolutions": [1, 5, 10, 15],
///  "settings": {...Settings...}}
/// `use_reactive` in the settings selects the runs: auto runs both modes, on/off one.
struct PipelineConfig {
  std::vector<HouseInput> inputs;
  std::vector<int> resolutions{1, 5, 10, 15};
  Settings settings;
  std::filesystem::path output_dir = "whd_out";
  unsigned workers = 4;
  bool timings = false;
};

Json to_json(const PipelineConfig& c);
PipelineConfig pipeline_config_from_json(const Json& j, PipelineConfig base = {});

struct RunRecord {
  std::string house;
  int resolution_min = 0;
  bool use_reactive = false;
  bool ok = false;
  std::string error;
  bool detected = false;
  std::optional<double> rated_w;
  std::optional<double> base_w;
  bool used_reactive = false;
  std::optional<EvalReport> eval;
  std::string disaggregation_csv;  ///< relative to the output directory
  std::string periods_json;
  std::string histogram_csv;
  std::vector<std::string> warnings;
};

struct RunManifest {
  std::string tool_version{kToolVersion};
  Json config;
  std::vector<RunRecord> runs;
  std::optional<Json> timings;

  bool ok() const;
};

Json to_json(const RunManifest& m);
RunManifest manifest_from_json(const Json& j);

/// Processes every house (bounded worker pool, one house per task) and
/// writes manifest.json, metrics.csv and per-run files under output_dir.
RunManifest run_pipeline(const PipelineConfig& config);

std::string metrics_csv(const std::vector<RunRecord>& runs);

struct OverlaySelection {
  std::optional<std::string> house;
  std::optional<int> resolution_min;
  std::optional<bool> use_reactive;
};

/// Writes histogram.csv, metrics_long.csv and profile_overlay.csv for the
/// manifest at `manifest_path` into `out_dir`.
void run_plotdata(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                  const OverlaySelection& overlay = {});

}  // namespace whd
