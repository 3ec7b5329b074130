#include "whd/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <set>
#include <sstream>
#include <thread>

namespace whd {

namespace fs = std::filesystem;

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string run_dir(const std::string& house, int res) { return "runs/" + house + "/" + std::to_string(res) + "min"; }

std::vector<bool> planned_modes(ReactiveMode m) {
  switch (m) {
    case ReactiveMode::on: return {true};
    case ReactiveMode::off: return {false};
    case ReactiveMode::automatic: break;
  }
  return {false, true};
}

Json record_json(const RunRecord& r) {
  Json j{{"house", r.house},       {"resolution_min", r.resolution_min}, {"use_reactive", r.use_reactive},
         {"status", r.ok ? "ok" : "failed"}};
  if (!r.ok) j["error"] = r.error;
  j["detected"] = r.detected;
  j["rated_w"] = r.rated_w ? Json(*r.rated_w) : Json(nullptr);
  j["base_w"] = r.base_w ? Json(*r.base_w) : Json(nullptr);
  j["used_reactive"] = r.used_reactive;
  j["eval"] = r.eval ? to_json(*r.eval) : Json(nullptr);
  j["files"] = {{"disaggregation", r.disaggregation_csv}, {"periods", r.periods_json}, {"histogram", r.histogram_csv}};
  j["warnings"] = r.warnings;
  return j;
}

RunRecord record_from_json(const Json& j) {
  RunRecord r;
  r.house = j.at("house").get<std::string>();
  r.resolution_min = j.at("resolution_min").get<int>();
  r.use_reactive = j.at("use_reactive").get<bool>();
  r.ok = j.at("status").get<std::string>() == "ok";
  r.error = j.value("error", std::string());
  r.detected = j.value("detected", false);
  if (j.contains("rated_w") && !j["rated_w"].is_null()) r.rated_w = j["rated_w"].get<double>();
  if (j.contains("base_w") && !j["base_w"].is_null()) r.base_w = j["base_w"].get<double>();
  r.used_reactive = j.value("used_reactive", false);
  if (j.contains("eval") && !j["eval"].is_null()) {
    const auto& e = j["eval"];
    EvalReport ev;
    ev.resolution_minutes = e.at("resolution_min").get<int>();
    ev.used_reactive = e.at("used_reactive").get<bool>();
    ev.detected = e.at("detected").get<bool>();
    if (!e.at("point").is_null())
      ev.point = PointErrors{e["point"].at("me_w").get<double>(), e["point"].at("mae_w").get<double>(),
                             e["point"].at("nmae_pct").get<double>()};
    const auto& c = e.at("classification");
    ev.classes = {c.at("precision").get<double>(), c.at("recall").get<double>(), c.at("f1").get<double>(),
                  c.at("tp").get<long>(),          c.at("fp").get<long>(),     c.at("fn").get<long>()};
    r.eval = ev;
  }
  if (j.contains("files")) {
    const auto& f = j["files"];
    r.disaggregation_csv = f.value("disaggregation", std::string());
    r.periods_json = f.value("periods", std::string());
    r.histogram_csv = f.value("histogram", std::string());
  }
  return r;
}

struct HouseOutcome {
  std::vector<RunRecord> runs;
  double seconds = 0.0;
};

HouseOutcome process_house(const HouseInput& input, const PipelineConfig& config) {
  const auto& st = config.settings;
  const auto modes = planned_modes(st.disaggregation.use_reactive);
  HouseOutcome out;
  const auto t0 = std::chrono::steady_clock::now();

  auto fail_all = [&](const std::string& msg) {
    out.runs.clear();
    for (int res : config.resolutions)
      for (bool q : modes) {
        RunRecord r;
        r.house = input.name;
        r.resolution_min = res;
        r.use_reactive = q;
        r.error = msg;
        out.runs.push_back(std::move(r));
      }
  };

  std::optional<PowerSeries> series;
  try {
    series = read_csv_file(input.path.string(), st.csv);
  } catch (const std::exception& e) {
    fail_all(e.what());
    return out;
  }

  std::optional<double> true_rated = input.true_rated_w;
  if (!true_rated && series->has_truth() && series->truth().maxCoeff() > 0.0) true_rated = series->truth().maxCoeff();

  for (int res : config.resolutions) {
    const std::string dir = run_dir(input.name, res);
    try {
      const PowerSeries s = resample(*series, Resolution(res));
      const WhDetection det = detect_wh(s, st.detection);
      const std::string hist_file = dir + "/histogram.csv";
      write_file_atomic(config.output_dir / hist_file, histogram_csv(det.histograms.upper));
      write_file_atomic(config.output_dir / dir / "detection.json", to_json(det).dump(2) + "\n");

      for (bool q : modes) {
        // auto mode quietly drops the reactive variant for P-only meters
        if (q && !s.has_reactive() && st.disaggregation.use_reactive == ReactiveMode::automatic) continue;
        RunRecord r;
        r.house = input.name;
        r.resolution_min = res;
        r.use_reactive = q;
        r.histogram_csv = hist_file;
        r.detected = det.detected;
        r.rated_w = det.rated_active_w;
        r.base_w = det.base_load_w;
        r.warnings = det.warnings;
        try {
          if (q && !s.has_reactive()) throw std::invalid_argument("input has no reactive channel");
          DisaggregationConfig dc = st.disaggregation;
          dc.use_reactive = q ? ReactiveMode::on : ReactiveMode::off;
          const auto result = disaggregate(s, det, dc);
          r.used_reactive = result.used_reactive;
          if (dc.rated_override_w) r.rated_w = dc.rated_override_w;
          r.warnings.insert(r.warnings.end(), result.warnings.begin(), result.warnings.end());
          const std::string tag = q ? "q" : "noq";
          r.disaggregation_csv = dir + "/disaggregation_" + tag + ".csv";
          r.periods_json = dir + "/periods_" + tag + ".json";
          write_file_atomic(config.output_dir / r.disaggregation_csv, disaggregation_csv(s, result.wh_active));
          write_file_atomic(config.output_dir / r.periods_json, periods_json(s, result).dump(2) + "\n");
          if (s.has_truth()) {
            const bool active = det.detected || dc.rated_override_w.has_value();
            if (true_rated) {
              r.eval = evaluate(s.truth(), result.wh_active, *true_rated, res, result.used_reactive, active,
                                st.activity_epsilon_w);
            } else {
              EvalReport ev;
              ev.resolution_minutes = res;
              ev.used_reactive = result.used_reactive;
              ev.detected = active;
              ev.classes = classification(s.truth(), result.wh_active, st.activity_epsilon_w);
              r.eval = ev;
              r.warnings.emplace_back("truth channel is all zero; point errors skipped");
            }
          }
          r.ok = true;
        } catch (const std::exception& e) {
          r.error = e.what();
        }
        out.runs.push_back(std::move(r));
      }
    } catch (const std::exception& e) {
      for (bool q : modes) {
        RunRecord r;
        r.house = input.name;
        r.resolution_min = res;
        r.use_reactive = q;
        r.error = e.what();
        out.runs.push_back(std::move(r));
      }
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

Json to_json(const PipelineConfig& c) {
  Json inputs = Json::array();
  for (const auto& h : c.inputs) {
    Json j{{"name", h.name}, {"path", h.path.generic_string()}};
    j["true_rated_w"] = h.true_rated_w ? Json(*h.true_rated_w) : Json(nullptr);
    inputs.push_back(j);
  }
  return Json{{"inputs", inputs}, {"resolutions", c.resolutions}, {"settings", to_json(c.settings)}};
}

PipelineConfig pipeline_config_from_json(const Json& j, PipelineConfig c) {
  if (!j.is_object()) throw std::invalid_argument("pipeline config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (key != "inputs" && key != "resolutions" && key != "settings")
      throw std::invalid_argument("unknown key '" + key + "' in pipeline config");
  if (j.contains("inputs")) {
    c.inputs.clear();
    for (const auto& item : j["inputs"]) {
      HouseInput h;
      if (item.is_string()) {
        h.path = item.get<std::string>();
      } else {
        h.path = item.at("path").get<std::string>();
        h.name = item.value("name", std::string());
        if (item.contains("true_rated_w") && !item["true_rated_w"].is_null())
          h.true_rated_w = item["true_rated_w"].get<double>();
      }
      c.inputs.push_back(std::move(h));
    }
  }
  if (j.contains("resolutions")) c.resolutions = j["resolutions"].get<std::vector<int>>();
  if (j.contains("settings")) c.settings = settings_from_json(j["settings"], c.settings);
  return c;
}

bool RunManifest::ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunRecord& r) { return r.ok; });
}

Json to_json(const RunManifest& m) {
  Json runs = Json::array();
  for (const auto& r : m.runs) runs.push_back(record_json(r));
  Json j{{"tool", "whd"}, {"version", m.tool_version}, {"config", m.config}, {"runs", runs}};
  if (m.timings) j["timings"] = *m.timings;
  return j;
}

RunManifest manifest_from_json(const Json& j) {
  RunManifest m;
  m.tool_version = j.value("version", std::string());
  m.config = j.value("config", Json::object());
  if (j.contains("runs"))
    for (const auto& r : j["runs"]) m.runs.push_back(record_from_json(r));
  if (j.contains("timings")) m.timings = j["timings"];
  return m;
}

std::string metrics_csv(const std::vector<RunRecord>& runs) {
  std::string out =
      "house,resolution_min,use_reactive,status,detected,rated_w,base_w,used_reactive,me_w,mae_w,nmae_pct,precision,"
      "recall,f1,tp,fp,fn\n";
  for (const auto& r : runs) {
    out += r.house + ',' + std::to_string(r.resolution_min) + ',' + (r.use_reactive ? "true" : "false") + ',' +
           (r.ok ? "ok" : "failed") + ',' + (r.detected ? "true" : "false") + ',' + cell(r.rated_w) + ',' +
           cell(r.base_w) + ',' + (r.used_reactive ? "true" : "false");
    std::optional<PointErrors> p;
    if (r.eval) p = r.eval->point;
    out += ',' + (p ? format_double(p->me) : "") + ',' + (p ? format_double(p->mae) : "") + ',' +
           (p ? format_double(p->nmae) : "");
    if (r.eval) {
      const auto& c = r.eval->classes;
      out += ',' + format_double(c.precision) + ',' + format_double(c.recall) + ',' + format_double(c.f1) + ',' +
             std::to_string(c.tp) + ',' + std::to_string(c.fp) + ',' + std::to_string(c.fn);
    } else {
      out += ",,,,,,";
    }
    out += '\n';
  }
  return out;
}

RunManifest run_pipeline(const PipelineConfig& config_in) {
  PipelineConfig config = config_in;
  if (config.inputs.empty()) throw std::invalid_argument("pipeline needs at least one input");
  if (config.resolutions.empty()) throw std::invalid_argument("pipeline needs at least one resolution");
  for (int r : config.resolutions) (void)Resolution(r);
  std::set<std::string> names;
  for (auto& h : config.inputs) {
    if (h.name.empty()) h.name = h.path.stem().string();
    if (!names.insert(h.name).second) throw std::invalid_argument("duplicate house name '" + h.name + "'");
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<HouseOutcome> outcomes(config.inputs.size());
  std::atomic<std::size_t> next{0};
  const unsigned n_workers =
      std::max(1u, std::min<unsigned>(config.workers, static_cast<unsigned>(config.inputs.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n_workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < config.inputs.size(); i = next++)
          outcomes[i] = process_house(config.inputs[i], config);
      });
  }

  RunManifest m;
  m.config = to_json(config);
  for (auto& o : outcomes)
    for (auto& r : o.runs) m.runs.push_back(std::move(r));
  if (config.timings) {
    Json per_house = Json::object();
    for (std::size_t i = 0; i < outcomes.size(); ++i) per_house[config.inputs[i].name] = outcomes[i].seconds;
    m.timings = Json{{"total_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                     {"houses_s", per_house}};
  }
  write_file_atomic(config.output_dir / "metrics.csv", metrics_csv(m.runs));
  write_file_atomic(config.output_dir / "manifest.json", to_json(m).dump(2) + "\n");
  return m;
}

void run_plotdata(const fs::path& manifest_path, const fs::path& out_dir, const OverlaySelection& overlay) {
  if (!fs::exists(manifest_path)) throw std::runtime_error("manifest not found: " + manifest_path.string());
  const RunManifest m = manifest_from_json(Json::parse(read_file(manifest_path)));
  const fs::path base = manifest_path.parent_path();

  std::string hist = "house,resolution_min,bin_center_w,density\n";
  std::set<std::string> seen;
  for (const auto& r : m.runs) {
    if (!r.ok || r.histogram_csv.empty() || !seen.insert(r.histogram_csv).second) continue;
    std::istringstream in(read_file(base / r.histogram_csv));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line))
      if (!line.empty()) hist += r.house + ',' + std::to_string(r.resolution_min) + ',' + line + '\n';
  }

  std::string longf = "house,resolution_min,metric,value,use_reactive\n";
  for (const auto& r : m.runs) {
    std::optional<double> v[6];
    if (r.eval) {
      if (r.eval->point) {
        v[0] = r.eval->point->me;
        v[1] = r.eval->point->mae;
        v[2] = r.eval->point->nmae;
      }
      v[3] = r.eval->classes.precision;
      v[4] = r.eval->classes.recall;
      v[5] = r.eval->classes.f1;
    }
    static const char* names[6] = {"me_w", "mae_w", "nmae_pct", "precision", "recall", "f1"};
    for (int k = 0; k < 6; ++k)
      longf += r.house + ',' + std::to_string(r.resolution_min) + ',' + names[k] + ',' + cell(v[k]) + ',' +
               (r.use_reactive ? "true" : "false") + '\n';
  }

  std::string overlay_csv = "timestamp,total,wh_true,wh_est\n";
  const RunRecord* pick = nullptr;
  for (const auto& r : m.runs) {
    if (!r.ok || r.disaggregation_csv.empty()) continue;
    if (overlay.house && r.house != *overlay.house) continue;
    if (overlay.resolution_min && r.resolution_min != *overlay.resolution_min) continue;
    if (overlay.use_reactive && r.use_reactive != *overlay.use_reactive) continue;
    pick = &r;
    break;
  }
  if (pick) {
    std::istringstream in(read_file(base / pick->disaggregation_csv));
    std::string line;
    std::getline(in, line);
    const auto header = split_csv_line(line);
    const bool has_truth = header.size() >= 4;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto c = split_csv_line(line);
      if (c.size() < 3) throw std::runtime_error("malformed row in " + pick->disaggregation_csv);
      overlay_csv += c[0] + ',' + c[1] + ',' + (has_truth && c.size() > 3 ? c[3] : "") + ',' + c[2] + '\n';
    }
  } else if (overlay.house || overlay.resolution_min || overlay.use_reactive) {
    throw std::runtime_error("no completed run matches the overlay selection");
  }

  write_file_atomic(out_dir / "histogram.csv", hist);
  write_file_atomic(out_dir / "metrics_long.csv", longf);
  write_file_atomic(out_dir / "profile_overlay.csv", overlay_csv);
}

}  // namespace whd
