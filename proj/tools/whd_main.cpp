// whd: water-heater detection and disaggregation from smart-meter CSVs.
#include "whd/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace whd;

namespace {

// Flag values parsed by CLI11; only the ones the user actually passed are
// applied on top of the config file.
struct SettingsFlags {
  std::string ts_col, p_col, q_col, truth_col;
  bool fill_gaps = false;
  double bin_width_w = 0, min_power_w = 0, q_bin_width_var = 0, q_floor_var = 0;
  std::string rated_bin;
  double margin = 0, max_on_min = 0, rated_w = 0;
  std::string use_reactive;
  int coincidence_window = 0;
  double activity_epsilon_w = 0;
  std::string config;
  std::map<std::string, CLI::Option*> opts;
};

void add_csv_flags(CLI::App* app, SettingsFlags& f) {
  f.opts["ts"] = app->add_option("--ts-col", f.ts_col, "timestamp column name");
  f.opts["p"] = app->add_option("--p-col", f.p_col, "active power column name");
  f.opts["q"] = app->add_option("--q-col", f.q_col, "reactive power column name");
  f.opts["truth"] = app->add_option("--truth-col", f.truth_col, "sub-metered WH column name");
  f.opts["fill"] = app->add_flag("--fill-gaps", f.fill_gaps, "interpolate holes of up to 3 missing samples");
  f.opts["config"] = app->add_option("--config", f.config, "JSON settings file (CLI flags take precedence)");
}

void add_detection_flags(CLI::App* app, SettingsFlags& f) {
  f.opts["bw"] = app->add_option("--bin-width-w", f.bin_width_w, "active histogram bin width [W]");
  f.opts["minp"] = app->add_option("--min-power-w", f.min_power_w, "histogram lower cutoff [W]");
  f.opts["qbw"] = app->add_option("--q-bin-width-var", f.q_bin_width_var, "reactive histogram bin width [Var]");
  f.opts["qfloor"] = app->add_option("--q-floor-var", f.q_floor_var, "ignore |Q| at or below this [Var]");
  f.opts["rbin"] = app->add_option("--rated-bin", f.rated_bin, "outlier bin defining rated power")
                       ->check(CLI::IsMember({"densest", "highest_power"}));
}

void add_disagg_flags(CLI::App* app, SettingsFlags& f) {
  f.opts["margin"] = app->add_option("--margin", f.margin, "jump threshold margin below rated power");
  f.opts["maxon"] = app->add_option("--max-on-min", f.max_on_min, "longest ON period kept [min]");
  f.opts["ureact"] = app->add_option("--use-reactive", f.use_reactive, "reactive coincidence filtering")
                         ->check(CLI::IsMember({"auto", "on", "off"}));
  f.opts["rated"] = app->add_option("--rated-w", f.rated_w, "override the detected rated power [W]");
  f.opts["cwin"] = app->add_option("--coincidence-window", f.coincidence_window, "P/Q jump matching window [steps]");
}

void add_eval_flags(CLI::App* app, SettingsFlags& f) {
  f.opts["eps"] = app->add_option("--activity-epsilon-w", f.activity_epsilon_w, "event threshold [W]");
}

bool given(const SettingsFlags& f, const char* key) {
  auto it = f.opts.find(key);
  return it != f.opts.end() && it->second->count() > 0;
}

Json load_json(const std::string& path) { return Json::parse(read_file(path)); }

Settings resolve_settings(const SettingsFlags& f, const Json* file_settings) {
  Settings s;
  if (file_settings) s = settings_from_json(*file_settings, s);
  if (given(f, "ts")) s.csv.ts_col = f.ts_col;
  if (given(f, "p")) s.csv.p_col = f.p_col;
  if (given(f, "q")) s.csv.q_col = f.q_col;
  if (given(f, "truth")) s.csv.truth_col = f.truth_col;
  if (given(f, "fill")) s.csv.fill_gaps = f.fill_gaps;
  if (given(f, "bw")) s.detection.bin_width_w = f.bin_width_w;
  if (given(f, "minp")) s.detection.min_power_w = f.min_power_w;
  if (given(f, "qbw")) s.detection.q_bin_width_var = f.q_bin_width_var;
  if (given(f, "qfloor")) s.detection.q_floor_var = f.q_floor_var;
  if (given(f, "rbin"))
    s.detection.rated_bin = f.rated_bin == "densest" ? RatedBin::densest : RatedBin::highest_power;
  if (given(f, "margin")) s.disaggregation.margin = f.margin;
  if (given(f, "maxon")) s.disaggregation.max_on_minutes = f.max_on_min;
  if (given(f, "ureact")) s.disaggregation.use_reactive = parse_reactive_mode(f.use_reactive);
  if (given(f, "rated")) s.disaggregation.rated_override_w = f.rated_w;
  if (given(f, "cwin")) s.disaggregation.coincidence_window = f.coincidence_window;
  if (given(f, "eps")) s.activity_epsilon_w = f.activity_epsilon_w;
  s.disaggregation.q_bin_width_var = s.detection.q_bin_width_var;
  s.disaggregation.q_floor_var = s.detection.q_floor_var;
  return s;
}

Settings resolve_settings(const SettingsFlags& f) {
  if (f.config.empty()) return resolve_settings(f, nullptr);
  const Json j = load_json(f.config);
  return resolve_settings(f, &j);
}

PowerSeries load_series(const std::string& path, const Settings& s, int resolution) {
  PowerSeries series = read_csv_file(path, s.csv);
  if (resolution > 0 && resolution != series.step_minutes()) series = resample(series, Resolution(resolution));
  return series;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file_atomic(path, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Water-heater detection and load disaggregation for smart-meter data"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  // detect
  SettingsFlags det_f;
  std::string det_in, det_json = "-", det_hist;
  int det_res = 0;
  auto* det = app.add_subcommand("detect", "decide whether a water heater is present and estimate its rated power");
  det->add_option("input", det_in, "meter CSV")->required()->check(CLI::ExistingFile);
  det->add_option("--resolution", det_res, "resample to this many minutes first");
  det->add_option("--json", det_json, "verdict JSON path ('-' for stdout)");
  det->add_option("--histogram", det_hist, "write bin_center_w,density CSV here");
  add_csv_flags(det, det_f);
  add_detection_flags(det, det_f);

  // disaggregate
  SettingsFlags dis_f;
  std::string dis_in, dis_out, dis_periods;
  int dis_res = 0;
  auto* dis = app.add_subcommand("disaggregate", "estimate the water-heater load profile");
  dis->add_option("input", dis_in, "meter CSV")->required()->check(CLI::ExistingFile);
  dis->add_option("--out", dis_out, "output CSV timestamp,total_w,wh_est_w[,wh_true_w]")->required();
  dis->add_option("--periods", dis_periods, "period sidecar JSON (default: <out stem>.periods.json)");
  dis->add_option("--resolution", dis_res, "resample to this many minutes first");
  add_csv_flags(dis, dis_f);
  add_detection_flags(dis, dis_f);
  add_disagg_flags(dis, dis_f);

  // evaluate
  SettingsFlags ev_f;
  std::string ev_in, ev_periods, ev_json = "-", ev_metrics, ev_house;
  double ev_rated = 0;
  auto* ev = app.add_subcommand("evaluate", "score a disaggregation CSV against its wh_true_w column");
  ev->add_option("input", ev_in, "CSV written by 'disaggregate'")->required()->check(CLI::ExistingFile);
  ev->add_option("--periods", ev_periods, "sidecar JSON; supplies detected/used_reactive")->check(CLI::ExistingFile);
  auto* ev_rated_opt = ev->add_option("--true-rated-w", ev_rated, "rated power for NMAE (default: max of truth)");
  ev->add_option("--house", ev_house, "house label (default: file stem)");
  ev->add_option("--json", ev_json, "report JSON path ('-' for stdout)");
  ev->add_option("--metrics-csv", ev_metrics, "write a one-row metrics table here");
  add_eval_flags(ev, ev_f);

  // synth
  std::string syn_house = "3", syn_out, syn_scenario;
  int syn_days = 14;
  std::uint64_t syn_seed = 1;
  auto* syn = app.add_subcommand("synth", "generate a labelled synthetic household");
  syn->add_option("--house", syn_house, "reference house (1, 2, 3) or a custom scenario")
      ->check(CLI::IsMember({"1", "2", "3", "custom"}));
  syn->add_option("--days", syn_days, "simulated days")->check(CLI::PositiveNumber);
  syn->add_option("--seed", syn_seed, "random seed");
  syn->add_option("--scenario", syn_scenario, "scenario JSON for --house custom")->check(CLI::ExistingFile);
  syn->add_option("--out", syn_out, "output directory")->required();

  // pipeline
  SettingsFlags pipe_f;
  std::vector<std::string> pipe_in;
  std::vector<int> pipe_res;
  std::string pipe_out = "whd_out";
  unsigned pipe_workers = 4;
  bool pipe_timings = false;
  auto* pipe = app.add_subcommand("pipeline", "batch: houses x resolutions x reactive modes");
  pipe->add_option("inputs", pipe_in, "meter CSVs (added to those in --config)");
  auto* pipe_res_opt = pipe->add_option("--resolutions", pipe_res, "resolutions in minutes")->delimiter(',');
  pipe->add_option("--out", pipe_out, "output directory");
  pipe->add_option("--workers", pipe_workers, "parallel houses")->check(CLI::PositiveNumber);
  pipe->add_flag("--timings", pipe_timings, "record wall-clock timings in the manifest");
  add_csv_flags(pipe, pipe_f);
  add_detection_flags(pipe, pipe_f);
  add_disagg_flags(pipe, pipe_f);
  add_eval_flags(pipe, pipe_f);

  // plotdata
  std::string plot_manifest, plot_out, plot_house, plot_q;
  int plot_res = 0;
  auto* plot = app.add_subcommand("plotdata", "tidy CSVs for external plotting from a manifest");
  plot->add_option("manifest", plot_manifest, "manifest.json written by 'pipeline'")->required();
  plot->add_option("--out", plot_out, "output directory (default: next to the manifest)");
  auto* plot_house_opt = plot->add_option("--house", plot_house, "house for profile_overlay.csv");
  auto* plot_res_opt = plot->add_option("--resolution", plot_res, "resolution for profile_overlay.csv");
  auto* plot_q_opt =
      plot->add_option("--use-reactive", plot_q, "reactive mode for profile_overlay.csv")->check(CLI::IsMember({"on", "off"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*det) {
      const Settings s = resolve_settings(det_f);
      const PowerSeries series = load_series(det_in, s, det_res);
      const WhDetection d = detect_wh(series, s.detection);
      Json j = to_json(d);
      j["resolution_min"] = series.step_minutes();
      emit(det_json, j.dump(2) + "\n");
      if (!det_hist.empty()) write_file_atomic(det_hist, histogram_csv(d.histograms.upper));
      return 0;
    }

    if (*dis) {
      const Settings s = resolve_settings(dis_f);
      const PowerSeries series = load_series(dis_in, s, dis_res);
      const WhDetection d = detect_wh(series, s.detection);
      const DisaggregationResult r = disaggregate(series, d, s.disaggregation);
      write_file_atomic(dis_out, disaggregation_csv(series, r.wh_active));
      fs::path side = dis_periods;
      if (side.empty()) side = fs::path(dis_out).replace_extension(".periods.json");
      Json j = periods_json(series, r);
      j["detected"] = d.detected || s.disaggregation.rated_override_w.has_value();
      write_file_atomic(side, j.dump(2) + "\n");
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      return 0;
    }

    if (*ev) {
      const Settings s = resolve_settings(ev_f);
      CsvOptions total_opts;
      total_opts.p_col = "total_w";
      total_opts.q_col = "";
      const PowerSeries total = read_csv_file(ev_in, total_opts);
      if (!total.has_truth()) throw std::invalid_argument("input has no wh_true_w column");
      CsvOptions est_opts = total_opts;
      est_opts.p_col = "wh_est_w";
      const PowerSeries est = read_csv_file(ev_in, est_opts);

      bool detected = est.active().maxCoeff() > 0.0;
      bool used_reactive = false;
      std::optional<double> rated_est;
      if (!ev_periods.empty()) {
        const Json side = load_json(ev_periods);
        detected = side.value("detected", side.value("rated_w", 0.0) > 0.0);
        used_reactive = side.value("used_reactive", false);
        if (detected && side.contains("rated_w")) rated_est = side["rated_w"].get<double>();
      }
      const double rated = ev_rated_opt->count() ? ev_rated : total.truth().maxCoeff();
      if (!(rated > 0.0)) throw std::invalid_argument("truth is all zero; pass --true-rated-w");
      const EvalReport report = evaluate(total.truth(), est.active(), rated, total.step_minutes(), used_reactive,
                                         detected, s.activity_epsilon_w);
      Json j = to_json(report);
      j["true_rated_w"] = rated;
      emit(ev_json, j.dump(2) + "\n");
      if (!ev_metrics.empty()) {
        RunRecord row;
        row.house = ev_house.empty() ? fs::path(ev_in).stem().string() : ev_house;
        row.resolution_min = total.step_minutes();
        row.use_reactive = used_reactive;
        row.used_reactive = used_reactive;
        row.ok = true;
        row.detected = detected;
        row.rated_w = rated_est;
        row.eval = report;
        write_file_atomic(ev_metrics, metrics_csv({row}));
      }
      return 0;
    }

    if (*syn) {
      synth::Scenario scenario;
      std::string stem;
      if (syn_house == "custom") {
        scenario = syn_scenario.empty() ? synth::random_scenario(syn_seed, syn_days)
                                        : scenario_from_json(load_json(syn_scenario));
        if (syn->get_option("--seed")->count()) scenario.seed = syn_seed;
        if (syn->get_option("--days")->count()) scenario.days = syn_days;
        stem = "custom";
      } else {
        scenario = synth::calibrate_to_table1(std::stoi(syn_house), syn_seed, syn_days).scenario;
        stem = "house" + syn_house;
      }
      const auto g = synth::simulate(scenario);
      const fs::path out = syn_out;
      write_file_atomic(out / (stem + ".csv"), series_csv(g.total));
      Json sj = to_json(scenario);
      const auto st = synth::realized_stats(g);
      sj["realized"] = {{"median_on_min", st.median_on_min},
                        {"median_off_min", st.median_off_min},
                        {"energy_share", st.energy_share},
                        {"cycles", st.cycles}};
      write_file_atomic(out / "scenario.json", sj.dump(2) + "\n");
      write_file_atomic(out / "switch_log.csv", switch_log_csv(g, scenario.start_epoch_s));
      write_file_atomic(out / "period_sources.csv", period_sources_csv(g, scenario.start_epoch_s));
      return 0;
    }

    if (*pipe) {
      PipelineConfig cfg;
      const Json* settings_json = nullptr;
      Json file;
      if (!pipe_f.config.empty()) {
        file = load_json(pipe_f.config);
        // a manifest carries its config snapshot under "config"
        if (file.contains("config") && file.contains("runs")) file = file["config"];
        cfg = pipeline_config_from_json(file, cfg);
        if (file.contains("settings")) settings_json = &file["settings"];
      }
      cfg.settings = resolve_settings(pipe_f, settings_json);
      for (const auto& p : pipe_in) cfg.inputs.push_back({"", p, std::nullopt});
      if (pipe_res_opt->count()) cfg.resolutions = pipe_res;
      cfg.output_dir = pipe_out;
      cfg.workers = pipe_workers;
      cfg.timings = pipe_timings;
      const RunManifest m = run_pipeline(cfg);
      std::size_t failed = 0;
      for (const auto& r : m.runs)
        if (!r.ok) {
          ++failed;
          std::cerr << "failed: " << r.house << " @ " << r.resolution_min << " min"
                    << (r.use_reactive ? " (Q)" : "") << ": " << r.error << '\n';
        }
      std::cerr << m.runs.size() - failed << "/" << m.runs.size() << " runs completed; outputs in "
                << cfg.output_dir.string() << '\n';
      return failed ? 1 : 0;
    }

    if (*plot) {
      OverlaySelection sel;
      if (plot_house_opt->count()) sel.house = plot_house;
      if (plot_res_opt->count()) sel.resolution_min = plot_res;
      if (plot_q_opt->count()) sel.use_reactive = plot_q == "on";
      const fs::path manifest = plot_manifest;
      const fs::path out = plot_out.empty() ? manifest.parent_path() : fs::path(plot_out);
      run_plotdata(manifest, out, sel);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
