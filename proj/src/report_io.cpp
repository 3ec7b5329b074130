#include "whd/report_io.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace whd {

namespace {

void check_keys(const Json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw std::invalid_argument(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw std::invalid_argument("unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
void take(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string_view to_string(RatedBin r) { return r == RatedBin::densest ? "densest" : "highest_power"; }

RatedBin parse_rated_bin(const std::string& s) {
  if (s == "densest") return RatedBin::densest;
  if (s == "highest_power") return RatedBin::highest_power;
  throw std::invalid_argument("rated_bin must be 'densest' or 'highest_power'");
}

Json hours_json(const synth::HourWeights& h) { return Json(std::vector<double>(h.begin(), h.end())); }

synth::HourWeights hours_from(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 24) throw std::invalid_argument("schedule weights need 24 entries");
  synth::HourWeights h{};
  std::copy(v.begin(), v.end(), h.begin());
  return h;
}

Json lognormal_json(const synth::Lognormal& l) { return Json{{"median", l.median}, {"sigma", l.sigma}}; }

synth::Lognormal lognormal_from(const Json& j) {
  check_keys(j, "lognormal", {"median", "sigma"});
  synth::Lognormal l;
  take(j, "median", l.median);
  take(j, "sigma", l.sigma);
  return l;
}

}  // namespace

Json to_json(const Settings& s) {
  Json csv{{"ts_col", s.csv.ts_col},       {"p_col", s.csv.p_col},         {"q_col", s.csv.q_col},
           {"truth_col", s.csv.truth_col}, {"fill_gaps", s.csv.fill_gaps}, {"max_fill_steps", s.csv.max_fill_steps}};
  csv["step_minutes"] = s.csv.step_minutes ? Json(*s.csv.step_minutes) : Json(nullptr);
  const auto& d = s.detection;
  Json det{{"rated_bin", to_string(d.rated_bin)},
           {"bin_width_w", d.bin_width_w},
           {"min_power_w", d.min_power_w},
           {"q_bin_width_var", d.q_bin_width_var},
           {"q_floor_var", d.q_floor_var}};
  const auto& g = s.disaggregation;
  Json dis{{"margin", g.margin},
           {"max_on_min", g.max_on_minutes},
           {"use_reactive", to_string(g.use_reactive)},
           {"rated_w", optional_number(g.rated_override_w)},
           {"coincidence_window", g.coincidence_window},
           {"edge_fraction", g.edge_fraction},
           {"ramp_fraction", g.ramp_fraction},
           {"ramp_window", g.ramp_window}};
  return Json{{"csv", csv}, {"detection", det}, {"disaggregation", dis}, {"activity_epsilon_w", s.activity_epsilon_w}};
}

Settings settings_from_json(const Json& j, Settings s) {
  check_keys(j, "settings", {"csv", "detection", "disaggregation", "activity_epsilon_w"});
  if (j.contains("csv")) {
    const auto& c = j["csv"];
    check_keys(c, "csv", {"ts_col", "p_col", "q_col", "truth_col", "fill_gaps", "max_fill_steps", "step_minutes"});
    take(c, "ts_col", s.csv.ts_col);
    take(c, "p_col", s.csv.p_col);
    take(c, "q_col", s.csv.q_col);
    take(c, "truth_col", s.csv.truth_col);
    take(c, "fill_gaps", s.csv.fill_gaps);
    take(c, "max_fill_steps", s.csv.max_fill_steps);
    if (c.contains("step_minutes"))
      s.csv.step_minutes = c["step_minutes"].is_null() ? std::nullopt : std::optional<int>(c["step_minutes"].get<int>());
  }
  if (j.contains("detection")) {
    const auto& d = j["detection"];
    check_keys(d, "detection", {"rated_bin", "bin_width_w", "min_power_w", "q_bin_width_var", "q_floor_var"});
    if (d.contains("rated_bin")) s.detection.rated_bin = parse_rated_bin(d["rated_bin"].get<std::string>());
    take(d, "bin_width_w", s.detection.bin_width_w);
    take(d, "min_power_w", s.detection.min_power_w);
    take(d, "q_bin_width_var", s.detection.q_bin_width_var);
    take(d, "q_floor_var", s.detection.q_floor_var);
  }
  if (j.contains("disaggregation")) {
    const auto& g = j["disaggregation"];
    check_keys(g, "disaggregation",
               {"margin", "max_on_min", "use_reactive", "rated_w", "coincidence_window", "edge_fraction",
                "ramp_fraction", "ramp_window"});
    auto& o = s.disaggregation;
    take(g, "margin", o.margin);
    take(g, "max_on_min", o.max_on_minutes);
    if (g.contains("use_reactive")) o.use_reactive = parse_reactive_mode(g["use_reactive"].get<std::string>());
    if (g.contains("rated_w"))
      o.rated_override_w = g["rated_w"].is_null() ? std::nullopt : std::optional<double>(g["rated_w"].get<double>());
    take(g, "coincidence_window", o.coincidence_window);
    take(g, "edge_fraction", o.edge_fraction);
    take(g, "ramp_fraction", o.ramp_fraction);
    take(g, "ramp_window", o.ramp_window);
  }
  take(j, "activity_epsilon_w", s.activity_epsilon_w);
  // the reactive histogram is configured once, under detection
  s.disaggregation.q_bin_width_var = s.detection.q_bin_width_var;
  s.disaggregation.q_floor_var = s.detection.q_floor_var;
  return s;
}

Json to_json(const WhDetection& d) {
  Json bins = Json::array();
  for (const auto& b : d.outlier_bins) bins.push_back({{"center_w", b.center_w}, {"density", b.density}});
  Json out{{"detected", d.detected},
           {"rated_w", optional_number(d.rated_active_w)},
           {"base_w", d.base_load_w},
           {"rated_reactive_var", optional_number(d.rated_reactive_var)},
           {"outlier_bins", bins}};
  if (d.fence) {
    out["fence"] = {{"q1", d.fence->q1}, {"q3", d.fence->q3}, {"median", d.fence->median},
                    {"threshold", d.fence->threshold}};
  } else {
    out["fence"] = nullptr;
  }
  out["warnings"] = d.warnings;
  return out;
}

Json to_json(const EvalReport& r) {
  Json out{{"resolution_min", r.resolution_minutes}, {"used_reactive", r.used_reactive}, {"detected", r.detected}};
  if (r.point) {
    out["point"] = {{"me_w", r.point->me}, {"mae_w", r.point->mae}, {"nmae_pct", r.point->nmae}};
  } else {
    out["point"] = nullptr;
  }
  const auto& c = r.classes;
  out["classification"] = {{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1},
                           {"tp", c.tp},               {"fp", c.fp},         {"fn", c.fn}};
  return out;
}

Json periods_json(const PowerSeries& series, const DisaggregationResult& r) {
  Json periods = Json::array();
  const int step = series.step_minutes();
  for (const auto& p : r.periods) {
    periods.push_back({{"start", format_timestamp(series.timestamp(p.start))},
                       {"end", format_timestamp(series.timestamp(p.end))},
                       {"start_index", p.start},
                       {"end_index", p.end},
                       {"up_index", p.up_index},
                       {"down_index", p.down_index},
                       {"duration_min", p.duration_minutes(step)},
                       {"kept", p.kept},
                       {"filter_reason", to_string(p.filter_reason)}});
  }
  return Json{{"resolution_min", step},
              {"rated_w", r.rated_active_w},
              {"used_reactive", r.used_reactive},
              {"rated_reactive_var", optional_number(r.rated_reactive_var)},
              {"kept", r.kept_count()},
              {"periods", periods},
              {"warnings", r.warnings}};
}

Json to_json(const synth::Scenario& s) {
  Json apps = Json::array();
  for (const auto& a : s.appliances) {
    apps.push_back({{"name", a.name},
                    {"rated_active_w", a.rated_active_w},
                    {"rated_reactive_var", a.rated_reactive_var},
                    {"on_duration_min", lognormal_json(a.on_duration_min)},
                    {"daily_cycles", a.daily_cycles},
                    {"schedule_weights", hours_json(a.schedule_weights)},
                    {"power_jitter", a.power_jitter},
                    {"burst_on_min", lognormal_json(a.burst_on_min)},
                    {"burst_off_min", lognormal_json(a.burst_off_min)},
                    {"background", a.background},
                    {"segment_min", lognormal_json(a.segment_min)},
                    {"ramp_min", a.ramp_min}});
  }
  const auto& w = s.wh;
  return Json{{"seed", s.seed},
              {"days", s.days},
              {"start", format_timestamp(s.start_epoch_s)},
              {"wh",
               {{"rated_power_w", w.rated_power_w},
                {"tank_volume_l", w.tank_volume_l},
                {"setpoint_c", w.setpoint_c},
                {"deadband_c", w.deadband_c},
                {"loss_coeff_w_per_c", w.loss_coeff_w_per_c},
                {"inlet_temp_c", w.inlet_temp_c},
                {"ambient_temp_c", w.ambient_temp_c},
                {"efficiency", w.efficiency}}},
              {"appliances", apps},
              {"base_load_w", s.base_load_w},
              {"base_reactive_var", s.base_reactive_var},
              {"draws",
               {{"daily_draws", s.draws.daily_draws},
                {"volume_l", lognormal_json(s.draws.volume_l)},
                {"flow_lpm", s.draws.flow_lpm},
                {"schedule_weights", hours_json(s.draws.schedule_weights)}}},
              {"noise_sd_w", s.noise_sd_w},
              {"reactive_noise_sd_var", s.reactive_noise_sd_var},
              {"initial_temp_c", s.initial_temp_c}};
}

synth::Scenario scenario_from_json(const Json& j) {
  check_keys(j, "scenario",
             {"seed", "days", "start", "wh", "appliances", "base_load_w", "base_reactive_var", "draws", "noise_sd_w",
              "reactive_noise_sd_var", "initial_temp_c"});
  synth::Scenario s;
  take(j, "seed", s.seed);
  take(j, "days", s.days);
  if (j.contains("start")) s.start_epoch_s = parse_timestamp(j["start"].get<std::string>());
  if (j.contains("wh")) {
    const auto& w = j["wh"];
    check_keys(w, "wh",
               {"rated_power_w", "tank_volume_l", "setpoint_c", "deadband_c", "loss_coeff_w_per_c", "inlet_temp_c",
                "ambient_temp_c", "efficiency"});
    take(w, "rated_power_w", s.wh.rated_power_w);
    take(w, "tank_volume_l", s.wh.tank_volume_l);
    take(w, "setpoint_c", s.wh.setpoint_c);
    take(w, "deadband_c", s.wh.deadband_c);
    take(w, "loss_coeff_w_per_c", s.wh.loss_coeff_w_per_c);
    take(w, "inlet_temp_c", s.wh.inlet_temp_c);
    take(w, "ambient_temp_c", s.wh.ambient_temp_c);
    take(w, "efficiency", s.wh.efficiency);
  }
  if (j.contains("appliances")) {
    for (const auto& a : j["appliances"]) {
      check_keys(a, "appliance",
                 {"name", "rated_active_w", "rated_reactive_var", "on_duration_min", "daily_cycles",
                  "schedule_weights", "power_jitter", "burst_on_min", "burst_off_min", "background", "segment_min",
                  "ramp_min"});
      synth::ApplianceModel m;
      take(a, "name", m.name);
      take(a, "rated_active_w", m.rated_active_w);
      take(a, "rated_reactive_var", m.rated_reactive_var);
      if (a.contains("on_duration_min")) m.on_duration_min = lognormal_from(a["on_duration_min"]);
      take(a, "daily_cycles", m.daily_cycles);
      if (a.contains("schedule_weights")) m.schedule_weights = hours_from(a["schedule_weights"]);
      take(a, "power_jitter", m.power_jitter);
      if (a.contains("burst_on_min")) m.burst_on_min = lognormal_from(a["burst_on_min"]);
      if (a.contains("burst_off_min")) m.burst_off_min = lognormal_from(a["burst_off_min"]);
      take(a, "background", m.background);
      if (a.contains("segment_min")) m.segment_min = lognormal_from(a["segment_min"]);
      take(a, "ramp_min", m.ramp_min);
      s.appliances.push_back(std::move(m));
    }
  }
  take(j, "base_load_w", s.base_load_w);
  take(j, "base_reactive_var", s.base_reactive_var);
  if (j.contains("draws")) {
    const auto& d = j["draws"];
    check_keys(d, "draws", {"daily_draws", "volume_l", "flow_lpm", "schedule_weights"});
    take(d, "daily_draws", s.draws.daily_draws);
    if (d.contains("volume_l")) s.draws.volume_l = lognormal_from(d["volume_l"]);
    take(d, "flow_lpm", s.draws.flow_lpm);
    if (d.contains("schedule_weights")) s.draws.schedule_weights = hours_from(d["schedule_weights"]);
  }
  take(j, "noise_sd_w", s.noise_sd_w);
  take(j, "reactive_noise_sd_var", s.reactive_noise_sd_var);
  take(j, "initial_temp_c", s.initial_temp_c);
  synth::validate(s);
  return s;
}

std::string histogram_csv(const Histogram& h) {
  std::string out = "bin_center_w,density\n";
  for (Index i = 0; i < h.size(); ++i)
    out += format_double(h.bin_center(i)) + ',' + format_double(h.densities[i]) + '\n';
  return out;
}

std::string disaggregation_csv(const PowerSeries& series, const Eigen::VectorXd& wh_est) {
  if (wh_est.size() != series.size()) throw std::invalid_argument("estimate length differs from series");
  std::string out = series.has_truth() ? "timestamp,total_w,wh_est_w,wh_true_w\n" : "timestamp,total_w,wh_est_w\n";
  for (Index i = 0; i < series.size(); ++i) {
    out += format_timestamp(series.timestamp(i));
    out += ',' + format_double(series.active()[i]) + ',' + format_double(wh_est[i]);
    if (series.has_truth()) out += ',' + format_double(series.truth()[i]);
    out += '\n';
  }
  return out;
}

std::string switch_log_csv(const synth::GroundTruth& g, std::int64_t start_epoch_s) {
  std::string out = "time_s,timestamp,state\n";
  for (const auto& e : g.switch_log)
    out += std::to_string(e.time_s) + ',' + format_timestamp(start_epoch_s + e.time_s) + ',' + (e.on ? "on" : "off") +
           '\n';
  return out;
}

std::string period_sources_csv(const synth::GroundTruth& g, std::int64_t start_epoch_s) {
  std::string out = "start,end,source\n";
  for (const auto& p : g.period_sources)
    out += format_timestamp(start_epoch_s + p.start_s) + ',' + format_timestamp(start_epoch_s + p.end_s) + ',' +
           p.source + '\n';
  return out;
}

std::string series_csv(const PowerSeries& series) {
  std::ostringstream os;
  write_csv(os, series);
  return os.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace whd
