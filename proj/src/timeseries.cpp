#include "whd/timeseries.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <vector>

namespace whd {

namespace {

constexpr std::array<int, 5> kSupportedSteps{1, 5, 10, 15, 30};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n\"");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n\"");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto comma = line.find(',', pos);
    out.push_back(trim(std::string_view(line).substr(pos, comma - pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

int to_int(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("bad integer field");
  return v;
}

void check_channel(const Eigen::VectorXd& v, Index n, const char* name) {
  if (v.size() != n) throw std::invalid_argument(std::string(name) + " channel length differs from active");
  if (!v.allFinite()) throw std::invalid_argument(std::string(name) + " channel has non-finite values");
}

struct Row {
  std::int64_t ts;
  double p;
  std::optional<double> q;
  std::optional<double> truth;
  std::size_t line;
};

}  // namespace

Resolution::Resolution(int minutes) : minutes_(minutes) {
  if (!supported(minutes))
    throw std::invalid_argument("unsupported resolution " + std::to_string(minutes) +
                                " min (expected 1, 5, 10, 15 or 30)");
}

bool Resolution::supported(int minutes) {
  return std::find(kSupportedSteps.begin(), kSupportedSteps.end(), minutes) != kSupportedSteps.end();
}

PowerSeries::PowerSeries(std::int64_t start_epoch_s, Resolution step, Eigen::VectorXd active,
                         std::optional<Eigen::VectorXd> reactive, std::optional<Eigen::VectorXd> truth)
    : start_(start_epoch_s),
      step_(step),
      active_(std::move(active)),
      reactive_(std::move(reactive)),
      truth_(std::move(truth)) {
  if (active_.size() == 0) throw std::invalid_argument("power series must be non-empty");
  if (!active_.allFinite()) throw std::invalid_argument("active power has non-finite values");
  if ((active_.array() < 0.0).any()) throw std::invalid_argument("active power must be non-negative");
  if (reactive_) check_channel(*reactive_, active_.size(), "reactive");
  if (truth_) check_channel(*truth_, active_.size(), "truth");
}

const Eigen::VectorXd& PowerSeries::reactive() const {
  if (!reactive_) throw std::logic_error("series has no reactive channel");
  return *reactive_;
}

const Eigen::VectorXd& PowerSeries::truth() const {
  if (!truth_) throw std::logic_error("series has no truth channel");
  return *truth_;
}

PowerSeries PowerSeries::without_reactive() const {
  return PowerSeries(start_, step_, active_, std::nullopt, truth_);
}

bool operator==(const PowerSeries& a, const PowerSeries& b) {
  return a.start_ == b.start_ && a.step_ == b.step_ && a.active_ == b.active_ &&
         a.reactive_ == b.reactive_ && a.truth_ == b.truth_;
}

std::int64_t parse_timestamp(const std::string& text) {
  const std::string s = trim(text);
  if (s.empty()) throw std::invalid_argument("empty timestamp");
  if (s.find('-', 1) == std::string::npos) {
    // epoch seconds, fractional part tolerated
    auto v = parse_number(s);
    if (!v || !std::isfinite(*v)) throw std::invalid_argument("unparseable timestamp '" + s + "'");
    return static_cast<std::int64_t>(std::llround(*v));
  }
  // YYYY-MM-DD[T| ]HH:MM[:SS[.fff]][Z|+HH:MM|-HH:MM]
  if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
    throw std::invalid_argument("unparseable timestamp '" + s + "'");
  try {
    using namespace std::chrono;
    const int y = to_int(std::string_view(s).substr(0, 4));
    const int mo = to_int(std::string_view(s).substr(5, 2));
    const int d = to_int(std::string_view(s).substr(8, 2));
    const int hh = to_int(std::string_view(s).substr(11, 2));
    const int mm = to_int(std::string_view(s).substr(14, 2));
    std::size_t pos = 16;
    double sec = 0;
    if (pos < s.size() && s[pos] == ':') {
      std::size_t end = pos + 1;
      while (end < s.size() && (std::isdigit(static_cast<unsigned char>(s[end])) || s[end] == '.')) ++end;
      auto v = parse_number(s.substr(pos + 1, end - pos - 1));
      if (!v) throw std::invalid_argument("bad seconds");
      sec = *v;
      pos = end;
    }
    std::int64_t offset = 0;
    if (pos < s.size()) {
      const std::string tz = s.substr(pos);
      if (tz == "Z" || tz == "z") {
      } else if ((tz[0] == '+' || tz[0] == '-') && tz.size() == 6 && tz[3] == ':') {
        offset = (to_int(std::string_view(tz).substr(1, 2)) * 60 + to_int(std::string_view(tz).substr(4, 2))) * 60;
        if (tz[0] == '-') offset = -offset;
      } else {
        throw std::invalid_argument("bad zone");
      }
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh > 23 || mm > 59 || sec < 0 || sec >= 61) throw std::invalid_argument("field range");
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days) * 86400 + hh * 3600 + mm * 60 + std::llround(sec) - offset;
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("unparseable timestamp '" + s + "'");
  }
}

std::string format_timestamp(std::int64_t epoch_s) {
  using namespace std::chrono;
  std::int64_t days = epoch_s / 86400;
  std::int64_t rem = epoch_s % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
  return buf;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

PowerSeries parse_csv(std::istream& in, const CsvOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty input", 0);
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split_fields(line);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto ts_idx = column(options.ts_col);
  const auto p_idx = column(options.p_col);
  if (!ts_idx) throw ParseError("missing timestamp column '" + options.ts_col + "'", 1);
  if (!p_idx) throw ParseError("missing active power column '" + options.p_col + "'", 1);
  const auto q_idx = column(options.q_col);
  const auto truth_idx = column(options.truth_col);

  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    auto field = [&](std::optional<std::size_t> idx) -> std::string {
      return idx && *idx < f.size() ? f[*idx] : std::string{};
    };
    Row row{};
    row.line = lineno;
    try {
      row.ts = parse_timestamp(field(ts_idx));
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), lineno);
    }
    auto p = parse_number(field(p_idx));
    if (!p || !std::isfinite(*p)) throw ParseError("malformed active power '" + field(p_idx) + "'", lineno);
    if (*p < 0) throw ParseError("negative active power", lineno);
    row.p = *p;
    if (const auto qs = field(q_idx); !qs.empty()) {
      row.q = parse_number(qs);
      if (!row.q || !std::isfinite(*row.q)) throw ParseError("malformed reactive power '" + qs + "'", lineno);
    }
    if (const auto ts = field(truth_idx); !ts.empty()) {
      row.truth = parse_number(ts);
      if (!row.truth || !std::isfinite(*row.truth)) throw ParseError("malformed truth value '" + ts + "'", lineno);
    } else if (truth_idx) {
      throw ParseError("missing truth value", lineno);
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw ParseError("no data rows", 0);
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.ts < b.ts; });

  int step_min = 0;
  if (options.step_minutes) {
    step_min = *options.step_minutes;
  } else {
    if (rows.size() < 2) throw ParseError("cannot infer the sampling step from a single row", rows.front().line);
    std::map<std::int64_t, std::size_t> gaps;
    for (std::size_t i = 1; i < rows.size(); ++i) ++gaps[rows[i].ts - rows[i - 1].ts];
    auto modal = std::max_element(gaps.begin(), gaps.end(),
                                  [](const auto& a, const auto& b) { return a.second < b.second; });
    if (modal->first % 60 != 0) throw ParseError("modal sample spacing is not a whole number of minutes", 0);
    step_min = static_cast<int>(modal->first / 60);
  }
  if (!Resolution::supported(step_min))
    throw ParseError("sampling step of " + std::to_string(step_min) + " min is not supported", 0);
  const std::int64_t step_s = std::int64_t{step_min} * 60;

  const bool all_q = std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.q.has_value(); });
  const bool has_truth = truth_idx.has_value();

  std::vector<double> p, q, t;
  auto push = [&](double pv, double qv, double tv) {
    p.push_back(pv);
    q.push_back(qv);
    t.push_back(tv);
  };
  push(rows[0].p, rows[0].q.value_or(0.0), rows[0].truth.value_or(0.0));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& prev = rows[i - 1];
    const auto& cur = rows[i];
    const std::int64_t gap = cur.ts - prev.ts;
    if (gap == 0) throw ParseError("duplicate timestamp", cur.line);
    if (gap != step_s) {
      const bool fillable = options.fill_gaps && gap % step_s == 0 && gap / step_s - 1 <= options.max_fill_steps;
      if (!fillable) {
        if (options.fill_gaps && gap % step_s == 0)
          throw ParseError("gap of " + std::to_string(gap / step_s - 1) + " missing samples exceeds fill limit",
                           cur.line);
        throw ParseError("non-uniform step", cur.line);
      }
      const std::int64_t n = gap / step_s;
      for (std::int64_t k = 1; k < n; ++k) {
        const double w = static_cast<double>(k) / static_cast<double>(n);
        push(prev.p + w * (cur.p - prev.p), prev.q.value_or(0.0) + w * (cur.q.value_or(0.0) - prev.q.value_or(0.0)),
             prev.truth.value_or(0.0) + w * (cur.truth.value_or(0.0) - prev.truth.value_or(0.0)));
      }
    }
    push(cur.p, cur.q.value_or(0.0), cur.truth.value_or(0.0));
  }

  auto to_vec = [](const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()).eval(); };
  std::optional<Eigen::VectorXd> qv, tv;
  if (q_idx && all_q) qv = to_vec(q);
  if (has_truth) tv = to_vec(t);
  return PowerSeries(rows.front().ts, Resolution(step_min), to_vec(p), std::move(qv), std::move(tv));
}

PowerSeries read_csv_file(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_csv(in, options);
}

void write_csv(std::ostream& out, const PowerSeries& series) {
  out << "timestamp,active_w";
  if (series.has_reactive()) out << ",reactive_var";
  if (series.has_truth()) out << ",wh_true_w";
  out << '\n';
  for (Index i = 0; i < series.size(); ++i) {
    out << format_timestamp(series.timestamp(i)) << ',' << format_double(series.active()[i]);
    if (series.has_reactive()) out << ',' << format_double(series.reactive()[i]);
    if (series.has_truth()) out << ',' << format_double(series.truth()[i]);
    out << '\n';
  }
}

PowerSeries resample(const PowerSeries& series, Resolution target) {
  const int src = series.step_minutes();
  if (target.minutes() % src != 0)
    throw std::invalid_argument("target resolution " + std::to_string(target.minutes()) +
                                " min is not a multiple of " + std::to_string(src) + " min");
  const Index k = target.minutes() / src;
  if (k == 1) return series;
  if (series.size() < k) throw std::invalid_argument("series shorter than one target window");
  std::optional<Eigen::VectorXd> q, t;
  if (series.has_reactive()) q = detail::block_means(series.reactive(), k);
  if (series.has_truth()) t = detail::block_means(series.truth(), k);
  Eigen::VectorXd p = detail::block_means(series.active(), k);
  // rounding in the mean must not produce tiny negatives
  p = p.cwiseMax(0.0);
  return PowerSeries(series.start(), target, std::move(p), std::move(q), std::move(t));
}

}  // namespace whd
