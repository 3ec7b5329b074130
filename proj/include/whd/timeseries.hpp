#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

namespace whd {

using Index = Eigen::Index;

/// Raised for malformed meter input. `line()` is the 1-based line in the
/// source file (the header is line 1), or 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? what + " at line " + std::to_string(line) : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Sampling resolution in minutes. Only meter-typical values are accepted.
class Resolution {
 public:
  explicit Resolution(int minutes);
  int minutes() const { return minutes_; }
  static bool supported(int minutes);
  friend bool operator==(Resolution, Resolution) = default;

 private:
  int minutes_;
};

/// Uniformly sampled building-level power. Channels are stored column-wise;
/// timestamps are implicit (start + i * step) and held as UTC epoch seconds.
///
/// The optional truth channel carries sub-metered water-heater power. It rides
/// along through resampling and CSV round trips but is only read by metrics.
class PowerSeries {
 public:
  PowerSeries(std::int64_t start_epoch_s, Resolution step, Eigen::VectorXd active,
              std::optional<Eigen::VectorXd> reactive = std::nullopt,
              std::optional<Eigen::VectorXd> truth = std::nullopt);

  Index size() const { return active_.size(); }
  Resolution step() const { return step_; }
  int step_minutes() const { return step_.minutes(); }
  std::int64_t start() const { return start_; }
  std::int64_t timestamp(Index i) const { return start_ + i * std::int64_t{step_.minutes()} * 60; }

  const Eigen::VectorXd& active() const { return active_; }
  bool has_reactive() const { return reactive_.has_value(); }
  const Eigen::VectorXd& reactive() const;
  bool has_truth() const { return truth_.has_value(); }
  const Eigen::VectorXd& truth() const;

  PowerSeries without_reactive() const;

  friend bool operator==(const PowerSeries&, const PowerSeries&);

 private:
  std::int64_t start_;
  Resolution step_;
  Eigen::VectorXd active_;
  std::optional<Eigen::VectorXd> reactive_;
  std::optional<Eigen::VectorXd> truth_;
};

struct CsvOptions {
  std::string ts_col = "timestamp";
  std::string p_col = "active_w";
  std::string q_col = "reactive_var";
  std::string truth_col = "wh_true_w";
  bool fill_gaps = false;
  /// Longest hole (in missing samples) that fill_gaps will interpolate.
  int max_fill_steps = 3;
  /// Required when the input has a single row; otherwise the modal gap wins.
  std::optional<int> step_minutes;
};

/// Reads `timestamp,active_w[,reactive_var[,wh_true_w]]` (column names are
/// configurable). Timestamps are ISO-8601 (UTC or with a numeric offset) or
/// epoch seconds. A reactive or truth column that is blank on some rows is
/// treated as absent for the reactive channel and rejected for truth.
PowerSeries parse_csv(std::istream& in, const CsvOptions& options = {});
PowerSeries read_csv_file(const std::string& path, const CsvOptions& options = {});

void write_csv(std::ostream& out, const PowerSeries& series);

/// Block-averages every channel over windows of target/step samples. Windows
/// anchor at the first sample; a trailing partial window is dropped.
PowerSeries resample(const PowerSeries& series, Resolution target);

std::int64_t parse_timestamp(const std::string& text);
std::string format_timestamp(std::int64_t epoch_s);
/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

namespace detail {

/// Mean over consecutive blocks of `k` entries; a trailing remainder is dropped.
template <typename Derived>
Eigen::VectorXd block_means(const Eigen::DenseBase<Derived>& values, Index k) {
  const Index windows = values.size() / k;
  Eigen::VectorXd out(windows);
  for (Index w = 0; w < windows; ++w) out[w] = values.derived().segment(w * k, k).mean();
  return out;
}

}  // namespace detail

}  // namespace whd
