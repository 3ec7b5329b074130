#pragma once

#include "whd/timeseries.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace whd {

/// Fixed-width power histogram. Bin edges sit on multiples of `bin_width`
/// measured from 0 W; `origin` is the lower edge of the first stored bin.
struct Histogram {
  double bin_width = 200.0;
  double origin = 0.0;
  double lower_cutoff = 2000.0;
  Eigen::VectorXd densities;
  Eigen::VectorXi counts;
  Index total = 0;

  Index size() const { return densities.size(); }
  bool empty() const { return densities.size() == 0; }
  double bin_lower(Index i) const { return origin + static_cast<double>(i) * bin_width; }
  double bin_center(Index i) const { return bin_lower(i) + 0.5 * bin_width; }
};

struct LoadHistograms {
  Histogram upper;  ///< samples strictly above the cutoff
  Histogram base;   ///< samples in [0, cutoff), origin 0
};

struct TukeyFence {
  double q1 = 0.0;
  double q3 = 0.0;
  double median = 0.0;
  double threshold = 0.0;
};

struct OutlierBin {
  double center_w = 0.0;
  double density = 0.0;
};

struct TukeyResult {
  TukeyFence fence;
  std::vector<Index> outliers;  ///< ascending bin indices
};

/// Which outlier bin defines the rated power when several qualify.
enum class RatedBin { highest_power, densest };

struct DetectionConfig {
  RatedBin rated_bin = RatedBin::densest;
  double bin_width_w = 200.0;
  double min_power_w = 2000.0;
  double q_bin_width_var = 20.0;
  double q_floor_var = 100.0;
};

struct WhDetection {
  bool detected = false;
  std::optional<double> rated_active_w;
  double base_load_w = 0.0;
  std::optional<double> rated_reactive_var;
  std::vector<OutlierBin> outlier_bins;
  std::optional<TukeyFence> fence;
  LoadHistograms histograms;
  std::vector<std::string> warnings;
};

/// Quantile with linear interpolation between order statistics (R type 7).
template <typename Derived>
double quantile_type7(const Eigen::DenseBase<Derived>& values, double p) {
  std::vector<double> v(static_cast<std::size_t>(values.size()));
  for (Index i = 0; i < values.size(); ++i) v[static_cast<std::size_t>(i)] = values.derived().coeff(i);
  if (v.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

LoadHistograms build_histogram(const Eigen::Ref<const Eigen::VectorXd>& power, double bin_width, double lower_cutoff);
LoadHistograms build_histogram(const PowerSeries& series, double bin_width = 200.0, double lower_cutoff = 2000.0);

/// Bins whose density reaches Q3 + 1.5 IQR and also strictly exceeds the
/// median density. Quartiles include empty bins inside the span. Returns
/// nullopt when the histogram has fewer than four bins.
std::optional<TukeyResult> tukey_outlier_bins(const Histogram& hist);

/// Center of the lowest local-maximum bin whose density exceeds the median
/// density of the below-cutoff histogram. nullopt when that histogram is empty.
std::optional<double> estimate_base_load(const Histogram& base_hist);

WhDetection detect_wh(const PowerSeries& series, const DetectionConfig& config = {});

}  // namespace whd
