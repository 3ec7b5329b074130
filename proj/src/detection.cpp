#include "whd/detection.hpp"

#include "whd/disaggregation.hpp"

#include <algorithm>
#include <cmath>

namespace whd {

namespace {

Histogram make_histogram(double bin_width, double cutoff, Index first_bin, Index bins) {
  Histogram h;
  h.bin_width = bin_width;
  h.lower_cutoff = cutoff;
  h.origin = static_cast<double>(first_bin) * bin_width;
  h.counts = Eigen::VectorXi::Zero(bins);
  h.densities = Eigen::VectorXd::Zero(bins);
  return h;
}

void normalize(Histogram& h) {
  h.total = h.counts.sum();
  if (h.total > 0) h.densities = h.counts.cast<double>() / static_cast<double>(h.total);
}

}  // namespace

LoadHistograms build_histogram(const Eigen::Ref<const Eigen::VectorXd>& power, double bin_width,
                               double lower_cutoff) {
  if (power.size() == 0) throw std::invalid_argument("histogram of empty series");
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");
  if (lower_cutoff < 0.0) throw std::invalid_argument("cutoff must be non-negative");

  const auto bin_of = [&](double p) { return static_cast<Index>(std::floor(p / bin_width)); };

  LoadHistograms out;
  const double max_p = power.maxCoeff();
  if (max_p > lower_cutoff) {
    const Index first = bin_of(lower_cutoff);
    const Index last = bin_of(max_p);
    out.upper = make_histogram(bin_width, lower_cutoff, first, last - first + 1);
  } else {
    out.upper = make_histogram(bin_width, lower_cutoff, bin_of(lower_cutoff), 0);
  }
  const Index base_bins = std::max<Index>(1, static_cast<Index>(std::ceil(lower_cutoff / bin_width)));
  out.base = make_histogram(bin_width, lower_cutoff, 0, base_bins);

  const Index first_upper = bin_of(lower_cutoff);
  for (Index i = 0; i < power.size(); ++i) {
    const double p = power[i];
    if (p > lower_cutoff) {
      ++out.upper.counts[bin_of(p) - first_upper];
    } else if (p < lower_cutoff) {
      ++out.base.counts[std::min(bin_of(p), base_bins - 1)];
    }
  }
  normalize(out.upper);
  normalize(out.base);
  return out;
}

LoadHistograms build_histogram(const PowerSeries& series, double bin_width, double lower_cutoff) {
  return build_histogram(series.active(), bin_width, lower_cutoff);
}

std::optional<TukeyResult> tukey_outlier_bins(const Histogram& hist) {
  if (hist.size() < 4) return std::nullopt;
  TukeyResult r;
  r.fence.q1 = quantile_type7(hist.densities, 0.25);
  r.fence.q3 = quantile_type7(hist.densities, 0.75);
  r.fence.median = quantile_type7(hist.densities, 0.5);
  r.fence.threshold = r.fence.q3 + 1.5 * (r.fence.q3 - r.fence.q1);
  for (Index i = 0; i < hist.size(); ++i) {
    const double d = hist.densities[i];
    if (d >= r.fence.threshold && d > r.fence.median) r.outliers.push_back(i);
  }
  return r;
}

std::optional<double> estimate_base_load(const Histogram& base_hist) {
  if (base_hist.empty() || base_hist.total == 0) return std::nullopt;
  const auto& d = base_hist.densities;
  const double median = quantile_type7(d, 0.5);
  const Index n = d.size();
  for (Index i = 0; i < n; ++i) {
    const bool left_ok = i == 0 || d[i] >= d[i - 1];
    const bool right_ok = i == n - 1 || d[i] >= d[i + 1];
    if (left_ok && right_ok && d[i] > median) return base_hist.bin_center(i);
  }
  // uniform occupancy: nothing beats the median, fall back to the densest bin
  Index best = 0;
  d.maxCoeff(&best);
  return base_hist.bin_center(best);
}

WhDetection detect_wh(const PowerSeries& series, const DetectionConfig& config) {
  WhDetection out;
  out.histograms = build_histogram(series.active(), config.bin_width_w, config.min_power_w);

  if (auto base = estimate_base_load(out.histograms.base)) {
    out.base_load_w = *base;
  } else {
    out.base_load_w = 0.0;
    out.warnings.emplace_back("no samples below the cutoff; base load taken as 0 W");
  }

  if (series.has_reactive()) {
    out.rated_reactive_var = estimate_rated_reactive(series.reactive(), config.q_bin_width_var, config.q_floor_var);
  }

  const auto& upper = out.histograms.upper;
  if (upper.empty()) return out;
  auto tukey = tukey_outlier_bins(upper);
  if (!tukey) {
    out.warnings.emplace_back("fewer than four histogram bins above the cutoff");
    return out;
  }
  out.fence = tukey->fence;
  for (Index i : tukey->outliers) out.outlier_bins.push_back({upper.bin_center(i), upper.densities[i]});
  if (!out.outlier_bins.empty()) {
    out.detected = true;
    auto chosen = out.outlier_bins.back();
    if (config.rated_bin == RatedBin::densest)
      chosen = *std::max_element(out.outlier_bins.begin(), out.outlier_bins.end(),
                                 [](const OutlierBin& a, const OutlierBin& b) { return a.density < b.density; });
    out.rated_active_w = chosen.center_w - out.base_load_w;
  }
  return out;
}

}  // namespace whd
