#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>

namespace whd {

struct PointErrors {
  double me = 0.0;
  double mae = 0.0;
  double nmae = 0.0;  ///< percent of rated power
};

struct ClassReport {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 0.0;
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

struct EvalReport {
  std::optional<PointErrors> point;  ///< empty when no water heater was detected
  ClassReport classes;
  int resolution_minutes = 0;
  bool used_reactive = false;
  bool detected = false;
};

/// ME, MAE and NMAE of `est` against `truth`; `rated_w` is the true rated power.
template <typename DerivedA, typename DerivedB>
PointErrors point_errors(const Eigen::MatrixBase<DerivedA>& truth, const Eigen::MatrixBase<DerivedB>& est,
                         double rated_w) {
  if (truth.size() != est.size()) throw std::invalid_argument("truth and estimate lengths differ");
  if (truth.size() == 0) throw std::invalid_argument("empty vectors");
  if (!(rated_w > 0.0)) throw std::invalid_argument("rated power must be positive");
  const auto diff = (est.template cast<double>() - truth.template cast<double>()).array();
  PointErrors e;
  e.me = diff.mean();
  e.mae = diff.abs().mean();
  e.nmae = 100.0 * e.mae / rated_w;
  return e;
}

/// Per-step event classification; a step is an event when power exceeds
/// `activity_epsilon`. Empty denominators score precision/recall as 1.
template <typename DerivedA, typename DerivedB>
ClassReport classification(const Eigen::MatrixBase<DerivedA>& truth, const Eigen::MatrixBase<DerivedB>& est,
                           double activity_epsilon = 1.0) {
  if (truth.size() != est.size()) throw std::invalid_argument("truth and estimate lengths differ");
  if (activity_epsilon < 0.0) throw std::invalid_argument("activity epsilon must be non-negative");
  const auto t = (truth.template cast<double>().array() > activity_epsilon);
  const auto e = (est.template cast<double>().array() > activity_epsilon);
  ClassReport r;
  r.tp = (t && e).count();
  r.fp = (!t && e).count();
  r.fn = (t && !e).count();
  r.precision = r.tp + r.fp == 0 ? 1.0 : static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  r.recall = r.tp + r.fn == 0 ? 1.0 : static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  const double s = r.precision + r.recall;
  r.f1 = s == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / s;
  return r;
}

EvalReport evaluate(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& est,
                    double true_rated_w, int resolution_minutes, bool used_reactive, bool detected,
                    double activity_epsilon = 1.0);

}  // namespace whd
