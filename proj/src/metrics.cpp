#include "whd/metrics.hpp"

namespace whd {

EvalReport evaluate(const Eigen::Ref<const Eigen::VectorXd>& truth, const Eigen::Ref<const Eigen::VectorXd>& est,
                    double true_rated_w, int resolution_minutes, bool used_reactive, bool detected,
                    double activity_epsilon) {
  EvalReport r;
  r.resolution_minutes = resolution_minutes;
  r.used_reactive = used_reactive;
  r.detected = detected;
  if (detected) r.point = point_errors(truth, est, true_rated_w);
  r.classes = classification(truth, est, activity_epsilon);
  return r;
}

}  // namespace whd
