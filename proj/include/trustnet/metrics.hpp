#ifndef TRUSTNET_METRICS_HPP
#define TRUSTNET_METRICS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace trustnet {

/// Identification quality for one recovered system.
/// support_errors counts symmetric support disagreements on the
/// normal-to-normal block at the stated binarization threshold.
struct EvalReport {
  double nmse_D = 0.0;
  double nmse_B = 0.0;
  long support_errors = 0;
  double threshold = 0.0;
};

/// Entrywise squared error over the squared mass of the truth.
inline double normalized_mse(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw std::invalid_argument("normalized_mse: shape mismatch");
  const double denom = truth.squaredNorm();
  if (denom == 0.0) throw std::invalid_argument("normalized_mse: truth is identically zero");
  return (estimate - truth).squaredNorm() / denom;
}

/// Symmetric support disagreements. The estimate is binarized at
/// |entry| > threshold; the truth counts as nonzero exactly when it is.
/// l1 solves return dust instead of exact zeros, hence the asymmetry.
inline long support_error(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth,
                          double threshold = 1e-6) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw std::invalid_argument("support_error: shape mismatch");
  if (threshold < 0.0) throw std::invalid_argument("support_error: negative threshold");
  long count = 0;
  for (Eigen::Index j = 0; j < truth.cols(); ++j)
    for (Eigen::Index i = 0; i < truth.rows(); ++i) {
      const bool est_nz = std::abs(estimate(i, j)) > threshold;
      const bool tru_nz = truth(i, j) != 0.0;
      if (est_nz != tru_nz) ++count;
    }
  return count;
}

inline EvalReport evaluate(const Eigen::MatrixXd& B_hat, const Eigen::MatrixXd& D_hat,
                           const Eigen::MatrixXd& B_truth, const Eigen::MatrixXd& D_truth,
                           double threshold = 1e-6) {
  EvalReport r;
  r.nmse_D = normalized_mse(D_hat, D_truth);
  r.nmse_B = normalized_mse(B_hat, B_truth);
  r.support_errors = support_error(D_hat, D_truth, threshold);
  r.threshold = threshold;
  return r;
}

} // namespace trustnet

#endif
