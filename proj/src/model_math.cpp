#include "etmkit/model_math.hpp"

#include <cmath>
#include <string>

#include "etmkit/error.hpp"

namespace etm {

VectorXd softmax(const VectorXd& x) {
  if (x.size() == 0) return x;
  const VectorXd e = (x.array() - x.maxCoeff()).exp();
  return e / e.sum();
}

MatrixXd softmax_rows(const MatrixXd& logits) {
  MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index k = 0; k < logits.rows(); ++k) {
    const double m = logits.row(k).maxCoeff();
    out.row(k) = (logits.row(k).array() - m).exp();
    out.row(k) /= out.row(k).sum();
  }
  return out;
}

VectorXd compute_beta(const MatrixXd& rho, const VectorXd& alpha_k) {
  if (rho.rows() != alpha_k.size())
    throw UsageError("compute_beta: embedding dimension " + std::to_string(rho.rows()) +
                     " does not match topic embedding length " + std::to_string(alpha_k.size()));
  return softmax(rho.transpose() * alpha_k);
}

MatrixXd compute_beta(const MatrixXd& rho, const MatrixXd& alpha) {
  if (rho.rows() != alpha.cols())
    throw UsageError("compute_beta: embedding dimension " + std::to_string(rho.rows()) +
                     " does not match topic embedding length " + std::to_string(alpha.cols()));
  return softmax_rows(alpha * rho);
}

double gaussian_kl(const VectorXd& mu_q, const VectorXd& var_q, const VectorXd& mu_p,
                   const VectorXd& var_p) {
  const auto n = mu_q.size();
  if (var_q.size() != n || mu_p.size() != n || var_p.size() != n)
    throw UsageError("gaussian_kl: dimension mismatch");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(var_q[i] > 0.0) || !(var_p[i] > 0.0))
      throw UsageError("gaussian_kl: variances must be positive");
    const double d = mu_p[i] - mu_q[i];
    kl += 0.5 * (var_q[i] / var_p[i] + d * d / var_p[i] - 1.0 + std::log(var_p[i] / var_q[i]));
  }
  return kl;
}

FlooredVariance floored_variance(double logvar) {
  const double v = std::exp(logvar);
  if (v > kVarianceFloor) return {v, v};
  return {kVarianceFloor, 0.0};
}

}  // namespace etm
