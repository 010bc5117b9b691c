#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace etm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Floors shared by the objectives.
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kVarianceFloor = 1e-6;

// Max-subtracted softmax.
VectorXd softmax(const VectorXd& x);

// Row-wise softmax of a matrix.
MatrixXd softmax_rows(const MatrixXd& logits);

// beta_k = softmax(rho^T alpha_k); rho is L x V.
VectorXd compute_beta(const MatrixXd& rho, const VectorXd& alpha_k);

// K x V topic matrix for K x L topic embeddings.
MatrixXd compute_beta(const MatrixXd& rho, const MatrixXd& alpha);

// KL(N(mu_q, diag var_q) || N(mu_p, diag var_p)); throws UsageError on a
// non-positive variance.
double gaussian_kl(const VectorXd& mu_q, const VectorXd& var_q, const VectorXd& mu_p,
                   const VectorXd& var_p);

// Variance from a log-variance with the floor applied; the second member is
// d var / d logvar (zero where the floor is active).
struct FlooredVariance {
  double var;
  double dvar_dlogvar;
};
FlooredVariance floored_variance(double logvar);

inline double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace etm
