#pragma once

// Per-document ELBO terms shared by the static and dynamic models.

#include "etmkit/corpus.hpp"
#include "etmkit/etm.hpp"

namespace etm::detail {

// Gradient sinks; null members are skipped.
struct DocumentGrad {
  Encoder* encoder = nullptr;
  MatrixXd* beta = nullptr;        // K x V, d recon / d beta
  VectorXd* prior_mean = nullptr;  // K
  VectorXd* extra_input = nullptr; // K
};

struct DocumentValue {
  double reconstruction = 0.0;
  double kl = 0.0;
};

// Reconstruction sum_v x_v log(theta^T beta_v) and KL(q(theta) || N(prior_mean,
// prior_var I)) for one document. extra_input, when non-empty, occupies the
// trailing encoder input columns after the V normalized counts.
DocumentValue document_objective(const BowDocument& doc, const Encoder& encoder,
                                 const MatrixXd& beta, const VectorXd& extra_input,
                                 const VectorXd& prior_mean, double prior_var,
                                 const VectorXd& eps, DocumentGrad* grad);

// Backprop through row-wise softmax: given beta and d/d beta, d/d logits.
MatrixXd softmax_rows_backward(const MatrixXd& beta, const MatrixXd& dbeta);

// Sum over a Gaussian random-walk chain (rows = time steps) of the expected
// KL(q_t || N(mean_{t-1}, prior_var)), with the t = 0 term against N(0, I).
// The expectation over q_{t-1} adds trace(var_{t-1}) / (2 prior_var).
// Gradients (of the KL) are written when the output pointers are non-null.
double chain_kl(const MatrixXd& mean, const MatrixXd& logvar, double prior_var,
                MatrixXd* grad_mean, MatrixXd* grad_logvar);

}  // namespace etm::detail
