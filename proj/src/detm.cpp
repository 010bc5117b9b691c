#include "etmkit/detm.hpp"

#include <cmath>
#include <string>

#include "document_objective.hpp"
#include "etmkit/error.hpp"
#include "etmkit/hash.hpp"

namespace etm {
namespace {

// Stacks T matrices (each K x L) as the rows of a T x (K*L) matrix.
MatrixXd stack_rows(const std::vector<MatrixXd>& slices) {
  if (slices.empty()) return {};
  const Eigen::Index width = slices.front().size();
  MatrixXd out(static_cast<Eigen::Index>(slices.size()), width);
  for (std::size_t t = 0; t < slices.size(); ++t)
    out.row(static_cast<Eigen::Index>(t)) =
        Eigen::Map<const Eigen::RowVectorXd>(slices[t].data(), width);
  return out;
}

void unstack_rows(const MatrixXd& stacked, std::vector<MatrixXd>& slices) {
  for (std::size_t t = 0; t < slices.size(); ++t)
    Eigen::Map<Eigen::RowVectorXd>(slices[t].data(), slices[t].size()) =
        stacked.row(static_cast<Eigen::Index>(t));
}

MatrixXd sample_alpha(const MatrixXd& mean, const MatrixXd& logvar, const MatrixXd& eps) {
  MatrixXd out(mean.rows(), mean.cols());
  for (Eigen::Index i = 0; i < mean.size(); ++i)
    out(i) = mean(i) + std::sqrt(floored_variance(logvar(i)).var) * eps(i);
  return out;
}

}  // namespace

DetmParams DetmParams::zeros_like(const DetmParams& other) {
  DetmParams p;
  p.hyper = other.hyper;
  for (const auto& m : other.alpha_mean) p.alpha_mean.push_back(MatrixXd::Zero(m.rows(), m.cols()));
  for (const auto& m : other.alpha_logvar)
    p.alpha_logvar.push_back(MatrixXd::Zero(m.rows(), m.cols()));
  p.eta_mean = MatrixXd::Zero(other.eta_mean.rows(), other.eta_mean.cols());
  p.eta_logvar = MatrixXd::Zero(other.eta_logvar.rows(), other.eta_logvar.cols());
  p.encoder = Encoder::zeros(other.encoder.input_dim(), other.encoder.hidden_dim(),
                             other.encoder.num_topics());
  return p;
}

DetmParams DetmParams::init(Eigen::Index vocab_size, Eigen::Index embed_dim, Eigen::Index num_topics,
                            Eigen::Index num_slices, Eigen::Index hidden_dim,
                            const DetmHyper& hyper, Rng& rng) {
  if (num_slices < 1) throw UsageError("D-ETM needs at least one time slice");
  if (!(hyper.sigma2 > 0.0 && hyper.delta2 > 0.0 && hyper.gamma2 > 0.0))
    throw UsageError("D-ETM prior variances must be positive");
  DetmParams p;
  p.hyper = hyper;
  // All slices start from one shared draw so the walk begins flat.
  MatrixXd alpha0(num_topics, embed_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  for (Eigen::Index j = 0; j < embed_dim; ++j)
    for (Eigen::Index k = 0; k < num_topics; ++k) alpha0(k, j) = bound * (2.0 * rng.uniform() - 1.0);
  const double init_logvar = std::log(hyper.sigma2);
  for (Eigen::Index t = 0; t < num_slices; ++t) {
    p.alpha_mean.push_back(alpha0);
    p.alpha_logvar.push_back(MatrixXd::Constant(num_topics, embed_dim, init_logvar));
  }
  p.eta_mean = MatrixXd::Zero(num_slices, num_topics);
  p.eta_logvar = MatrixXd::Constant(num_slices, num_topics, std::log(hyper.delta2));
  p.encoder = Encoder::random(vocab_size + num_topics, hidden_dim, num_topics, rng);
  return p;
}

DetmNoise draw_detm_noise(std::span<const BowDocument> batch, const DetmParams& params,
                          std::uint64_t seed, std::uint64_t step) {
  DetmNoise noise;
  noise.theta_eps = draw_etm_noise(batch, params.num_topics(), seed, step).theta_eps;
  Rng rng(hash_combine(hash_combine(seed, step), fnv1a64("alpha")));
  for (const auto& m : params.alpha_mean) noise.alpha_eps.push_back(rng.normal_matrix(m.rows(), m.cols()));
  return noise;
}

double detm_alpha_chain_kl(const DetmParams& params) {
  return detail::chain_kl(stack_rows(params.alpha_mean), stack_rows(params.alpha_logvar),
                          params.hyper.sigma2, nullptr, nullptr);
}

double detm_eta_chain_kl(const DetmParams& params) {
  return detail::chain_kl(params.eta_mean, params.eta_logvar, params.hyper.delta2, nullptr, nullptr);
}

std::vector<MatrixXd> detm_mean_beta(const DetmParams& params, const MatrixXd& rho) {
  std::vector<MatrixXd> out;
  out.reserve(params.alpha_mean.size());
  for (const auto& a : params.alpha_mean) out.push_back(compute_beta(rho, a));
  return out;
}

DetmElbo elbo_detm(std::span<const BowDocument> batch, const DetmParams& params,
                   const MatrixXd& rho, const DetmNoise& noise, double global_weight,
                   bool with_grad) {
  if (batch.empty()) throw UsageError("elbo_detm: empty batch");
  const Eigen::Index T = params.num_slices();
  const Eigen::Index K = params.num_topics();
  if (noise.theta_eps.size() != batch.size() || static_cast<Eigen::Index>(noise.alpha_eps.size()) != T)
    throw UsageError("elbo_detm: noise does not match batch / slices");
  if (params.vocab_size() != rho.cols()) throw UsageError("elbo_detm: encoder input != V + K");
  for (const auto& doc : batch) {
    if (!doc.slice) throw DataError("document " + doc.doc_id + " has no time slice");
    if (static_cast<Eigen::Index>(*doc.slice) >= T)
      throw DataError("document " + doc.doc_id + " slice " + std::to_string(*doc.slice) +
                      " outside [0, " + std::to_string(T) + ")");
  }

  // beta^(t) from one reparameterized alpha draw per slice in use.
  std::vector<bool> used(static_cast<std::size_t>(T), false);
  for (const auto& doc : batch) used[*doc.slice] = true;
  std::vector<MatrixXd> alpha_draw(static_cast<std::size_t>(T));
  std::vector<MatrixXd> beta(static_cast<std::size_t>(T));
  std::vector<MatrixXd> dbeta(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    if (!used[t]) continue;
    alpha_draw[t] = sample_alpha(params.alpha_mean[t], params.alpha_logvar[t], noise.alpha_eps[t]);
    beta[t] = compute_beta(rho, alpha_draw[t]);
    if (with_grad) dbeta[t] = MatrixXd::Zero(beta[t].rows(), beta[t].cols());
  }

  DetmElbo out;
  if (with_grad) out.grad = DetmParams::zeros_like(params);
  VectorXd dprior(K), dextra(K);
  for (std::size_t d = 0; d < batch.size(); ++d) {
    const auto t = static_cast<Eigen::Index>(*batch[d].slice);
    const VectorXd eta_hat = params.eta_mean.row(t).transpose();
    detail::DocumentGrad grad;
    if (with_grad) {
      dprior.setZero();
      dextra.setZero();
      grad.encoder = &out.grad.encoder;
      grad.beta = &dbeta[t];
      grad.prior_mean = &dprior;
      grad.extra_input = &dextra;
    }
    const auto v = detail::document_objective(batch[d], params.encoder, beta[t], eta_hat, eta_hat,
                                              params.hyper.gamma2, noise.theta_eps[d],
                                              with_grad ? &grad : nullptr);
    out.value.reconstruction += v.reconstruction;
    out.value.local_kl += v.kl;
    // eta_mean[t] feeds both the prior mean and the encoder input.
    if (with_grad) out.grad.eta_mean.row(t) += (dprior + dextra).transpose();
  }

  MatrixXd ga_mean, ga_logvar, ge_mean, ge_logvar;
  const MatrixXd alpha_mean_rows = stack_rows(params.alpha_mean);
  const MatrixXd alpha_logvar_rows = stack_rows(params.alpha_logvar);
  out.value.global_kl_alpha =
      detail::chain_kl(alpha_mean_rows, alpha_logvar_rows, params.hyper.sigma2,
                       with_grad ? &ga_mean : nullptr, with_grad ? &ga_logvar : nullptr);
  out.value.global_kl_eta =
      detail::chain_kl(params.eta_mean, params.eta_logvar, params.hyper.delta2,
                       with_grad ? &ge_mean : nullptr, with_grad ? &ge_logvar : nullptr);
  out.value.elbo = out.value.reconstruction - out.value.local_kl -
                   global_weight * (out.value.global_kl_alpha + out.value.global_kl_eta);
  if (!std::isfinite(out.value.elbo)) throw NumericalError("D-ETM ELBO is not finite");
  if (!with_grad) return out;

  // Reconstruction gradient into the alpha variational parameters.
  for (Eigen::Index t = 0; t < T; ++t) {
    if (!used[t]) continue;
    const MatrixXd dalpha = detail::softmax_rows_backward(beta[t], dbeta[t]) * rho.transpose();
    out.grad.alpha_mean[t] += dalpha;
    const MatrixXd& lv = params.alpha_logvar[t];
    for (Eigen::Index i = 0; i < lv.size(); ++i) {
      const auto fv = floored_variance(lv(i));
      // d alpha / d logvar = eps * sd / 2 when the floor is inactive.
      if (fv.dvar_dlogvar > 0.0)
        out.grad.alpha_logvar[t](i) += dalpha(i) * noise.alpha_eps[t](i) * 0.5 * std::sqrt(fv.var);
    }
  }

  MatrixXd gmean = stack_rows(out.grad.alpha_mean) - global_weight * ga_mean;
  MatrixXd glogvar = stack_rows(out.grad.alpha_logvar) - global_weight * ga_logvar;
  unstack_rows(gmean, out.grad.alpha_mean);
  unstack_rows(glogvar, out.grad.alpha_logvar);
  out.grad.eta_mean -= global_weight * ge_mean;
  out.grad.eta_logvar -= global_weight * ge_logvar;
  return out;
}

}  // namespace etm
