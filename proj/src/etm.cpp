#include "etmkit/etm.hpp"

#include <cmath>
#include <string>

#include "document_objective.hpp"
#include "etmkit/error.hpp"
#include "etmkit/hash.hpp"

namespace etm {

Encoder Encoder::zeros(Eigen::Index input_dim, Eigen::Index hidden_dim, Eigen::Index num_topics) {
  Encoder e;
  e.w_hidden = MatrixXd::Zero(hidden_dim, input_dim);
  e.b_hidden = VectorXd::Zero(hidden_dim);
  e.w_mu = MatrixXd::Zero(num_topics, hidden_dim);
  e.b_mu = VectorXd::Zero(num_topics);
  e.w_logvar = MatrixXd::Zero(num_topics, hidden_dim);
  e.b_logvar = VectorXd::Zero(num_topics);
  return e;
}

Encoder Encoder::random(Eigen::Index input_dim, Eigen::Index hidden_dim, Eigen::Index num_topics,
                        Rng& rng) {
  Encoder e = zeros(input_dim, hidden_dim, num_topics);
  const auto fill = [&](MatrixXd& m, double bound) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = bound * (2.0 * rng.uniform() - 1.0);
  };
  fill(e.w_hidden, 1.0 / std::sqrt(static_cast<double>(input_dim)));
  fill(e.w_mu, 1.0 / std::sqrt(static_cast<double>(hidden_dim)));
  fill(e.w_logvar, 1.0 / std::sqrt(static_cast<double>(hidden_dim)));
  return e;
}

EncoderOutput encode(const Encoder& encoder, const VectorXd& input) {
  if (input.size() != encoder.input_dim())
    throw UsageError("encode: input length " + std::to_string(input.size()) +
                     " does not match encoder input " + std::to_string(encoder.input_dim()));
  const VectorXd z = encoder.w_hidden * input + encoder.b_hidden;
  const VectorXd h = z.unaryExpr([](double v) { return softplus(v); });
  EncoderOutput out{encoder.w_mu * h + encoder.b_mu, encoder.w_logvar * h + encoder.b_logvar};
  if (!out.mu.allFinite() || !out.logvar.allFinite())
    throw NumericalError("encoder produced non-finite output (training diverged?)");
  return out;
}

VectorXd normalized_counts(const BowDocument& doc, Eigen::Index vocab_size) {
  VectorXd x = VectorXd::Zero(vocab_size);
  if (doc.n_tokens == 0) return x;
  for (const auto& [id, c] : doc.counts) {
    if (static_cast<Eigen::Index>(id) >= vocab_size)
      throw DataError("document " + doc.doc_id + " has term id " + std::to_string(id) +
                      " outside the vocabulary");
    x[id] = static_cast<double>(c) / static_cast<double>(doc.n_tokens);
  }
  return x;
}

Reparameterized reparameterize(const VectorXd& mu, const VectorXd& logvar, const VectorXd& eps) {
  Reparameterized r;
  r.delta.resize(mu.size());
  for (Eigen::Index k = 0; k < mu.size(); ++k)
    r.delta[k] = mu[k] + std::sqrt(floored_variance(logvar[k]).var) * eps[k];
  r.theta = softmax(r.delta);
  return r;
}

Reparameterized reparameterize(const VectorXd& mu, const VectorXd& logvar, Rng& rng) {
  return reparameterize(mu, logvar, rng.normal_vector(mu.size()));
}

EtmParams EtmParams::zeros_like(const EtmParams& other) {
  EtmParams p;
  p.alpha = MatrixXd::Zero(other.alpha.rows(), other.alpha.cols());
  p.encoder = Encoder::zeros(other.encoder.input_dim(), other.encoder.hidden_dim(),
                             other.encoder.num_topics());
  return p;
}

EtmParams EtmParams::init(Eigen::Index vocab_size, Eigen::Index embed_dim, Eigen::Index num_topics,
                          Eigen::Index hidden_dim, Rng& rng) {
  EtmParams p;
  p.alpha.resize(num_topics, embed_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  for (Eigen::Index j = 0; j < embed_dim; ++j)
    for (Eigen::Index k = 0; k < num_topics; ++k) p.alpha(k, j) = bound * (2.0 * rng.uniform() - 1.0);
  p.encoder = Encoder::random(vocab_size, hidden_dim, num_topics, rng);
  return p;
}

EtmNoise draw_etm_noise(std::span<const BowDocument> batch, Eigen::Index num_topics,
                        std::uint64_t seed, std::uint64_t step) {
  EtmNoise noise;
  noise.theta_eps.reserve(batch.size());
  const std::uint64_t base = hash_combine(seed, step);
  for (const auto& doc : batch) {
    Rng rng(hash_combine(base, fnv1a64(doc.doc_id)));
    noise.theta_eps.push_back(rng.normal_vector(num_topics));
  }
  return noise;
}

EtmElbo elbo_etm(std::span<const BowDocument> batch, const EtmParams& params, const MatrixXd& rho,
                 const EtmNoise& noise, bool with_grad) {
  if (batch.empty()) throw UsageError("elbo_etm: empty batch");
  if (noise.theta_eps.size() != batch.size()) throw UsageError("elbo_etm: noise/batch size mismatch");
  const Eigen::Index K = params.alpha.rows();
  if (params.encoder.input_dim() != rho.cols() || params.encoder.num_topics() != K)
    throw UsageError("elbo_etm: encoder shape does not match (V, K)");

  const MatrixXd beta = compute_beta(rho, params.alpha);
  const VectorXd prior_mean = VectorXd::Zero(K);
  const VectorXd no_extra;

  EtmElbo out;
  MatrixXd dbeta;
  detail::DocumentGrad grad;
  if (with_grad) {
    out.grad = EtmParams::zeros_like(params);
    dbeta = MatrixXd::Zero(beta.rows(), beta.cols());
    grad.encoder = &out.grad.encoder;
    grad.beta = &dbeta;
  }
  for (std::size_t d = 0; d < batch.size(); ++d) {
    const auto v = detail::document_objective(batch[d], params.encoder, beta, no_extra, prior_mean,
                                              1.0, noise.theta_eps[d], with_grad ? &grad : nullptr);
    out.value.reconstruction += v.reconstruction;
    out.value.local_kl += v.kl;
  }
  out.value.elbo = out.value.reconstruction - out.value.local_kl;
  if (!std::isfinite(out.value.elbo)) throw NumericalError("ETM ELBO is not finite");
  if (with_grad) out.grad.alpha = detail::softmax_rows_backward(beta, dbeta) * rho.transpose();
  return out;
}

EtmElbo elbo_etm(std::span<const BowDocument> batch, const EtmParams& params, const MatrixXd& rho,
                 std::uint64_t seed, std::uint64_t step) {
  return elbo_etm(batch, params, rho, draw_etm_noise(batch, params.alpha.rows(), seed, step));
}

// --- shared per-document terms -----------------------------------------------

namespace detail {

DocumentValue document_objective(const BowDocument& doc, const Encoder& encoder,
                                 const MatrixXd& beta, const VectorXd& extra_input,
                                 const VectorXd& prior_mean, double prior_var,
                                 const VectorXd& eps, DocumentGrad* grad) {
  const Eigen::Index K = beta.rows();
  const Eigen::Index V = beta.cols();
  const Eigen::Index n_extra = extra_input.size();
  if (encoder.input_dim() != V + n_extra)
    throw UsageError("encoder input dimension does not match vocabulary (+ extra inputs)");
  if (doc.n_tokens == 0) throw DataError("document " + doc.doc_id + " is empty");
  const double inv_n = 1.0 / static_cast<double>(doc.n_tokens);

  // Encoder forward over the sparse normalized counts.
  VectorXd z = encoder.b_hidden;
  for (const auto& [id, c] : doc.counts) {
    if (static_cast<Eigen::Index>(id) >= V)
      throw DataError("document " + doc.doc_id + " has term id outside the vocabulary");
    z.noalias() += (static_cast<double>(c) * inv_n) * encoder.w_hidden.col(id);
  }
  if (n_extra) z.noalias() += encoder.w_hidden.rightCols(n_extra) * extra_input;
  const VectorXd h = z.unaryExpr([](double v) { return softplus(v); });
  const VectorXd mu = encoder.w_mu * h + encoder.b_mu;
  const VectorXd logvar = encoder.w_logvar * h + encoder.b_logvar;

  VectorXd var(K), dvar_dlogvar(K), sd(K), delta(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto fv = floored_variance(logvar[k]);
    var[k] = fv.var;
    dvar_dlogvar[k] = fv.dvar_dlogvar;
    sd[k] = std::sqrt(fv.var);
    delta[k] = mu[k] + sd[k] * eps[k];
  }
  const VectorXd theta = softmax(delta);

  DocumentValue value;
  VectorXd dtheta = VectorXd::Zero(K);
  for (const auto& [id, c] : doc.counts) {
    const double count = static_cast<double>(c);
    const double p = theta.dot(beta.col(id));
    if (p > kProbFloor) {
      value.reconstruction += count * std::log(p);
      if (grad) {
        const double w = count / p;
        dtheta.noalias() += w * beta.col(id);
        if (grad->beta) grad->beta->col(id).noalias() += w * theta;
      }
    } else {
      value.reconstruction += count * std::log(kProbFloor);
    }
  }

  const VectorXd diff = mu - prior_mean;
  for (Eigen::Index k = 0; k < K; ++k) {
    value.kl += 0.5 * ((var[k] + diff[k] * diff[k]) / prior_var - 1.0 + std::log(prior_var) -
                       std::log(var[k]));
  }
  if (!std::isfinite(value.reconstruction) || !std::isfinite(value.kl))
    throw NumericalError("non-finite objective for document " + doc.doc_id);
  if (!grad) return value;

  // d ELBO / d delta through the softmax.
  const VectorXd ddelta =
      theta.cwiseProduct((dtheta.array() - theta.dot(dtheta)).matrix());
  VectorXd dmu = ddelta - diff / prior_var;
  VectorXd dlogvar(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double dvar = ddelta[k] * eps[k] / (2.0 * sd[k]) - 0.5 * (1.0 / prior_var - 1.0 / var[k]);
    dlogvar[k] = dvar * dvar_dlogvar[k];
  }
  if (grad->prior_mean) grad->prior_mean->noalias() += diff / prior_var;

  const VectorXd dh = encoder.w_mu.transpose() * dmu + encoder.w_logvar.transpose() * dlogvar;
  VectorXd dz(dh.size());
  for (Eigen::Index i = 0; i < dz.size(); ++i) dz[i] = dh[i] * sigmoid(z[i]);

  if (grad->extra_input && n_extra)
    grad->extra_input->noalias() += encoder.w_hidden.rightCols(n_extra).transpose() * dz;
  if (Encoder* g = grad->encoder) {
    g->w_mu.noalias() += dmu * h.transpose();
    g->b_mu += dmu;
    g->w_logvar.noalias() += dlogvar * h.transpose();
    g->b_logvar += dlogvar;
    g->b_hidden += dz;
    for (const auto& [id, c] : doc.counts)
      g->w_hidden.col(id).noalias() += (static_cast<double>(c) * inv_n) * dz;
    if (n_extra) g->w_hidden.rightCols(n_extra).noalias() += dz * extra_input.transpose();
  }
  return value;
}

MatrixXd softmax_rows_backward(const MatrixXd& beta, const MatrixXd& dbeta) {
  MatrixXd dlogits = beta.cwiseProduct(dbeta);
  const VectorXd row_dot = dlogits.rowwise().sum();
  dlogits -= beta.cwiseProduct(row_dot.replicate(1, beta.cols()));
  return dlogits;
}

double chain_kl(const MatrixXd& mean, const MatrixXd& logvar, double prior_var,
                MatrixXd* grad_mean, MatrixXd* grad_logvar) {
  const Eigen::Index T = mean.rows();
  const Eigen::Index D = mean.cols();
  MatrixXd var(T, D), dvdl(T, D);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index i = 0; i < D; ++i) {
      const auto fv = floored_variance(logvar(t, i));
      var(t, i) = fv.var;
      dvdl(t, i) = fv.dvar_dlogvar;
    }
  const bool want = grad_mean && grad_logvar;
  MatrixXd dvar;
  if (want) {
    grad_mean->setZero(T, D);
    dvar.setZero(T, D);
  }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < D; ++i) {
    // t = 0 against N(0, 1).
    kl += 0.5 * (var(0, i) + mean(0, i) * mean(0, i) - 1.0 - std::log(var(0, i)));
    if (want) {
      (*grad_mean)(0, i) += mean(0, i);
      dvar(0, i) += 0.5 * (1.0 - 1.0 / var(0, i));
    }
    for (Eigen::Index t = 1; t < T; ++t) {
      const double d = mean(t, i) - mean(t - 1, i);
      kl += 0.5 * ((var(t, i) + d * d) / prior_var - 1.0 + std::log(prior_var) - std::log(var(t, i))) +
            var(t - 1, i) / (2.0 * prior_var);
      if (want) {
        (*grad_mean)(t, i) += d / prior_var;
        (*grad_mean)(t - 1, i) -= d / prior_var;
        dvar(t, i) += 0.5 * (1.0 / prior_var - 1.0 / var(t, i));
        dvar(t - 1, i) += 1.0 / (2.0 * prior_var);
      }
    }
  }
  if (want) *grad_logvar = dvar.cwiseProduct(dvdl);
  return kl;
}

}  // namespace detail
}  // namespace etm
