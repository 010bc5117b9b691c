#pragma once

#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "etmkit/corpus.hpp"
#include "etmkit/model_math.hpp"
#include "etmkit/random.hpp"

namespace etm {

// One-hidden-layer inference network: input -> softplus(W x + b) -> (mu, logvar).
struct Encoder {
  MatrixXd w_hidden;  // H x input
  VectorXd b_hidden;
  MatrixXd w_mu;      // K x H
  VectorXd b_mu;
  MatrixXd w_logvar;  // K x H
  VectorXd b_logvar;

  static Encoder zeros(Eigen::Index input_dim, Eigen::Index hidden_dim, Eigen::Index num_topics);
  // Uniform(+-1/sqrt(fan_in)) weights, zero biases.
  static Encoder random(Eigen::Index input_dim, Eigen::Index hidden_dim, Eigen::Index num_topics,
                        Rng& rng);

  Eigen::Index input_dim() const { return w_hidden.cols(); }
  Eigen::Index hidden_dim() const { return w_hidden.rows(); }
  Eigen::Index num_topics() const { return w_mu.rows(); }
};

template <class EncoderT, class F>
  requires std::is_same_v<std::remove_const_t<EncoderT>, Encoder>
void visit_blocks(EncoderT& e, F&& f) {
  f(e.w_hidden);
  f(e.b_hidden);
  f(e.w_mu);
  f(e.b_mu);
  f(e.w_logvar);
  f(e.b_logvar);
}

struct EncoderOutput {
  VectorXd mu;
  VectorXd logvar;
};

// Dense forward pass; throws NumericalError on non-finite output.
EncoderOutput encode(const Encoder& encoder, const VectorXd& input);

// Normalized bag-of-words as a dense vector of length V (+ optional extra
// trailing inputs).
VectorXd normalized_counts(const BowDocument& doc, Eigen::Index vocab_size);

struct Reparameterized {
  VectorXd delta;
  VectorXd theta;
};

// delta = mu + exp(logvar / 2) * eps, theta = softmax(delta), with the
// variance floor applied.
Reparameterized reparameterize(const VectorXd& mu, const VectorXd& logvar, const VectorXd& eps);
Reparameterized reparameterize(const VectorXd& mu, const VectorXd& logvar, Rng& rng);

struct EtmParams {
  MatrixXd alpha;  // K x L topic embeddings
  Encoder encoder;

  static EtmParams zeros_like(const EtmParams& other);
  static EtmParams init(Eigen::Index vocab_size, Eigen::Index embed_dim, Eigen::Index num_topics,
                        Eigen::Index hidden_dim, Rng& rng);
};

template <class ParamsT, class F>
  requires std::is_same_v<std::remove_const_t<ParamsT>, EtmParams>
void visit_blocks(ParamsT& p, F&& f) {
  f(p.alpha);
  visit_blocks(p.encoder, f);
}

// Standard-normal draws: one K-vector per document of the batch.
struct EtmNoise {
  std::vector<VectorXd> theta_eps;
};

// Per-document streams keyed by (seed, step, doc_id), so batch order and
// composition do not change a document's draw.
EtmNoise draw_etm_noise(std::span<const BowDocument> batch, Eigen::Index num_topics,
                        std::uint64_t seed, std::uint64_t step);

struct ElboTerms {
  double elbo = 0.0;
  double reconstruction = 0.0;
  double local_kl = 0.0;         // sum over documents of KL(q(theta_d) || prior)
  double global_kl_alpha = 0.0;  // unscaled; D-ETM only
  double global_kl_eta = 0.0;    // unscaled; D-ETM only
};

struct EtmElbo {
  ElboTerms value;
  EtmParams grad;  // d ELBO / d params (ascent direction)
};

// ELBO summed over the batch with one reparameterized theta per document.
// rho is the frozen L x V embedding matrix.
EtmElbo elbo_etm(std::span<const BowDocument> batch, const EtmParams& params, const MatrixXd& rho,
                 const EtmNoise& noise, bool with_grad = true);
EtmElbo elbo_etm(std::span<const BowDocument> batch, const EtmParams& params, const MatrixXd& rho,
                 std::uint64_t seed, std::uint64_t step = 0);

}  // namespace etm
