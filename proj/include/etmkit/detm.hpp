#pragma once

#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "etmkit/etm.hpp"

namespace etm {

// Prior variances: sigma2 for the topic-embedding walk, delta2 for the
// topic-proportion-mean walk, gamma2 for theta around eta_t.
struct DetmHyper {
  double sigma2 = 0.005;
  double delta2 = 0.005;
  double gamma2 = 1.0;
};

// Mean-field Gaussian posteriors over the topic-embedding chains and the
// eta chain, plus an encoder whose input is [normalized counts, eta_mean[t]].
struct DetmParams {
  std::vector<MatrixXd> alpha_mean;    // T x (K x L)
  std::vector<MatrixXd> alpha_logvar;  // T x (K x L)
  MatrixXd eta_mean;                   // T x K
  MatrixXd eta_logvar;                 // T x K
  Encoder encoder;                     // input V + K
  DetmHyper hyper;

  Eigen::Index num_slices() const { return eta_mean.rows(); }
  Eigen::Index num_topics() const { return eta_mean.cols(); }
  Eigen::Index embed_dim() const { return alpha_mean.empty() ? 0 : alpha_mean.front().cols(); }
  Eigen::Index vocab_size() const { return encoder.input_dim() - num_topics(); }

  static DetmParams zeros_like(const DetmParams& other);
  static DetmParams init(Eigen::Index vocab_size, Eigen::Index embed_dim, Eigen::Index num_topics,
                         Eigen::Index num_slices, Eigen::Index hidden_dim, const DetmHyper& hyper,
                         Rng& rng);
};

template <class ParamsT, class F>
  requires std::is_same_v<std::remove_const_t<ParamsT>, DetmParams>
void visit_blocks(ParamsT& p, F&& f) {
  for (auto& m : p.alpha_mean) f(m);
  for (auto& m : p.alpha_logvar) f(m);
  f(p.eta_mean);
  f(p.eta_logvar);
  visit_blocks(p.encoder, f);
}

struct DetmNoise {
  std::vector<VectorXd> theta_eps;  // one K-vector per batch document
  std::vector<MatrixXd> alpha_eps;  // one K x L draw per time slice
};

DetmNoise draw_detm_noise(std::span<const BowDocument> batch, const DetmParams& params,
                          std::uint64_t seed, std::uint64_t step);

struct DetmElbo {
  ElboTerms value;
  DetmParams grad;
};

// Batch ELBO: sum over documents of reconstruction under beta^(t_d) (from a
// reparameterized alpha^(t_d) draw) minus KL(q(theta_d) || N(eta_mean[t_d],
// gamma2 I)), minus global_weight times the alpha and eta chain KLs.
// global_weight is normally |batch| / |train|. Every document needs a slice.
DetmElbo elbo_detm(std::span<const BowDocument> batch, const DetmParams& params,
                   const MatrixXd& rho, const DetmNoise& noise, double global_weight,
                   bool with_grad = true);

// beta^(t) from the variational means.
std::vector<MatrixXd> detm_mean_beta(const DetmParams& params, const MatrixXd& rho);

// Chain KL terms alone (unscaled), for inspection and tests.
double detm_alpha_chain_kl(const DetmParams& params);
double detm_eta_chain_kl(const DetmParams& params);

}  // namespace etm
