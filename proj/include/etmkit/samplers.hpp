#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "etmkit/corpus.hpp"
#include "etmkit/detm.hpp"
#include "etmkit/model_math.hpp"
#include "etmkit/random.hpp"

namespace etm {

struct LdaParams {
  MatrixXd beta;            // K x V, rows on the simplex
  double alpha_beta = 0.1;  // Dirichlet concentration the topics were drawn with
  double eta_theta = 0.1;   // Dirichlet concentration for topic proportions

  // Topics drawn from Dirichlet(alpha_beta).
  static LdaParams random(Eigen::Index num_topics, Eigen::Index vocab_size, double alpha_beta,
                          double eta_theta, Rng& rng);
};

struct SyntheticDocument {
  std::vector<TermId> words;
  std::vector<std::uint32_t> topics;  // latent assignment per word
  VectorXd theta;
  std::size_t slice = 0;
};

struct SyntheticCorpus {
  std::vector<SyntheticDocument> docs;
  std::vector<MatrixXd> beta;  // per slice; one entry for static models
  Eigen::Index vocab_size = 0;

  // Bag-of-words view, ids "doc<i>"; slices are set when there is more than
  // one beta.
  std::vector<BowDocument> to_bow() const;
};

// theta_d ~ Dirichlet(eta_theta), z ~ Cat(theta_d), w ~ Cat(beta_z).
SyntheticCorpus sample_lda(const LdaParams& params, std::span<const std::size_t> doc_lengths,
                           Rng& rng);

// theta_d = softmax(delta_d), delta_d ~ N(0, I); beta = softmax(alpha rho).
SyntheticCorpus sample_etm(const MatrixXd& rho, const MatrixXd& alpha,
                           std::span<const std::size_t> doc_lengths, Rng& rng);

struct DetmSample {
  std::vector<MatrixXd> alpha;  // T x (K x L)
  MatrixXd eta;                 // T x K
  SyntheticCorpus corpus;
};

// alpha^(0) ~ N(0, I), alpha^(t) ~ N(alpha^(t-1), sigma2 I); eta likewise
// with delta2; theta_d ~ LN(eta_{t_d}, gamma2 I); words from beta^(t_d).
// Zero variances are allowed and freeze the corresponding walk.
DetmSample sample_detm(const MatrixXd& rho, Eigen::Index num_topics, Eigen::Index num_slices,
                       const DetmHyper& hyper, std::span<const std::size_t> docs_per_slice,
                       std::size_t doc_length, Rng& rng);

// Gaussian random walk of length T over (rows x cols) matrices.
std::vector<MatrixXd> sample_random_walk(Eigen::Index rows, Eigen::Index cols,
                                         Eigen::Index num_steps, double step_variance, Rng& rng);

}  // namespace etm
