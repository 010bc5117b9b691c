#include "etmkit/samplers.hpp"

#include <cmath>
#include <string>

#include "etmkit/error.hpp"

namespace etm {
namespace {

SyntheticDocument draw_words(const VectorXd& theta, const MatrixXd& beta, std::size_t length,
                             Rng& rng) {
  SyntheticDocument doc;
  doc.theta = theta;
  doc.words.reserve(length);
  doc.topics.reserve(length);
  for (std::size_t n = 0; n < length; ++n) {
    const auto z = rng.categorical(theta);
    const VectorXd row = beta.row(static_cast<Eigen::Index>(z)).transpose();
    doc.topics.push_back(static_cast<std::uint32_t>(z));
    doc.words.push_back(static_cast<TermId>(rng.categorical(row)));
  }
  return doc;
}

}  // namespace

LdaParams LdaParams::random(Eigen::Index num_topics, Eigen::Index vocab_size, double alpha_beta,
                            double eta_theta, Rng& rng) {
  if (!(alpha_beta > 0.0 && eta_theta > 0.0))
    throw UsageError("Dirichlet concentrations must be positive");
  LdaParams p;
  p.alpha_beta = alpha_beta;
  p.eta_theta = eta_theta;
  p.beta.resize(num_topics, vocab_size);
  for (Eigen::Index k = 0; k < num_topics; ++k)
    p.beta.row(k) = rng.dirichlet(vocab_size, alpha_beta).transpose();
  return p;
}

std::vector<BowDocument> SyntheticCorpus::to_bow() const {
  std::vector<BowDocument> out;
  out.reserve(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    std::vector<std::uint32_t> counts(static_cast<std::size_t>(vocab_size), 0);
    for (TermId w : docs[d].words) ++counts[w];
    BowDocument bow;
    bow.doc_id = "doc" + std::to_string(d);
    for (std::size_t v = 0; v < counts.size(); ++v)
      if (counts[v]) bow.counts.emplace_back(static_cast<TermId>(v), counts[v]);
    bow.n_tokens = docs[d].words.size();
    if (beta.size() > 1) bow.slice = docs[d].slice;
    out.push_back(std::move(bow));
  }
  return out;
}

SyntheticCorpus sample_lda(const LdaParams& params, std::span<const std::size_t> doc_lengths,
                           Rng& rng) {
  if (!(params.eta_theta > 0.0)) throw UsageError("eta_theta must be positive");
  SyntheticCorpus corpus;
  corpus.vocab_size = params.beta.cols();
  corpus.beta.push_back(params.beta);
  const Eigen::Index K = params.beta.rows();
  for (std::size_t len : doc_lengths)
    corpus.docs.push_back(draw_words(rng.dirichlet(K, params.eta_theta), params.beta, len, rng));
  return corpus;
}

SyntheticCorpus sample_etm(const MatrixXd& rho, const MatrixXd& alpha,
                           std::span<const std::size_t> doc_lengths, Rng& rng) {
  SyntheticCorpus corpus;
  corpus.vocab_size = rho.cols();
  corpus.beta.push_back(compute_beta(rho, alpha));
  const Eigen::Index K = alpha.rows();
  for (std::size_t len : doc_lengths)
    corpus.docs.push_back(draw_words(softmax(rng.normal_vector(K)), corpus.beta.front(), len, rng));
  return corpus;
}

std::vector<MatrixXd> sample_random_walk(Eigen::Index rows, Eigen::Index cols,
                                         Eigen::Index num_steps, double step_variance, Rng& rng) {
  if (step_variance < 0.0) throw UsageError("random-walk variance must be non-negative");
  std::vector<MatrixXd> walk;
  walk.reserve(static_cast<std::size_t>(num_steps));
  if (num_steps == 0) return walk;
  walk.push_back(rng.normal_matrix(rows, cols));
  const double sd = std::sqrt(step_variance);
  for (Eigen::Index t = 1; t < num_steps; ++t)
    walk.push_back(walk.back() + sd * rng.normal_matrix(rows, cols));
  return walk;
}

DetmSample sample_detm(const MatrixXd& rho, Eigen::Index num_topics, Eigen::Index num_slices,
                       const DetmHyper& hyper, std::span<const std::size_t> docs_per_slice,
                       std::size_t doc_length, Rng& rng) {
  if (hyper.sigma2 < 0.0 || hyper.delta2 < 0.0 || hyper.gamma2 < 0.0)
    throw UsageError("prior variances must be non-negative");
  if (static_cast<Eigen::Index>(docs_per_slice.size()) != num_slices)
    throw UsageError("docs_per_slice must have one entry per slice");
  DetmSample out;
  out.alpha = sample_random_walk(num_topics, rho.rows(), num_slices, hyper.sigma2, rng);
  const auto eta_walk = sample_random_walk(1, num_topics, num_slices, hyper.delta2, rng);
  out.eta.resize(num_slices, num_topics);
  for (Eigen::Index t = 0; t < num_slices; ++t) out.eta.row(t) = eta_walk[t].row(0);

  out.corpus.vocab_size = rho.cols();
  for (const auto& a : out.alpha) out.corpus.beta.push_back(compute_beta(rho, a));
  const double gamma = std::sqrt(hyper.gamma2);
  for (Eigen::Index t = 0; t < num_slices; ++t) {
    for (std::size_t d = 0; d < docs_per_slice[t]; ++d) {
      const VectorXd delta = out.eta.row(t).transpose() + gamma * rng.normal_vector(num_topics);
      auto doc = draw_words(softmax(delta), out.corpus.beta[t], doc_length, rng);
      doc.slice = static_cast<std::size_t>(t);
      out.corpus.docs.push_back(std::move(doc));
    }
  }
  return out;
}

}  // namespace etm
