#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "etmkit/corpus.hpp"
#include "etmkit/model_math.hpp"

namespace etm {

struct TrainedModel;

struct DocumentScore {
  std::string doc_id;
  double log_likelihood = 0.0;  // over the held-out half
  std::uint64_t n_tokens = 0;   // held-out tokens
  double log_likelihood_per_token() const {
    return n_tokens ? log_likelihood / static_cast<double>(n_tokens) : 0.0;
  }
};

struct PerplexityResult {
  std::vector<DocumentScore> per_doc;
  double perplexity = 0.0;
  std::uint64_t n_eval_tokens = 0;
  std::size_t n_skipped = 0;
};

struct CompletionSplit {
  BowDocument observed;  // half A, used to infer theta
  BowDocument held_out;  // half B, scored
};

// Tokens are ordered by a hash of (seed, doc_id, token index); the first
// floor(n/2) form the observed half. Requires n_tokens >= 2.
CompletionSplit completion_split(const BowDocument& doc, std::uint64_t seed);

// theta = softmax(mu) from the encoder applied to the given counts (plus the
// slice's eta mean for dynamic models).
VectorXd infer_theta(const TrainedModel& model, const BowDocument& observed);

// Document-completion perplexity over the held-out halves. Documents with
// fewer than two tokens are skipped with a warning.
PerplexityResult document_completion_perplexity(const TrainedModel& model,
                                                std::span<const BowDocument> docs,
                                                std::uint64_t seed);

struct SeedAggregate {
  std::vector<double> values;
  double mean = 0.0;
  double ci95 = 0.0;  // 1.96 * sample stddev / sqrt(n)
};

SeedAggregate aggregate_ci(std::span<const double> values);

// Minimum-cost perfect assignment on a square cost matrix. Returns
// assignment[row] = column.
std::vector<std::size_t> hungarian(const MatrixXd& cost);

double total_variation(const VectorXd& p, const VectorXd& q);

struct TopicRecovery {
  std::vector<std::size_t> matching;  // matching[true topic] = learned topic
  double mean_tv = 0.0;
};

// Optimal one-to-one matching of learned to true topics under TV distance.
TopicRecovery topic_recovery_score(const MatrixXd& true_beta, const MatrixXd& learned_beta);

}  // namespace etm
