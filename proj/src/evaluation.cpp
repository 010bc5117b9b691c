#include "etmkit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <spdlog/spdlog.h>

#include "etmkit/error.hpp"
#include "etmkit/hash.hpp"
#include "etmkit/train.hpp"

namespace etm {
namespace {

BowDocument from_token_ids(const std::string& id, std::optional<std::size_t> slice,
                           std::span<const TermId> tokens) {
  std::map<TermId, std::uint32_t> counts;
  for (TermId t : tokens) ++counts[t];
  BowDocument doc;
  doc.doc_id = id;
  doc.slice = slice;
  doc.counts.assign(counts.begin(), counts.end());
  doc.n_tokens = tokens.size();
  return doc;
}

}  // namespace

CompletionSplit completion_split(const BowDocument& doc, std::uint64_t seed) {
  if (doc.n_tokens < 2) throw DataError("document " + doc.doc_id + " has fewer than 2 tokens");
  // Expand counts into a token list in id order.
  std::vector<TermId> tokens;
  tokens.reserve(doc.n_tokens);
  for (const auto& [id, c] : doc.counts) tokens.insert(tokens.end(), c, id);

  const std::uint64_t base = hash_combine(seed, fnv1a64(doc.doc_id));
  std::vector<std::pair<std::uint64_t, std::size_t>> keys(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) keys[i] = {hash_combine(base, i), i};
  std::sort(keys.begin(), keys.end());

  const std::size_t n_observed = tokens.size() / 2;
  std::vector<TermId> a, b;
  for (std::size_t r = 0; r < keys.size(); ++r)
    (r < n_observed ? a : b).push_back(tokens[keys[r].second]);
  return {from_token_ids(doc.doc_id, doc.slice, a), from_token_ids(doc.doc_id, doc.slice, b)};
}

VectorXd infer_theta(const TrainedModel& model, const BowDocument& observed) {
  const auto V = static_cast<Eigen::Index>(model.vocab_size);
  const auto K = static_cast<Eigen::Index>(model.num_topics);
  VectorXd input;
  if (model.kind == ModelKind::Etm) {
    input = normalized_counts(observed, V);
  } else {
    const auto& p = std::get<DetmParams>(model.params);
    if (!observed.slice) throw DataError("document " + observed.doc_id + " has no time slice");
    const auto t = static_cast<Eigen::Index>(*observed.slice);
    if (t >= p.num_slices())
      throw DataError("document " + observed.doc_id + " slice outside the model's range");
    input.resize(V + K);
    input.head(V) = normalized_counts(observed, V);
    input.tail(K) = p.eta_mean.row(t).transpose();
  }
  return softmax(encode(model.encoder(), input).mu);
}

PerplexityResult document_completion_perplexity(const TrainedModel& model,
                                                std::span<const BowDocument> docs,
                                                std::uint64_t seed) {
  PerplexityResult result;
  double total_ll = 0.0;
  for (const auto& doc : docs) {
    if (doc.n_tokens < 2) {
      spdlog::warn("document {} has fewer than 2 tokens; skipped in perplexity", doc.doc_id);
      ++result.n_skipped;
      continue;
    }
    const auto split = completion_split(doc, seed);
    const VectorXd theta = infer_theta(model, split.observed);
    const std::size_t t = model.is_dynamic() ? *doc.slice : 0;
    const MatrixXd& beta = model.beta.at(t);
    DocumentScore score{doc.doc_id, 0.0, split.held_out.n_tokens};
    for (const auto& [id, c] : split.held_out.counts) {
      const double p = std::max(theta.dot(beta.col(id)), kProbFloor);
      score.log_likelihood += static_cast<double>(c) * std::log(p);
    }
    total_ll += score.log_likelihood;
    result.n_eval_tokens += score.n_tokens;
    result.per_doc.push_back(std::move(score));
  }
  if (result.n_eval_tokens == 0) throw DataError("no documents with at least 2 tokens to evaluate");
  result.perplexity = std::exp(-total_ll / static_cast<double>(result.n_eval_tokens));
  if (!std::isfinite(result.perplexity)) throw NumericalError("perplexity is not finite");
  return result;
}

SeedAggregate aggregate_ci(std::span<const double> values) {
  if (values.size() < 2) throw UsageError("aggregate_ci needs at least two values");
  SeedAggregate agg;
  agg.values.assign(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  agg.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
  agg.ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return agg;
}

std::vector<std::size_t> hungarian(const MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw UsageError("hungarian: cost matrix must be square");
  const auto n = static_cast<std::size_t>(cost.rows());
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Potentials formulation, 1-based with a sentinel column 0.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) -
                           u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j)
    if (match[j]) assignment[match[j] - 1] = j - 1;
  return assignment;
}

double total_variation(const VectorXd& p, const VectorXd& q) {
  if (p.size() != q.size()) throw UsageError("total_variation: length mismatch");
  return 0.5 * (p - q).cwiseAbs().sum();
}

TopicRecovery topic_recovery_score(const MatrixXd& true_beta, const MatrixXd& learned_beta) {
  if (true_beta.rows() != learned_beta.rows() || true_beta.cols() != learned_beta.cols())
    throw UsageError("topic_recovery_score: shape mismatch");
  const Eigen::Index K = true_beta.rows();
  MatrixXd cost(K, K);
  for (Eigen::Index i = 0; i < K; ++i)
    for (Eigen::Index j = 0; j < K; ++j)
      cost(i, j) = total_variation(true_beta.row(i).transpose(), learned_beta.row(j).transpose());
  TopicRecovery out;
  out.matching = hungarian(cost);
  double total = 0.0;
  for (Eigen::Index i = 0; i < K; ++i)
    total += cost(i, static_cast<Eigen::Index>(out.matching[static_cast<std::size_t>(i)]));
  out.mean_tv = K ? total / static_cast<double>(K) : 0.0;
  return out;
}

}  // namespace etm
