#include "etmkit/report.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "etmkit/error.hpp"

namespace etm {

std::vector<RankedTerm> top_terms(const VectorXd& beta_row, const Vocabulary& vocab, std::size_t n) {
  if (n == 0) throw UsageError("top_terms: n must be at least 1");
  if (static_cast<std::size_t>(beta_row.size()) != vocab.size())
    throw UsageError("top_terms: distribution length does not match the vocabulary");
  std::vector<TermId> ids(vocab.size());
  std::iota(ids.begin(), ids.end(), TermId{0});
  const std::size_t k = std::min(n, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    [&](TermId a, TermId b) {
                      if (beta_row[a] != beta_row[b]) return beta_row[a] > beta_row[b];
                      return a < b;
                    });
  std::vector<RankedTerm> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i)
    out.push_back(RankedTerm{ids[i], vocab.term(ids[i]).surface, beta_row[ids[i]]});
  return out;
}

namespace {

TopicReport build_report(const TrainedModel& model, const Vocabulary& vocab, std::size_t n,
                         ReportMetadata meta, std::vector<std::string> labels) {
  if (model.vocab_size != vocab.size())
    throw DataError("model vocabulary size " + std::to_string(model.vocab_size) +
                    " does not match vocabulary file (" + std::to_string(vocab.size()) + ")");
  TopicReport r;
  r.dynamic = model.is_dynamic();
  r.num_topics = model.num_topics;
  r.num_slices = model.beta.size();
  r.top_n = n;
  r.meta = std::move(meta);
  if (labels.empty())
    for (std::size_t t = 0; t < r.num_slices; ++t) labels.push_back("t" + std::to_string(t));
  if (labels.size() != r.num_slices) throw UsageError("one slice label per slice required");
  r.slice_labels = std::move(labels);
  r.terms.resize(r.num_topics);
  for (std::size_t k = 0; k < r.num_topics; ++k)
    for (std::size_t t = 0; t < r.num_slices; ++t)
      r.terms[k].push_back(
          top_terms(model.beta[t].row(static_cast<Eigen::Index>(k)).transpose(), vocab, n));
  return r;
}

}  // namespace

TopicReport topic_report(const TrainedModel& model, const Vocabulary& vocab, std::size_t n,
                         ReportMetadata meta) {
  return build_report(model, vocab, n, std::move(meta), {});
}

TopicReport transition_report(const TrainedModel& model, const Vocabulary& vocab, std::size_t n,
                              ReportMetadata meta, std::vector<std::string> slice_labels) {
  if (!model.is_dynamic())
    throw UsageError("transition_report needs a dynamic (detm) model; use the static topic report");
  return build_report(model, vocab, n, std::move(meta), std::move(slice_labels));
}

nlohmann::json report_to_json(const TopicReport& r) {
  nlohmann::json topics = nlohmann::json::array();
  for (std::size_t k = 0; k < r.num_topics; ++k) {
    nlohmann::json slices = nlohmann::json::array();
    for (std::size_t t = 0; t < r.num_slices; ++t) {
      nlohmann::json terms = nlohmann::json::array();
      for (const auto& term : r.terms[k][t])
        terms.push_back({{"id", term.id}, {"term", term.surface}, {"prob", term.probability}});
      slices.push_back({{"slice", t}, {"label", r.slice_labels[t]}, {"terms", std::move(terms)}});
    }
    topics.push_back({{"topic", k}, {"slices", std::move(slices)}});
  }
  return {{"dynamic", r.dynamic},
          {"K", r.num_topics},
          {"T", r.num_slices},
          {"top_n", r.top_n},
          {"seed", r.meta.seed},
          {"corpus_hash", r.meta.corpus_hash},
          {"topics", std::move(topics)}};
}

std::string render_report_table(const TopicReport& r) {
  std::ostringstream out;
  for (std::size_t k = 0; k < r.num_topics; ++k) {
    std::vector<std::size_t> width(r.num_slices);
    std::size_t rows = 0;
    for (std::size_t t = 0; t < r.num_slices; ++t) {
      width[t] = r.slice_labels[t].size();
      for (const auto& term : r.terms[k][t]) width[t] = std::max(width[t], term.surface.size());
      rows = std::max(rows, r.terms[k][t].size());
    }
    out << "Topic " << k << '\n';
    const auto row = [&](auto cell) {
      for (std::size_t t = 0; t < r.num_slices; ++t) {
        const std::string s = cell(t);
        out << (t ? " | " : "") << s << std::string(width[t] - s.size(), ' ');
      }
      out << '\n';
    };
    row([&](std::size_t t) { return r.slice_labels[t]; });
    row([&](std::size_t t) { return std::string(width[t], '-'); });
    for (std::size_t i = 0; i < rows; ++i)
      row([&](std::size_t t) { return i < r.terms[k][t].size() ? r.terms[k][t][i].surface : std::string(); });
    out << '\n';
  }
  return out.str();
}

}  // namespace etm
