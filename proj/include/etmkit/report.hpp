#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "etmkit/corpus.hpp"
#include "etmkit/model_math.hpp"
#include "etmkit/train.hpp"

namespace etm {

struct RankedTerm {
  TermId id = 0;
  std::string surface;
  double probability = 0.0;
};

// The n most probable terms (ties by id); returns all V when n > V.
std::vector<RankedTerm> top_terms(const VectorXd& beta_row, const Vocabulary& vocab, std::size_t n);

struct ReportMetadata {
  std::uint64_t seed = 0;
  std::string corpus_hash;
};

struct TopicReport {
  bool dynamic = false;
  std::size_t num_topics = 0;
  std::size_t num_slices = 1;
  std::size_t top_n = 0;
  ReportMetadata meta;
  std::vector<std::string> slice_labels;                // one per slice
  std::vector<std::vector<std::vector<RankedTerm>>> terms;  // [topic][slice]
};

// Per-topic top terms of a static model (or of slice 0 of a dynamic one is
// NOT what this does: it always reports every slice as columns).
TopicReport topic_report(const TrainedModel& model, const Vocabulary& vocab, std::size_t n,
                         ReportMetadata meta = {});

// Per-topic, per-slice top terms of a dynamic model. Throws UsageError for a
// static model.
TopicReport transition_report(const TrainedModel& model, const Vocabulary& vocab, std::size_t n,
                              ReportMetadata meta = {},
                              std::vector<std::string> slice_labels = {});

nlohmann::json report_to_json(const TopicReport& report);

// Plain-text grid: one block per topic, slices as columns, rank as rows.
std::string render_report_table(const TopicReport& report);

}  // namespace etm
