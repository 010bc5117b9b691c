#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "etmkit/corpus.hpp"
#include "etmkit/embeddings.hpp"
#include "etmkit/evaluation.hpp"
#include "etmkit/linker.hpp"
#include "etmkit/report.hpp"
#include "etmkit/train.hpp"

namespace etm {

struct RunConfig {
  std::filesystem::path corpus;
  LinkerMode linker = LinkerMode::None;
  double link_threshold = 0.5;
  std::filesystem::path aliases;    // empty: no alias table
  std::filesystem::path stopwords;  // empty: no stopwords
  std::filesystem::path embeddings;
  std::size_t embed_dim = 0;  // 0: take it from the embedding file header
  double max_fallback_fraction = 0.5;
  double max_doc_freq = 0.7;
  std::optional<int> slice_start;  // unset: earliest year in the corpus
  int slice_span = 5;
  std::array<unsigned, 3> split_ratios{3, 1, 1};
  std::uint64_t split_seed = 0;
  ModelKind model = ModelKind::Etm;
  TrainConfig train;
  std::uint64_t eval_seed = 0;
  std::size_t top_n = 5;
  std::filesystem::path out_dir = "run";

  // Throws UsageError for bad values and DataError for missing input files.
  void validate() const;
  // Every field except out_dir; paths as given.
  nlohmann::json to_json() const;
  std::uint64_t hash() const;
};

struct LinkedDocument {
  std::string id;
  std::optional<int> year;
  TermSequence terms;
};

std::vector<LinkedDocument> link_corpus(std::span<const RawDocument> docs, LinkerMode mode,
                                        const AliasTable* table, double threshold);

void write_linked_jsonl(const std::filesystem::path& path, std::span<const LinkedDocument> docs);
std::vector<LinkedDocument> read_linked_jsonl(const std::filesystem::path& path);

struct PreparedCorpus {
  Vocabulary vocab;
  CorpusSplits splits;
  std::size_t dropped_empty = 0;
};

// Vocabulary, bag-of-words, time slices and the train/valid/test split.
// Slices are only assigned when every document carries a year.
PreparedCorpus prepare_corpus(std::span<const LinkedDocument> docs, const RunConfig& config);

// Loads only the vectors the vocabulary needs and builds rho.
EmbeddingMatrix load_rho(const Vocabulary& vocab, const RunConfig& config);

nlohmann::json perplexity_to_json(const PerplexityResult& result);

// Artifact file names inside out_dir.
namespace artifact {
inline constexpr const char* kLinked = "linked.jsonl";
inline constexpr const char* kVocab = "vocab.txt";
inline constexpr const char* kTrain = "train.jsonl";
inline constexpr const char* kValid = "valid.jsonl";
inline constexpr const char* kTest = "test.jsonl";
inline constexpr const char* kCheckpoint = "model.json";
inline constexpr const char* kEval = "eval.json";
inline constexpr const char* kReportJson = "report.json";
inline constexpr const char* kReportTable = "report.txt";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace artifact

struct RunResult {
  std::filesystem::path manifest;
  double test_perplexity = 0.0;
  std::size_t vocab_size = 0;
  std::size_t num_entities = 0;
};

// prepare -> link -> embed -> train -> eval -> report, all artifacts under
// config.out_dir. A failing stage rethrows with the stage name prefixed;
// artifacts written so far are left in place.
RunResult run_pipeline(const RunConfig& config);

}  // namespace etm
