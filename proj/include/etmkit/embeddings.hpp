#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "etmkit/corpus.hpp"

namespace etm {

// Pretrained word/entity vectors keyed by surface ("apple",
// "ENTITY/Apple_Inc.").
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  const Eigen::VectorXd* find(std::string_view key) const;
  // Returns false (and keeps the existing vector) for a duplicate key.
  bool insert(std::string key, Eigen::VectorXd vec);

 private:
  std::size_t dim_;
  std::unordered_map<std::string, Eigen::VectorXd> vectors_;
};

// word2vec text format: "count dim" header, then "key v1 ... v_dim" rows.
// Paths ending in ".bz2" are decompressed on the fly. When keep_keys is
// given, rows for other keys are parsed for validity but not stored.
EmbeddingStore load_embeddings(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_dim = std::nullopt,
                               const std::unordered_set<std::string>* keep_keys = nullptr);
EmbeddingStore parse_embeddings(std::istream& in, std::optional<std::size_t> expected_dim = std::nullopt,
                                const std::unordered_set<std::string>* keep_keys = nullptr);

void write_embeddings(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, Eigen::VectorXd>>& rows);

enum class ColumnSource : std::uint8_t { WordVector, EntityVector, Fallback };

struct EmbeddingMatrix {
  Eigen::MatrixXd rho;  // L x V, column v embeds vocabulary term v
  std::vector<ColumnSource> column_source;

  std::size_t dim() const { return static_cast<std::size_t>(rho.rows()); }
  std::size_t vocab_size() const { return static_cast<std::size_t>(rho.cols()); }
  std::size_t count(ColumnSource source) const;
};

// Deterministic unit vector seeded by the key's FNV-1a hash.
Eigen::VectorXd fallback_vector(std::string_view key, std::size_t dim);

// Throws DataError("embedding coverage too low") when the share of fallback
// columns exceeds max_fallback_fraction.
EmbeddingMatrix build_rho(const Vocabulary& vocab, const EmbeddingStore& store,
                          double max_fallback_fraction = 0.5);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace etm
