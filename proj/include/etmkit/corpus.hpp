#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace etm {

using TermId = std::uint32_t;

inline constexpr std::string_view kEntityPrefix = "ENTITY/";

enum class TermKind : std::uint8_t { Word, Entity };

// A vocabulary item. Word surfaces are lowercased tokens; entity surfaces
// carry the "ENTITY/" prefix followed by the canonical title.
struct Term {
  TermKind kind = TermKind::Word;
  std::string surface;

  static Term word(std::string token);
  // Canonicalizes the title (spaces become underscores) and adds the prefix.
  static Term entity(std::string_view title);

  bool is_entity() const { return kind == TermKind::Entity; }

  auto operator<=>(const Term&) const = default;
  bool operator==(const Term&) const = default;
};

using TermSequence = std::vector<Term>;

// "Apple Inc." -> "ENTITY/Apple_Inc."; titles already prefixed are kept.
std::string canonical_entity_key(std::string_view title);

// Parses a surface back into a term; the prefix decides the kind.
Term term_from_surface(std::string_view surface);

struct GoldSpan {
  std::size_t start = 0;  // Unicode scalar offsets into RawDocument::text
  std::size_t end = 0;
  std::string entity;
};

struct RawDocument {
  std::string id;
  std::string text;
  std::optional<int> year;
  std::vector<GoldSpan> gold_spans;
};

struct Token {
  std::string text;
  std::size_t char_start = 0;  // Unicode scalar offsets, end exclusive
  std::size_t char_end = 0;
};

// Rule-based tokenizer: split on Unicode whitespace, strip punctuation from
// both token edges, lowercase. Interior punctuation is kept ("u.s.-based").
std::vector<Token> tokenize_with_offsets(std::string_view text);
std::vector<std::string> tokenize(std::string_view text);

// Number of Unicode scalar values in a UTF-8 string.
std::size_t utf8_length(std::string_view text);

struct VocabularyProvenance {
  double max_doc_freq = 1.0;
  std::size_t num_docs = 0;
  std::size_t removed_stopwords = 0;
  std::size_t removed_frequent = 0;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  // Throws DataError on duplicate terms or an empty list.
  explicit Vocabulary(std::vector<Term> terms, VocabularyProvenance provenance = {});

  std::size_t size() const { return terms_.size(); }
  const Term& term(TermId id) const { return terms_.at(id); }
  const std::vector<Term>& terms() const { return terms_; }
  std::optional<TermId> find(const Term& term) const;
  std::optional<TermId> find(std::string_view surface) const;
  std::size_t num_entities() const;
  const VocabularyProvenance& provenance() const { return provenance_; }

  // Stable hash over the ordered surfaces.
  std::uint64_t hash() const;

 private:
  std::vector<Term> terms_;
  std::unordered_map<std::string, TermId> index_;
  VocabularyProvenance provenance_;
};

// Retains every entity term, and every word term that is not a stopword and
// whose document frequency is strictly below max_doc_freq * |docs|. Ids go
// by descending corpus frequency, ties by surface.
Vocabulary build_vocabulary(std::span<const TermSequence> docs, double max_doc_freq,
                            const std::unordered_set<std::string>& stopwords);

struct BowDocument {
  std::string doc_id;
  std::vector<std::pair<TermId, std::uint32_t>> counts;  // sorted by id, counts > 0
  std::uint64_t n_tokens = 0;
  std::optional<std::size_t> slice;
};

// floor((year - start_year) / span)
std::size_t assign_time_slice(int year, int start_year, int span);

// Drops out-of-vocabulary terms; nullopt (with a logged warning) when
// nothing survives.
std::optional<BowDocument> to_bow(std::string doc_id, std::span<const Term> terms,
                                  const Vocabulary& vocab,
                                  std::optional<std::size_t> slice = std::nullopt);

struct CorpusSplits {
  std::vector<BowDocument> train;
  std::vector<BowDocument> valid;
  std::vector<BowDocument> test;
  std::uint64_t seed = 0;
};

// Seeded shuffle, then valid/test sizes floor(n * r / sum(r)) with the
// remainder going to train.
CorpusSplits split_corpus(std::vector<BowDocument> docs, std::array<unsigned, 3> ratios,
                          std::uint64_t seed);

// I/O. Formats are documented in the README.
std::vector<RawDocument> read_corpus_jsonl(const std::filesystem::path& path);
RawDocument parse_corpus_line(std::string_view line);
void write_corpus_jsonl(const std::filesystem::path& path, std::span<const RawDocument> docs);
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

void write_bow_jsonl(const std::filesystem::path& path, std::span<const BowDocument> docs);
std::vector<BowDocument> read_bow_jsonl(const std::filesystem::path& path);
void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary read_vocabulary(const std::filesystem::path& path);

}  // namespace etm
