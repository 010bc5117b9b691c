#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "etmkit/corpus.hpp"

namespace etm {

struct Candidate {
  std::string title;
  double prior = 1.0;
};

struct AliasEntry {
  std::string mention;  // lowercased tokens joined by single spaces
  std::string title;
  double prior = 1.0;
};

// Mention -> candidate entities sorted by descending prior (ties by title).
// Priors for one mention are rescaled to sum to 1 when they exceed it.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(std::span<const AliasEntry> entries);

  const std::vector<Candidate>* lookup(std::string_view mention) const;
  std::size_t max_mention_tokens() const { return max_tokens_; }
  std::size_t size() const { return table_.size(); }
  bool empty() const { return table_.empty(); }

 private:
  std::map<std::string, std::vector<Candidate>, std::less<>> table_;
  std::size_t max_tokens_ = 0;
};

// TSV: mention \t entity_title [\t prior]. Throws DataError naming the line
// for malformed rows and for an empty file.
AliasTable load_alias_table(const std::filesystem::path& path);

enum class LinkSource { Dictionary, Gold };

struct LinkedSpan {
  std::size_t token_start = 0;
  std::size_t token_end = 0;  // exclusive
  std::string entity_title;
  double confidence = 1.0;
  LinkSource source = LinkSource::Dictionary;
};

// Greedy left-to-right longest match against the alias table. A match is
// accepted when its top candidate's prior reaches the threshold.
std::vector<LinkedSpan> link_dictionary(std::span<const std::string> tokens,
                                        const AliasTable& table, double threshold);

// Maps each gold character span onto the minimal covering token range.
std::vector<LinkedSpan> apply_gold_spans(const RawDocument& doc, std::span<const Token> tokens);

// Replaces each span by one entity term; other tokens become word terms.
TermSequence rewrite_terms(std::span<const std::string> tokens,
                           std::span<const LinkedSpan> spans);

enum class LinkerMode { None, Dictionary, Gold };

LinkerMode parse_linker_mode(std::string_view name);
std::string_view to_string(LinkerMode mode);

// Tokenize + link + rewrite for one raw document. In Gold mode an alias
// table, when given, fills the gaps between gold spans; gold wins overlaps.
TermSequence link_document(const RawDocument& doc, LinkerMode mode, const AliasTable* table,
                           double threshold);

}  // namespace etm
