#include "etmkit/linker.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "etmkit/error.hpp"

namespace etm {
namespace {

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? line.npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

}  // namespace

AliasTable::AliasTable(std::span<const AliasEntry> entries) {
  std::map<std::string, std::map<std::string, double>, std::less<>> merged;
  for (const auto& e : entries) {
    const auto tokens = tokenize(e.mention);
    if (tokens.empty()) continue;
    merged[join_tokens(tokens)][e.title] += e.prior;
    max_tokens_ = std::max(max_tokens_, tokens.size());
  }
  for (auto& [mention, by_title] : merged) {
    double total = 0.0;
    for (const auto& [title, prior] : by_title) total += prior;
    std::vector<Candidate> cands;
    for (const auto& [title, prior] : by_title)
      cands.push_back(Candidate{title, total > 1.0 ? prior / total : prior});
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.prior != b.prior) return a.prior > b.prior;
      return a.title < b.title;
    });
    table_.emplace(mention, std::move(cands));
  }
}

const std::vector<Candidate>* AliasTable::lookup(std::string_view mention) const {
  const auto it = table_.find(mention);
  return it == table_.end() ? nullptr : &it->second;
}

AliasTable load_alias_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open alias table " + path.string());
  std::vector<AliasEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    const auto where = path.string() + ":" + std::to_string(lineno);
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() || fields[1].empty())
      throw DataError(where + ": expected mention<TAB>entity[<TAB>prior]");
    AliasEntry e{std::string(fields[0]), std::string(fields[1]), 1.0};
    if (fields.size() == 3) {
      const auto f = fields[2];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), e.prior);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(e.prior) ||
          e.prior < 0.0)
        throw DataError(where + ": invalid prior '" + std::string(f) + "'");
    }
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw DataError("alias table " + path.string() + " is empty");
  return AliasTable(entries);
}

std::vector<LinkedSpan> link_dictionary(std::span<const std::string> tokens,
                                        const AliasTable& table, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw UsageError("link threshold must lie in [0, 1]");
  std::vector<LinkedSpan> spans;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const std::size_t longest = std::min(table.max_mention_tokens(), tokens.size() - i);
    bool matched = false;
    for (std::size_t len = longest; len >= 1; --len) {
      const auto* cands = table.lookup(join_tokens(tokens.subspan(i, len)));
      if (!cands || cands->empty() || cands->front().prior < threshold) continue;
      spans.push_back(LinkedSpan{i, i + len, cands->front().title, cands->front().prior,
                                 LinkSource::Dictionary});
      i += len;
      matched = true;
      break;
    }
    if (!matched) ++i;
  }
  return spans;
}

std::vector<LinkedSpan> apply_gold_spans(const RawDocument& doc, std::span<const Token> tokens) {
  const std::size_t text_len = utf8_length(doc.text);
  std::vector<LinkedSpan> spans;
  for (const auto& gold : doc.gold_spans) {
    if (gold.start >= gold.end || gold.end > text_len)
      throw DataError("document " + doc.id + ": gold span [" + std::to_string(gold.start) + ", " +
                      std::to_string(gold.end) + ") outside text bounds");
    // Tokens overlapping [start, end).
    std::size_t first = tokens.size();
    std::size_t last = 0;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (tokens[t].char_end > gold.start && tokens[t].char_start < gold.end) {
        first = std::min(first, t);
        last = t + 1;
      }
    }
    if (first >= last) {
      spdlog::warn("document {}: gold span for {} covers no token; skipped", doc.id, gold.entity);
      continue;
    }
    if (!spans.empty() && first < spans.back().token_end) {
      spdlog::warn("document {}: gold span for {} collides with a previous span after token "
                   "expansion; skipped",
                   doc.id, gold.entity);
      continue;
    }
    spans.push_back(LinkedSpan{first, last, gold.entity, 1.0, LinkSource::Gold});
  }
  return spans;
}

TermSequence rewrite_terms(std::span<const std::string> tokens,
                           std::span<const LinkedSpan> spans) {
  std::vector<const LinkedSpan*> ordered;
  for (const auto& s : spans) {
    if (s.token_start >= s.token_end || s.token_end > tokens.size())
      throw DataError("linked span outside token range");
    ordered.push_back(&s);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const LinkedSpan* a, const LinkedSpan* b) { return a->token_start < b->token_start; });
  for (std::size_t i = 1; i < ordered.size(); ++i)
    if (ordered[i]->token_start < ordered[i - 1]->token_end)
      throw DataError("overlapping linked spans");

  TermSequence out;
  out.reserve(tokens.size());
  std::size_t pos = 0;
  for (const auto* s : ordered) {
    for (; pos < s->token_start; ++pos) out.push_back(Term::word(tokens[pos]));
    out.push_back(Term::entity(s->entity_title));
    pos = s->token_end;
  }
  for (; pos < tokens.size(); ++pos) out.push_back(Term::word(tokens[pos]));
  return out;
}

LinkerMode parse_linker_mode(std::string_view name) {
  if (name == "none") return LinkerMode::None;
  if (name == "dict") return LinkerMode::Dictionary;
  if (name == "gold") return LinkerMode::Gold;
  throw UsageError("unknown linker mode '" + std::string(name) + "' (expected dict, gold or none)");
}

std::string_view to_string(LinkerMode mode) {
  switch (mode) {
    case LinkerMode::None: return "none";
    case LinkerMode::Dictionary: return "dict";
    case LinkerMode::Gold: return "gold";
  }
  return "none";
}

TermSequence link_document(const RawDocument& doc, LinkerMode mode, const AliasTable* table,
                           double threshold) {
  const auto tokens_with_offsets = tokenize_with_offsets(doc.text);
  std::vector<std::string> tokens;
  tokens.reserve(tokens_with_offsets.size());
  for (const auto& t : tokens_with_offsets) tokens.push_back(t.text);

  std::vector<LinkedSpan> spans;
  switch (mode) {
    case LinkerMode::None:
      break;
    case LinkerMode::Dictionary:
      if (!table) throw UsageError("dictionary linking requires an alias table");
      spans = link_dictionary(tokens, *table, threshold);
      break;
    case LinkerMode::Gold: {
      spans = apply_gold_spans(doc, tokens_with_offsets);
      if (table) {
        auto dict = link_dictionary(tokens, *table, threshold);
        std::erase_if(dict, [&](const LinkedSpan& d) {
          return std::any_of(spans.begin(), spans.end(), [&](const LinkedSpan& g) {
            return d.token_start < g.token_end && g.token_start < d.token_end;
          });
        });
        spans.insert(spans.end(), dict.begin(), dict.end());
      }
      break;
    }
  }
  return rewrite_terms(tokens, spans);
}

}  // namespace etm
