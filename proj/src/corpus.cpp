#include "etmkit/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "etmkit/error.hpp"
#include "etmkit/hash.hpp"
#include "etmkit/random.hpp"

namespace etm {
namespace {

using json = nlohmann::json;

// Decodes one scalar starting at text[i]; malformed input yields U+FFFD.
char32_t decode_utf8(std::string_view text, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
  const unsigned char c = byte(i);
  int extra = 0;
  char32_t cp = 0;
  if (c < 0x80) {
    ++i;
    return c;
  } else if ((c & 0xE0) == 0xC0) {
    extra = 1;
    cp = c & 0x1F;
  } else if ((c & 0xF0) == 0xE0) {
    extra = 2;
    cp = c & 0x0F;
  } else if ((c & 0xF8) == 0xF0) {
    extra = 3;
    cp = c & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + static_cast<std::size_t>(extra) >= text.size()) {
    i = text.size();
    return 0xFFFD;
  }
  for (int k = 1; k <= extra; ++k) {
    const unsigned char cc = byte(i + static_cast<std::size_t>(k));
    if ((cc & 0xC0) != 0x80) {
      i += static_cast<std::size_t>(k);
      return 0xFFFD;
    }
    cp = (cp << 6) | (cc & 0x3F);
  }
  i += static_cast<std::size_t>(extra) + 1;
  return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::u32string decode_all(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) out.push_back(decode_utf8(text, i));
  return out;
}

bool is_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
  }
  switch (c) {
    case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
    case 0x37E: case 0x387:
      return true;
    default:
      break;
  }
  return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) ||
         (c >= 0xFF01 && c <= 0xFF0F) || c == 0xFF1A || c == 0xFF1B || c == 0xFF1F;
}

// Simple case folding for ASCII, Latin-1, Latin Extended-A, Greek, Cyrillic.
char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if (c < 0xC0) return c;
  if (c <= 0xDE && c != 0xD7) return c + 0x20;
  if (c >= 0x100 && c <= 0x17F) {
    if (c == 0x130 || c == 0x138 || c == 0x149 || c == 0x17F) return c;
    if (c == 0x178) return 0xFF;
    const bool even_upper = (c <= 0x137) || (c >= 0x14A && c <= 0x177);
    if (even_upper) return (c % 2 == 0) ? c + 1 : c;
    return (c % 2 == 1) ? c + 1 : c;
  }
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  return c;
}

void check_spans(const RawDocument& doc, std::size_t text_len) {
  std::size_t prev_end = 0;
  for (const auto& span : doc.gold_spans) {
    if (span.start >= span.end || span.end > text_len)
      throw DataError("document " + doc.id + ": gold span [" + std::to_string(span.start) + ", " +
                      std::to_string(span.end) + ") outside text bounds");
    if (span.start < prev_end)
      throw DataError("document " + doc.id + ": gold spans overlap or are unsorted");
    prev_end = span.end;
  }
}

}  // namespace

Term Term::word(std::string token) { return Term{TermKind::Word, std::move(token)}; }

Term Term::entity(std::string_view title) {
  return Term{TermKind::Entity, canonical_entity_key(title)};
}

std::string canonical_entity_key(std::string_view title) {
  if (title.starts_with(kEntityPrefix)) title.remove_prefix(kEntityPrefix.size());
  std::string key(kEntityPrefix);
  key.reserve(key.size() + title.size());
  for (char c : title) key.push_back(c == ' ' ? '_' : c);
  return key;
}

Term term_from_surface(std::string_view surface) {
  if (surface.starts_with(kEntityPrefix)) return Term{TermKind::Entity, std::string(surface)};
  return Term{TermKind::Word, std::string(surface)};
}

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < text.size(); ++n) decode_utf8(text, i);
  return n;
}

std::vector<Token> tokenize_with_offsets(std::string_view text) {
  const std::u32string cps = decode_all(text);
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && is_space(cps[i])) ++i;
    std::size_t begin = i;
    while (i < cps.size() && !is_space(cps[i])) ++i;
    std::size_t end = i;
    while (begin < end && is_punct(cps[begin])) ++begin;
    while (end > begin && is_punct(cps[end - 1])) --end;
    if (begin == end) continue;
    Token tok;
    tok.char_start = begin;
    tok.char_end = end;
    for (std::size_t k = begin; k < end; ++k) encode_utf8(to_lower(cps[k]), tok.text);
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& tok : tokenize_with_offsets(text)) out.push_back(std::move(tok.text));
  return out;
}

// --- Vocabulary --------------------------------------------------------------

namespace {
std::string index_key(const Term& t) {
  std::string key(1, t.kind == TermKind::Entity ? 'E' : 'W');
  key += t.surface;
  return key;
}
}  // namespace

Vocabulary::Vocabulary(std::vector<Term> terms, VocabularyProvenance provenance)
    : terms_(std::move(terms)), provenance_(provenance) {
  if (terms_.empty()) throw DataError("empty vocabulary");
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!index_.emplace(index_key(terms_[i]), static_cast<TermId>(i)).second)
      throw DataError("duplicate vocabulary term: " + terms_[i].surface);
  }
}

std::optional<TermId> Vocabulary::find(const Term& term) const {
  const auto it = index_.find(index_key(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<TermId> Vocabulary::find(std::string_view surface) const {
  return find(term_from_surface(surface));
}

std::size_t Vocabulary::num_entities() const {
  return static_cast<std::size_t>(
      std::count_if(terms_.begin(), terms_.end(), [](const Term& t) { return t.is_entity(); }));
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a64("vocab");
  for (const auto& t : terms_) {
    h = fnv1a64(t.surface, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

Vocabulary build_vocabulary(std::span<const TermSequence> docs, double max_doc_freq,
                            const std::unordered_set<std::string>& stopwords) {
  if (!(max_doc_freq > 0.0 && max_doc_freq <= 1.0))
    throw UsageError("max_doc_freq must lie in (0, 1]");
  if (docs.empty()) throw DataError("cannot build a vocabulary from zero documents");

  struct Stats {
    std::uint64_t corpus_freq = 0;
    std::size_t doc_freq = 0;
    std::size_t last_doc = static_cast<std::size_t>(-1);
  };
  std::map<Term, Stats> stats;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto& term : docs[d]) {
      auto& s = stats[term];
      ++s.corpus_freq;
      if (s.last_doc != d) {
        ++s.doc_freq;
        s.last_doc = d;
      }
    }
  }

  VocabularyProvenance prov;
  prov.max_doc_freq = max_doc_freq;
  prov.num_docs = docs.size();
  // Guard against 0.7 * 10 landing a hair above 7.
  const double limit = max_doc_freq * static_cast<double>(docs.size()) * (1.0 - 1e-12);

  std::vector<std::pair<Term, std::uint64_t>> kept;
  for (const auto& [term, s] : stats) {
    if (!term.is_entity()) {
      if (stopwords.contains(term.surface)) {
        ++prov.removed_stopwords;
        continue;
      }
      if (!(static_cast<double>(s.doc_freq) < limit)) {
        ++prov.removed_frequent;
        continue;
      }
    }
    kept.emplace_back(term, s.corpus_freq);
  }
  if (kept.empty()) throw DataError("empty vocabulary");

  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    if (a.first.surface != b.first.surface) return a.first.surface < b.first.surface;
    return a.first.kind < b.first.kind;
  });
  std::vector<Term> terms;
  terms.reserve(kept.size());
  for (auto& [term, freq] : kept) terms.push_back(std::move(term));
  return Vocabulary(std::move(terms), prov);
}

// --- Documents ---------------------------------------------------------------

std::size_t assign_time_slice(int year, int start_year, int span) {
  if (span < 1) throw UsageError("time-slice span must be at least 1");
  if (year < start_year)
    throw DataError("year before corpus start: " + std::to_string(year) + " < " +
                    std::to_string(start_year));
  return static_cast<std::size_t>((year - start_year) / span);
}

std::optional<BowDocument> to_bow(std::string doc_id, std::span<const Term> terms,
                                  const Vocabulary& vocab, std::optional<std::size_t> slice) {
  std::map<TermId, std::uint32_t> counts;
  for (const auto& term : terms) {
    if (auto id = vocab.find(term)) ++counts[*id];
  }
  if (counts.empty()) {
    spdlog::warn("document {} has no in-vocabulary terms; dropped", doc_id);
    return std::nullopt;
  }
  BowDocument doc;
  doc.doc_id = std::move(doc_id);
  doc.slice = slice;
  doc.counts.assign(counts.begin(), counts.end());
  for (const auto& [id, c] : doc.counts) doc.n_tokens += c;
  return doc;
}

CorpusSplits split_corpus(std::vector<BowDocument> docs, std::array<unsigned, 3> ratios,
                          std::uint64_t seed) {
  const unsigned total = ratios[0] + ratios[1] + ratios[2];
  if (total == 0) throw UsageError("split ratios sum to zero");
  const std::size_t n = docs.size();
  const std::size_t n_valid = n * ratios[1] / total;
  const std::size_t n_test = n * ratios[2] / total;
  const std::size_t n_train = n - n_valid - n_test;
  if ((ratios[0] && n_train == 0) || (ratios[1] && n_valid == 0) || (ratios[2] && n_test == 0))
    throw DataError("too few documents (" + std::to_string(n) + ") for a " +
                    std::to_string(ratios[0]) + ":" + std::to_string(ratios[1]) + ":" +
                    std::to_string(ratios[2]) + " split");

  // Canonical order first, so the split depends only on content and seed.
  std::sort(docs.begin(), docs.end(),
            [](const BowDocument& a, const BowDocument& b) { return a.doc_id < b.doc_id; });
  for (std::size_t i = 1; i < n; ++i)
    if (docs[i].doc_id == docs[i - 1].doc_id)
      throw DataError("duplicate document id: " + docs[i].doc_id);
  Rng rng(hash_combine(seed, fnv1a64("split")));
  rng.shuffle(docs);

  CorpusSplits out;
  out.seed = seed;
  auto it = std::make_move_iterator(docs.begin());
  out.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  out.valid.assign(it + static_cast<std::ptrdiff_t>(n_train),
                   it + static_cast<std::ptrdiff_t>(n_train + n_valid));
  out.test.assign(it + static_cast<std::ptrdiff_t>(n_train + n_valid),
                  std::make_move_iterator(docs.end()));
  return out;
}

// --- I/O ---------------------------------------------------------------------

RawDocument parse_corpus_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed corpus line: ") + e.what());
  }
  RawDocument doc;
  try {
    doc.id = j.at("id").get<std::string>();
    doc.text = j.at("text").get<std::string>();
    if (j.contains("year") && !j["year"].is_null()) doc.year = j["year"].get<int>();
    if (j.contains("gold_spans") && !j["gold_spans"].is_null()) {
      for (const auto& s : j["gold_spans"]) {
        doc.gold_spans.push_back(GoldSpan{s.at("start").get<std::size_t>(),
                                          s.at("end").get<std::size_t>(),
                                          s.at("entity").get<std::string>()});
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("corpus record missing or mistyped field: ") + e.what());
  }
  check_spans(doc, utf8_length(doc.text));
  return doc;
}

std::vector<RawDocument> read_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());
  std::vector<RawDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      docs.push_back(parse_corpus_line(line));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

void write_corpus_jsonl(const std::filesystem::path& path, std::span<const RawDocument> docs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& d : docs) {
    json j{{"id", d.id}, {"text", d.text}};
    if (d.year) j["year"] = *d.year;
    if (!d.gold_spans.empty()) {
      json spans = json::array();
      for (const auto& s : d.gold_spans)
        spans.push_back({{"start", s.start}, {"end", s.end}, {"entity", s.entity}});
      j["gold_spans"] = std::move(spans);
    }
    out << j.dump() << '\n';
  }
}

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stopword file " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    words.insert(line.substr(first));
  }
  return words;
}

void write_bow_jsonl(const std::filesystem::path& path, std::span<const BowDocument> docs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& d : docs) {
    json counts = json::object();
    for (const auto& [id, c] : d.counts) counts[std::to_string(id)] = c;
    json j{{"id", d.doc_id}, {"counts", std::move(counts)}};
    if (d.slice) j["slice"] = *d.slice;
    out << j.dump() << '\n';
  }
}

std::vector<BowDocument> read_bow_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<BowDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      BowDocument d;
      d.doc_id = j.at("id").get<std::string>();
      if (j.contains("slice") && !j["slice"].is_null()) d.slice = j["slice"].get<std::size_t>();
      for (const auto& [key, value] : j.at("counts").items()) {
        const auto c = value.get<std::uint32_t>();
        if (c == 0) continue;
        d.counts.emplace_back(static_cast<TermId>(std::stoul(key)), c);
        d.n_tokens += c;
      }
      std::sort(d.counts.begin(), d.counts.end());
      docs.push_back(std::move(d));
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& t : vocab.terms()) out << t.surface << '\n';
}

Vocabulary read_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  std::vector<Term> terms;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    terms.push_back(term_from_surface(line));
  }
  return Vocabulary(std::move(terms));
}

}  // namespace etm
