#include "etmkit/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "etmkit/error.hpp"
#include "etmkit/hash.hpp"

namespace etm {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) return;
  if (!fs::is_regular_file(path))
    throw DataError(std::string(what) + " file not found: " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// Runs one stage, prefixing any failure with the stage name.
template <class F>
auto stage(const char* name, F&& body) {
  spdlog::info("stage {}", name);
  try {
    return body();
  } catch (const Error& e) {
    raise(e.kind(), std::string("stage ") + name + ": " + e.what());
  } catch (const json::exception& e) {
    throw DataError(std::string("stage ") + name + ": " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  if (corpus.empty()) throw UsageError("no corpus given");
  if (embeddings.empty()) throw UsageError("no embedding file given");
  if (!(link_threshold >= 0.0 && link_threshold <= 1.0))
    throw UsageError("link threshold must lie in [0, 1]");
  if (!(max_doc_freq > 0.0 && max_doc_freq <= 1.0))
    throw UsageError("max document frequency must lie in (0, 1]");
  if (!(max_fallback_fraction >= 0.0 && max_fallback_fraction <= 1.0))
    throw UsageError("max fallback fraction must lie in [0, 1]");
  if (slice_span < 1) throw UsageError("slice span must be at least 1");
  if (top_n == 0) throw UsageError("top-n must be at least 1");
  if (split_ratios[0] == 0 || split_ratios[1] == 0 || split_ratios[2] == 0)
    throw UsageError("split ratios must be positive");
  train.validate();
  require_file(corpus, "corpus");
  require_file(aliases, "alias table");
  require_file(stopwords, "stopword");
  require_file(embeddings, "embedding");
}

json RunConfig::to_json() const {
  return json{{"corpus", corpus.generic_string()},
              {"linker", to_string(linker)},
              {"link_threshold", link_threshold},
              {"aliases", aliases.generic_string()},
              {"stopwords", stopwords.generic_string()},
              {"embeddings", embeddings.generic_string()},
              {"embed_dim", embed_dim},
              {"max_fallback_fraction", max_fallback_fraction},
              {"max_doc_freq", max_doc_freq},
              {"slice_start", slice_start ? json(*slice_start) : json(nullptr)},
              {"slice_span", slice_span},
              {"split", split_ratios},
              {"split_seed", split_seed},
              {"model", to_string(model)},
              {"k", train.num_topics},
              {"lr", train.learning_rate},
              {"batch_size", train.batch_size},
              {"max_epochs", train.max_epochs},
              {"patience", train.patience},
              {"seed", train.seed},
              {"clip_norm", train.clip_norm},
              {"hidden", train.hidden_dim},
              {"sigma2", train.hyper.sigma2},
              {"delta2", train.hyper.delta2},
              {"gamma2", train.hyper.gamma2},
              {"eval_seed", eval_seed},
              {"top_n", top_n}};
}

std::uint64_t RunConfig::hash() const { return fnv1a64(to_json().dump()); }

std::vector<LinkedDocument> link_corpus(std::span<const RawDocument> docs, LinkerMode mode,
                                        const AliasTable* table, double threshold) {
  std::vector<LinkedDocument> out;
  out.reserve(docs.size());
  for (const auto& doc : docs)
    out.push_back({doc.id, doc.year, link_document(doc, mode, table, threshold)});
  return out;
}

void write_linked_jsonl(const fs::path& path, std::span<const LinkedDocument> docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& d : docs) {
    json terms = json::array();
    for (const auto& t : d.terms) terms.push_back(t.surface);
    json j{{"id", d.id}};
    if (d.year) j["year"] = *d.year;
    j["terms"] = std::move(terms);
    out << j.dump() << '\n';
  }
}

std::vector<LinkedDocument> read_linked_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<LinkedDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      LinkedDocument d;
      d.id = j.at("id").get<std::string>();
      if (j.contains("year") && !j["year"].is_null()) d.year = j["year"].get<int>();
      for (const auto& s : j.at("terms")) d.terms.push_back(term_from_surface(s.get<std::string>()));
      docs.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

PreparedCorpus prepare_corpus(std::span<const LinkedDocument> docs, const RunConfig& config) {
  if (docs.empty()) throw DataError("corpus has no documents");
  std::unordered_set<std::string> stop;
  if (!config.stopwords.empty()) stop = load_stopwords(config.stopwords);

  std::vector<TermSequence> seqs;
  seqs.reserve(docs.size());
  for (const auto& d : docs) seqs.push_back(d.terms);

  PreparedCorpus out;
  out.vocab = build_vocabulary(seqs, config.max_doc_freq, stop);

  const bool all_years =
      std::all_of(docs.begin(), docs.end(), [](const LinkedDocument& d) { return d.year.has_value(); });
  if (config.model == ModelKind::Detm && !all_years)
    throw DataError("the dynamic model needs a year on every document");
  int start = 0;
  if (all_years) {
    start = config.slice_start.value_or(
        std::min_element(docs.begin(), docs.end(), [](const auto& a, const auto& b) {
          return *a.year < *b.year;
        })->year.value());
  }

  std::vector<BowDocument> bows;
  for (const auto& d : docs) {
    std::optional<std::size_t> slice;
    if (all_years) slice = assign_time_slice(*d.year, start, config.slice_span);
    if (auto bow = to_bow(d.id, d.terms, out.vocab, slice))
      bows.push_back(std::move(*bow));
    else
      ++out.dropped_empty;
  }
  out.splits = split_corpus(std::move(bows), config.split_ratios, config.split_seed);
  return out;
}

EmbeddingMatrix load_rho(const Vocabulary& vocab, const RunConfig& config) {
  std::unordered_set<std::string> keys;
  for (const auto& t : vocab.terms()) keys.insert(t.surface);
  std::optional<std::size_t> dim;
  if (config.embed_dim) dim = config.embed_dim;
  const EmbeddingStore store = load_embeddings(config.embeddings, dim, &keys);
  EmbeddingMatrix rho = build_rho(vocab, store, config.max_fallback_fraction);
  spdlog::info("rho: {} word vectors, {} entity vectors, {} fallback", rho.count(ColumnSource::WordVector),
               rho.count(ColumnSource::EntityVector), rho.count(ColumnSource::Fallback));
  return rho;
}

json perplexity_to_json(const PerplexityResult& r) {
  json per_doc = json::array();
  for (const auto& d : r.per_doc)
    per_doc.push_back({{"id", d.doc_id}, {"log_likelihood", d.log_likelihood}, {"n_tokens", d.n_tokens}});
  return json{{"perplexity", r.perplexity},
              {"n_tokens", r.n_eval_tokens},
              {"n_skipped", r.n_skipped},
              {"per_doc", std::move(per_doc)}};
}

RunResult run_pipeline(const RunConfig& config) {
  stage("validate", [&] { config.validate(); return 0; });
  const fs::path& dir = config.out_dir;
  fs::create_directories(dir);
  json artifacts = json::object();
  const auto record = [&](const char* name) { artifacts[name] = to_hex(hash_file(dir / name)); };

  auto linked = stage("link", [&] {
    const auto raw = read_corpus_jsonl(config.corpus);
    std::optional<AliasTable> table;
    if (!config.aliases.empty()) table = load_alias_table(config.aliases);
    if (config.linker == LinkerMode::Dictionary && !table)
      throw UsageError("dictionary linking needs an alias table");
    auto docs = link_corpus(raw, config.linker, table ? &*table : nullptr, config.link_threshold);
    write_linked_jsonl(dir / artifact::kLinked, docs);
    record(artifact::kLinked);
    return docs;
  });

  auto prepared = stage("prepare", [&] {
    auto p = prepare_corpus(linked, config);
    write_vocabulary(dir / artifact::kVocab, p.vocab);
    write_bow_jsonl(dir / artifact::kTrain, p.splits.train);
    write_bow_jsonl(dir / artifact::kValid, p.splits.valid);
    write_bow_jsonl(dir / artifact::kTest, p.splits.test);
    for (const char* name : {artifact::kVocab, artifact::kTrain, artifact::kValid, artifact::kTest})
      record(name);
    return p;
  });

  auto rho = stage("embed", [&] { return load_rho(prepared.vocab, config); });

  auto model = stage("train", [&] {
    TrainConfig tc = config.train;
    tc.eval_seed = config.eval_seed;
    auto m = train(config.model, prepared.splits, rho, tc, prepared.vocab.hash());
    save_checkpoint(dir / artifact::kCheckpoint, m);
    record(artifact::kCheckpoint);
    return m;
  });

  auto result = stage("eval", [&] {
    auto r = document_completion_perplexity(model, prepared.splits.test, config.eval_seed);
    write_text(dir / artifact::kEval, perplexity_to_json(r).dump(2) + "\n");
    record(artifact::kEval);
    return r;
  });

  stage("report", [&] {
    ReportMetadata meta{config.train.seed, to_hex(hash_file(config.corpus))};
    const TopicReport rep = model.is_dynamic()
                                ? transition_report(model, prepared.vocab, config.top_n, meta)
                                : topic_report(model, prepared.vocab, config.top_n, meta);
    write_text(dir / artifact::kReportJson, report_to_json(rep).dump(2) + "\n");
    write_text(dir / artifact::kReportTable, render_report_table(rep));
    record(artifact::kReportJson);
    record(artifact::kReportTable);
    return 0;
  });

  RunResult out;
  out.test_perplexity = result.perplexity;
  out.vocab_size = prepared.vocab.size();
  out.num_entities = prepared.vocab.num_entities();
  out.manifest = dir / artifact::kManifest;

  stage("manifest", [&] {
    json inputs = json::object();
    inputs["corpus"] = to_hex(hash_file(config.corpus));
    if (!config.aliases.empty()) inputs["aliases"] = to_hex(hash_file(config.aliases));
    if (!config.stopwords.empty()) inputs["stopwords"] = to_hex(hash_file(config.stopwords));
    inputs["embeddings"] = to_hex(hash_file(config.embeddings));
    const json manifest{{"config_hash", to_hex(config.hash())},
                        {"config", config.to_json()},
                        {"inputs", std::move(inputs)},
                        {"artifacts", artifacts},
                        {"vocabulary",
                         {{"size", out.vocab_size},
                          {"entities", out.num_entities},
                          {"hash", to_hex(prepared.vocab.hash())},
                          {"dropped_documents", prepared.dropped_empty}}},
                        {"splits",
                         {{"train", prepared.splits.train.size()},
                          {"valid", prepared.splits.valid.size()},
                          {"test", prepared.splits.test.size()}}},
                        {"best_epoch", model.best_epoch},
                        {"test_perplexity", out.test_perplexity}};
    write_text(out.manifest, manifest.dump(2) + "\n");
    return 0;
  });
  return out;
}

}  // namespace etm
