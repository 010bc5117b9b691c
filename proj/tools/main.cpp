// etmkit command-line driver.
//
//   etmkit prepare --corpus raw.jsonl --out-dir data [--linker dict --aliases a.tsv]
//   etmkit train --data-dir data --embeddings vec.txt --model etm --k 10 --seed 1
//   etmkit eval --model-path model.json --corpus data/test.jsonl --seed 0
//   etmkit run --config run.toml --seeds 1..8
//
// Each subcommand accepts --config <file> (TOML/INI, keys spelled like the
// long flags); flags given on the command line win.

#include <glob.h>

#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "etmkit/error.hpp"
#include "etmkit/hash.hpp"
#include "etmkit/pipeline.hpp"
#include "etmkit/samplers.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

CLI::Option* add_model_option(CLI::App* app, etm::RunConfig& cfg, const char* help) {
  return app
      ->add_option_function<std::string>(
          "--model", [&cfg](const std::string& s) { cfg.model = etm::parse_model_kind(s); }, help)
      ->check(CLI::IsMember({"etm", "detm"}));
}

void write_output(const fs::path& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw etm::DataError("cannot write " + path.string());
  out << text;
}

// "3", "1,2,5" or "1..8".
std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
  std::vector<std::uint64_t> out;
  try {
    if (const auto dots = spec.find(".."); dots != std::string::npos) {
      const auto lo = std::stoull(spec.substr(0, dots));
      const auto hi = std::stoull(spec.substr(dots + 2));
      if (hi < lo) throw etm::UsageError("empty seed range " + spec);
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      std::stringstream ss(spec);
      std::string part;
      while (std::getline(ss, part, ',')) out.push_back(std::stoull(part));
    }
  } catch (const std::logic_error&) {
    throw etm::UsageError("bad seed list '" + spec + "'");
  }
  if (out.empty()) throw etm::UsageError("bad seed list '" + spec + "'");
  return out;
}

std::vector<fs::path> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<fs::path> out;
  if (rc == 0)
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  globfree(&g);
  if (out.empty()) throw etm::UsageError("no files match " + pattern);
  return out;
}

// Options shared by link/prepare/run.
void add_linker_options(CLI::App* app, etm::RunConfig& cfg) {
  app->add_option("--corpus", cfg.corpus, "Corpus JSON Lines")->required();
  app->add_option_function<std::string>(
         "--linker", [&cfg](const std::string& s) { cfg.linker = etm::parse_linker_mode(s); },
         "Entity linker: none, dict or gold")
      ->check(CLI::IsMember({"none", "dict", "gold"}));
  app->add_option("--link-threshold", cfg.link_threshold, "Minimum prior for a dictionary link");
  app->add_option("--aliases", cfg.aliases, "Alias table TSV");
}

void add_prepare_options(CLI::App* app, etm::RunConfig& cfg) {
  app->add_option("--stopwords", cfg.stopwords, "Stopword list, one per line");
  app->add_option("--max-doc-freq", cfg.max_doc_freq, "Drop words in at least this share of documents");
  app->add_option("--slice-start", cfg.slice_start, "First year of slice 0 (default: earliest year)");
  app->add_option("--slice-span", cfg.slice_span, "Years per time slice");
  app->add_option("--split-seed", cfg.split_seed, "Seed of the train/valid/test shuffle");
  app->add_option("--split", cfg.split_ratios, "Train/valid/test ratios")->expected(3);
}

void add_embedding_options(CLI::App* app, etm::RunConfig& cfg) {
  app->add_option("--embeddings", cfg.embeddings, "word2vec text file (.bz2 allowed)")->required();
  app->add_option("--embed-dim", cfg.embed_dim, "Expected vector dimension");
  app->add_option("--max-fallback-fraction", cfg.max_fallback_fraction,
                  "Largest tolerated share of terms without a pretrained vector");
}

void add_train_options(CLI::App* app, etm::RunConfig& cfg) {
  auto& t = cfg.train;
  add_model_option(app, cfg, "Model family: etm or detm");
  app->add_option("--k", t.num_topics, "Number of topics");
  app->add_option("--seed", t.seed, "Training seed");
  app->add_option("--lr", t.learning_rate, "Adam learning rate");
  app->add_option("--batch-size", t.batch_size, "Documents per minibatch");
  app->add_option("--max-epochs", t.max_epochs, "Epoch limit");
  app->add_option("--patience", t.patience, "Non-improving epochs tolerated before stopping");
  app->add_option("--clip-norm", t.clip_norm, "Gradient norm clip");
  app->add_option("--hidden", t.hidden_dim, "Encoder hidden width");
  app->add_option("--sigma2", t.hyper.sigma2, "Topic-embedding random-walk variance");
  app->add_option("--delta2", t.hyper.delta2, "Topic-proportion-mean random-walk variance");
  app->add_option("--gamma2", t.hyper.gamma2, "Variance of theta's prior");
  app->add_option("--eval-seed", cfg.eval_seed, "Seed of the completion split");
}

etm::PreparedCorpus load_prepared(const fs::path& dir) {
  etm::PreparedCorpus p;
  p.vocab = etm::read_vocabulary(dir / etm::artifact::kVocab);
  p.splits.train = etm::read_bow_jsonl(dir / etm::artifact::kTrain);
  p.splits.valid = etm::read_bow_jsonl(dir / etm::artifact::kValid);
  p.splits.test = etm::read_bow_jsonl(dir / etm::artifact::kTest);
  return p;
}

// Config files carry plain "key = value" lines; file them under the
// subcommand being run so they reach its options.
class SubcommandConfig : public CLI::ConfigTOML {
 public:
  explicit SubcommandConfig(std::string section) : section_(std::move(section)) {}
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigTOML::from_config(input);
    for (auto& item : items)
      if (item.parents.empty() && !section_.empty()) item.parents = {section_};
    return items;
  }

 private:
  std::string section_;
};

json aggregate_json(std::span<const double> values) {
  const auto agg = etm::aggregate_ci(values);
  return json{{"mean", agg.mean}, {"ci95", agg.ci95}, {"n", values.size()}, {"values", agg.values}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entity-aware embedded topic models"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML file of option values; keys match the long flags");
  app.failure_message(CLI::FailureMessage::help);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  etm::RunConfig cfg;
  fs::path out_dir, out_path, data_dir, model_path, vocab_path, table_path;
  std::string seeds_spec, inputs_glob, key = "perplexity";

  // link
  auto* link = app.add_subcommand("link", "Tokenize and link a corpus to term sequences");
  add_linker_options(link, cfg);
  link->add_option("--out", out_path, "Linked JSON Lines (default stdout)");

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Link, build the vocabulary, and split into bags of words");
  add_linker_options(prepare, cfg);
  add_prepare_options(prepare, cfg);
  add_model_option(prepare, cfg, "Model the data is for (detm requires years)");
  prepare->add_option("--out-dir", out_dir, "Output directory")->required();

  // train
  auto* trainc = app.add_subcommand("train", "Train a model on prepared data");
  trainc->add_option("--data-dir", data_dir, "Directory written by prepare")->required();
  add_embedding_options(trainc, cfg);
  add_train_options(trainc, cfg);
  trainc->add_option("--out", out_path, "Checkpoint path")->required();

  // eval
  std::uint64_t eval_seed = 0;
  auto* evalc = app.add_subcommand("eval", "Document-completion perplexity");
  evalc->add_option("--model-path", model_path, "Checkpoint")->required();
  evalc->add_option("--corpus", data_dir, "Bag-of-words JSON Lines (prepare output)")->required();
  evalc->add_option("--seed", eval_seed, "Completion split seed");
  evalc->add_option("--out", out_path, "Output JSON (default stdout)");

  // report
  std::size_t top_n = 5;
  auto* reportc = app.add_subcommand("report", "Top terms per topic (per slice for detm)");
  reportc->add_option("--model-path", model_path, "Checkpoint")->required();
  reportc->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  reportc->add_option("--top-n", top_n, "Terms per list");
  reportc->add_option("--out", out_path, "Report JSON (default stdout)");
  reportc->add_option("--table", table_path, "Also write the plain-text grid here");

  // aggregate
  auto* aggc = app.add_subcommand("aggregate", "Mean and 95% CI over per-seed results");
  aggc->add_option("--inputs", inputs_glob, "Glob of JSON files")->required();
  aggc->add_option("--key", key, "Field to aggregate");

  // run
  auto* runc = app.add_subcommand("run", "Full pipeline: link, prepare, embed, train, eval, report");
  add_linker_options(runc, cfg);
  add_prepare_options(runc, cfg);
  add_embedding_options(runc, cfg);
  add_train_options(runc, cfg);
  runc->add_option("--top-n", cfg.top_n, "Terms per report list");
  runc->add_option("--out-dir", cfg.out_dir, "Output directory");
  runc->add_option("--seeds", seeds_spec, "Train one run per seed, e.g. 1..8, then aggregate");

  // sample
  std::string family = "etm";
  std::size_t n_docs = 100, doc_len = 50, vocab_size = 100, n_slices = 1, embed_dim = 16;
  std::uint64_t sample_seed = 0;
  std::size_t sample_k = 3;
  double dirichlet = 0.1;
  int first_year = 2000;
  auto* samplec = app.add_subcommand("sample", "Write a synthetic corpus from a generative model");
  samplec->add_option("--family", family)->check(CLI::IsMember({"lda", "etm", "detm"}));
  samplec->add_option("--k", sample_k, "Topics");
  samplec->add_option("--vocab-size", vocab_size);
  samplec->add_option("--docs", n_docs, "Documents (per slice for detm)");
  samplec->add_option("--length", doc_len, "Tokens per document");
  samplec->add_option("--slices", n_slices, "Time slices (detm)");
  samplec->add_option("--embed-dim", embed_dim, "Embedding dimension (etm, detm)");
  samplec->add_option("--concentration", dirichlet, "Dirichlet concentration (lda)");
  samplec->add_option("--sigma2", cfg.train.hyper.sigma2);
  samplec->add_option("--delta2", cfg.train.hyper.delta2);
  samplec->add_option("--gamma2", cfg.train.hyper.gamma2);
  samplec->add_option("--first-year", first_year, "Year of slice 0");
  samplec->add_option("--seed", sample_seed);
  samplec->add_option("--out-dir", out_dir, "Writes corpus.jsonl, embeddings.txt, truth.json")->required();

  for (int i = 1; i < argc; ++i)
    if (app.get_subcommand_no_throw(argv[i]) != nullptr) {
      app.config_formatter(std::make_shared<SubcommandConfig>(argv[i]));
      break;
    }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(etm::ErrorKind::Usage);
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("etmkit"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*link) {
      const auto raw = etm::read_corpus_jsonl(cfg.corpus);
      std::optional<etm::AliasTable> table;
      if (!cfg.aliases.empty()) table = etm::load_alias_table(cfg.aliases);
      if (cfg.linker == etm::LinkerMode::Dictionary && !table)
        throw etm::UsageError("--linker dict needs --aliases");
      const auto docs = etm::link_corpus(raw, cfg.linker, table ? &*table : nullptr, cfg.link_threshold);
      if (out_path.empty()) out_path = "/dev/stdout";
      etm::write_linked_jsonl(out_path, docs);
    } else if (*prepare) {
      const auto raw = etm::read_corpus_jsonl(cfg.corpus);
      std::optional<etm::AliasTable> table;
      if (!cfg.aliases.empty()) table = etm::load_alias_table(cfg.aliases);
      if (cfg.linker == etm::LinkerMode::Dictionary && !table)
        throw etm::UsageError("--linker dict needs --aliases");
      const auto linked = etm::link_corpus(raw, cfg.linker, table ? &*table : nullptr, cfg.link_threshold);
      const auto p = etm::prepare_corpus(linked, cfg);
      fs::create_directories(out_dir);
      etm::write_linked_jsonl(out_dir / etm::artifact::kLinked, linked);
      etm::write_vocabulary(out_dir / etm::artifact::kVocab, p.vocab);
      etm::write_bow_jsonl(out_dir / etm::artifact::kTrain, p.splits.train);
      etm::write_bow_jsonl(out_dir / etm::artifact::kValid, p.splits.valid);
      etm::write_bow_jsonl(out_dir / etm::artifact::kTest, p.splits.test);
      spdlog::info("vocabulary {} terms ({} entities); splits {}/{}/{}; {} empty documents dropped",
                   p.vocab.size(), p.vocab.num_entities(), p.splits.train.size(), p.splits.valid.size(),
                   p.splits.test.size(), p.dropped_empty);
    } else if (*trainc) {
      cfg.train.eval_seed = cfg.eval_seed;
      const auto p = load_prepared(data_dir);
      const auto rho = etm::load_rho(p.vocab, cfg);
      const auto model = etm::train(cfg.model, p.splits, rho, cfg.train, p.vocab.hash(),
                                    [](const etm::EpochLog& e) {
                                      spdlog::info("epoch {}: elbo/doc {:.6g}, valid perplexity {:.6g}",
                                                   e.epoch, e.train_elbo, e.valid_perplexity);
                                      return true;
                                    });
      etm::save_checkpoint(out_path, model);
      spdlog::info("best epoch {}; checkpoint {}", model.best_epoch, out_path.string());
    } else if (*evalc) {
      const auto model = etm::load_checkpoint(model_path);
      const auto docs = etm::read_bow_jsonl(data_dir);
      const auto r = etm::document_completion_perplexity(model, docs, eval_seed);
      write_output(out_path, etm::perplexity_to_json(r).dump(2) + "\n");
    } else if (*reportc) {
      const auto model = etm::load_checkpoint(model_path);
      const auto vocab = etm::read_vocabulary(vocab_path);
      if (model.vocab_hash && model.vocab_hash != vocab.hash())
        throw etm::DataError("vocabulary file does not match the checkpoint");
      const etm::ReportMetadata meta{model.seed, ""};
      const auto rep = model.is_dynamic() ? etm::transition_report(model, vocab, top_n, meta)
                                          : etm::topic_report(model, vocab, top_n, meta);
      write_output(out_path, etm::report_to_json(rep).dump(2) + "\n");
      if (!table_path.empty()) write_output(table_path, etm::render_report_table(rep));
    } else if (*aggc) {
      std::vector<double> values;
      for (const auto& path : expand_glob(inputs_glob)) {
        std::ifstream in(path);
        try {
          values.push_back(json::parse(in).at(key).get<double>());
        } catch (const json::exception& e) {
          throw etm::DataError(path.string() + ": " + e.what());
        }
      }
      std::cout << aggregate_json(values).dump(2) << '\n';
    } else if (*runc) {
      if (seeds_spec.empty()) {
        const auto r = etm::run_pipeline(cfg);
        spdlog::info("test perplexity {:.6g}; manifest {}", r.test_perplexity, r.manifest.string());
      } else {
        const fs::path root = cfg.out_dir;
        std::vector<double> ppl;
        for (const auto seed : parse_seeds(seeds_spec)) {
          etm::RunConfig one = cfg;
          one.train.seed = seed;
          one.out_dir = root / ("seed-" + std::to_string(seed));
          const auto r = etm::run_pipeline(one);
          spdlog::info("seed {}: test perplexity {:.6g}", seed, r.test_perplexity);
          ppl.push_back(r.test_perplexity);
        }
        if (ppl.size() >= 2) {
          std::ofstream out(root / "aggregate.json");
          out << aggregate_json(ppl).dump(2) << '\n';
        }
      }
    } else if (*samplec) {
      etm::Rng rng(sample_seed);
      fs::create_directories(out_dir);
      const auto V = static_cast<Eigen::Index>(vocab_size);
      const auto K = static_cast<Eigen::Index>(sample_k);
      const auto L = static_cast<Eigen::Index>(embed_dim);
      etm::SyntheticCorpus corpus;
      json truth;
      std::vector<std::pair<std::string, Eigen::VectorXd>> vectors;
      const auto word = [](Eigen::Index v) { return "w" + std::to_string(v); };
      if (family == "lda") {
        const auto params = etm::LdaParams::random(K, V, dirichlet, dirichlet, rng);
        const std::vector<std::size_t> lengths(n_docs, doc_len);
        corpus = etm::sample_lda(params, lengths, rng);
      } else {
        const Eigen::MatrixXd rho = rng.normal_matrix(L, V);
        for (Eigen::Index v = 0; v < V; ++v) vectors.emplace_back(word(v), rho.col(v));
        if (family == "etm") {
          const std::vector<std::size_t> lengths(n_docs, doc_len);
          corpus = etm::sample_etm(rho, rng.normal_matrix(K, L), lengths, rng);
        } else {
          const std::vector<std::size_t> per_slice(n_slices, n_docs);
          corpus = etm::sample_detm(rho, K, static_cast<Eigen::Index>(n_slices), cfg.train.hyper,
                                    per_slice, doc_len, rng)
                       .corpus;
        }
        etm::write_embeddings(out_dir / "embeddings.txt", vectors);
      }
      std::vector<etm::RawDocument> raw;
      for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
        etm::RawDocument doc;
        doc.id = "doc" + std::to_string(d);
        for (const auto w : corpus.docs[d].words) doc.text += (doc.text.empty() ? "" : " ") + word(w);
        if (family == "detm") doc.year = first_year + static_cast<int>(corpus.docs[d].slice);
        raw.push_back(std::move(doc));
      }
      etm::write_corpus_jsonl(out_dir / "corpus.jsonl", raw);
      json betas = json::array();
      for (const auto& b : corpus.beta) {
        json rows = json::array();
        for (Eigen::Index k = 0; k < b.rows(); ++k) {
          std::vector<double> row(b.cols());
          for (Eigen::Index v = 0; v < b.cols(); ++v) row[v] = b(k, v);
          rows.push_back(row);
        }
        betas.push_back(std::move(rows));
      }
      truth = {{"family", family}, {"K", sample_k}, {"V", vocab_size}, {"seed", sample_seed}, {"beta", betas}};
      write_output(out_dir / "truth.json", truth.dump() + "\n");
    }
  } catch (const etm::Error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(e.kind());
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(etm::ErrorKind::Data);
  }
  return 0;
}
