#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>

#include "etmkit/embeddings.hpp"
#include "etmkit/error.hpp"
#include "etmkit/evaluation.hpp"
#include "etmkit/linker.hpp"
#include "etmkit/model_math.hpp"
#include "etmkit/pipeline.hpp"
#include "etmkit/samplers.hpp"
#include "etmkit/train.hpp"

namespace py = pybind11;
using namespace etm;

namespace {

std::vector<std::string> surfaces(const TermSequence& terms) {
  std::vector<std::string> out;
  out.reserve(terms.size());
  for (const auto& t : terms) out.push_back(t.surface);
  return out;
}

BowDocument bow_from_tokens(std::string id, const std::vector<TermId>& tokens,
                            std::optional<std::size_t> slice) {
  std::map<TermId, std::uint32_t> counts;
  for (TermId t : tokens) ++counts[t];
  BowDocument d;
  d.doc_id = std::move(id);
  d.counts.assign(counts.begin(), counts.end());
  d.n_tokens = tokens.size();
  d.slice = slice;
  return d;
}

py::dict perplexity_dict(const PerplexityResult& r) {
  py::list per_doc;
  for (const auto& s : r.per_doc)
    per_doc.append(py::dict(py::arg("id") = s.doc_id, py::arg("log_likelihood") = s.log_likelihood,
                            py::arg("n_tokens") = s.n_tokens));
  return py::dict(py::arg("perplexity") = r.perplexity, py::arg("n_tokens") = r.n_eval_tokens,
                  py::arg("n_skipped") = r.n_skipped, py::arg("per_doc") = per_doc);
}

}  // namespace

PYBIND11_MODULE(_etmkit, m) {
  m.doc() = "Entity-aware embedded topic models";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  // corpus and linking
  m.def("tokenize", [](std::string_view text) { return tokenize(text); }, py::arg("text"));
  m.def("canonical_entity_key", &canonical_entity_key, py::arg("title"));

  py::class_<AliasTable>(m, "AliasTable")
      .def(py::init([](const std::vector<std::tuple<std::string, std::string, double>>& rows) {
             std::vector<AliasEntry> entries;
             for (const auto& [mention, title, prior] : rows) entries.push_back({mention, title, prior});
             return AliasTable(entries);
           }),
           py::arg("rows"))
      .def_static("load", &load_alias_table, py::arg("path"))
      .def("lookup",
           [](const AliasTable& t, std::string_view mention) {
             std::vector<std::pair<std::string, double>> out;
             if (const auto* c = t.lookup(mention))
               for (const auto& cand : *c) out.emplace_back(cand.title, cand.prior);
             return out;
           },
           py::arg("mention"))
      .def("__len__", &AliasTable::size);

  m.def(
      "link_text",
      [](std::string text, const AliasTable* table, double threshold) {
        RawDocument doc{"", std::move(text), std::nullopt, {}};
        return surfaces(link_document(doc, table ? LinkerMode::Dictionary : LinkerMode::None, table, threshold));
      },
      py::arg("text"), py::arg("table") = nullptr, py::arg("threshold") = 0.5,
      "Tokenize and, with a table, dictionary-link; returns term surfaces.");

  // embeddings
  m.def(
      "load_embeddings",
      [](const std::filesystem::path& path, std::optional<std::size_t> dim,
         std::optional<std::vector<std::string>> keys) {
        std::unordered_set<std::string> keep;
        if (keys) keep.insert(keys->begin(), keys->end());
        const EmbeddingStore store = load_embeddings(path, dim, keys ? &keep : nullptr);
        std::map<std::string, Eigen::VectorXd> out;
        if (keys)
          for (const auto& k : *keys)
            if (const auto* v = store.find(k)) out.emplace(k, *v);
        return std::make_pair(store.dim(), out);
      },
      py::arg("path"), py::arg("dim") = std::nullopt, py::arg("keys") = std::nullopt,
      "Returns (dim, {key: vector}) for the requested keys.");
  m.def("cosine_similarity", &cosine_similarity, py::arg("a"), py::arg("b"));
  m.def("fallback_vector", &fallback_vector, py::arg("key"), py::arg("dim"));

  // model math
  m.def("softmax", &softmax, py::arg("x"));
  m.def("compute_beta", py::overload_cast<const MatrixXd&, const MatrixXd&>(&compute_beta), py::arg("rho"),
        py::arg("alpha"));

  // samplers
  m.def(
      "sample_etm",
      [](const MatrixXd& rho, const MatrixXd& alpha, const std::vector<std::size_t>& lengths, std::uint64_t seed) {
        Rng rng(seed);
        const auto c = sample_etm(rho, alpha, lengths, rng);
        std::vector<std::vector<TermId>> docs;
        for (const auto& d : c.docs) docs.push_back(d.words);
        return std::make_pair(docs, c.beta[0]);
      },
      py::arg("rho"), py::arg("alpha"), py::arg("doc_lengths"), py::arg("seed"),
      "Returns (documents as term-id lists, beta).");
  m.def(
      "sample_lda",
      [](Eigen::Index k, Eigen::Index v, double concentration, const std::vector<std::size_t>& lengths,
         std::uint64_t seed) {
        Rng rng(seed);
        const auto params = LdaParams::random(k, v, concentration, concentration, rng);
        const auto c = sample_lda(params, lengths, rng);
        std::vector<std::vector<TermId>> docs;
        for (const auto& d : c.docs) docs.push_back(d.words);
        return std::make_pair(docs, params.beta);
      },
      py::arg("num_topics"), py::arg("vocab_size"), py::arg("concentration"), py::arg("doc_lengths"),
      py::arg("seed"));
  m.def(
      "sample_random_walk",
      [](Eigen::Index rows, Eigen::Index cols, Eigen::Index steps, double variance, std::uint64_t seed) {
        Rng rng(seed);
        return sample_random_walk(rows, cols, steps, variance, rng);
      },
      py::arg("rows"), py::arg("cols"), py::arg("num_steps"), py::arg("step_variance"), py::arg("seed"));

  // training
  py::class_<BowDocument>(m, "BowDocument")
      .def(py::init(&bow_from_tokens), py::arg("doc_id"), py::arg("tokens"), py::arg("slice") = std::nullopt)
      .def_readonly("doc_id", &BowDocument::doc_id)
      .def_readonly("counts", &BowDocument::counts)
      .def_readonly("n_tokens", &BowDocument::n_tokens)
      .def_readonly("slice", &BowDocument::slice);

  py::class_<DetmHyper>(m, "DetmHyper")
      .def(py::init<>())
      .def_readwrite("sigma2", &DetmHyper::sigma2)
      .def_readwrite("delta2", &DetmHyper::delta2)
      .def_readwrite("gamma2", &DetmHyper::gamma2);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("num_topics", &TrainConfig::num_topics)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("max_epochs", &TrainConfig::max_epochs)
      .def_readwrite("patience", &TrainConfig::patience)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("clip_norm", &TrainConfig::clip_norm)
      .def_readwrite("hidden_dim", &TrainConfig::hidden_dim)
      .def_readwrite("hyper", &TrainConfig::hyper)
      .def_readwrite("eval_seed", &TrainConfig::eval_seed);

  py::class_<TrainedModel>(m, "TrainedModel")
      .def_property_readonly("kind", [](const TrainedModel& t) { return std::string(to_string(t.kind)); })
      .def_readonly("vocab_size", &TrainedModel::vocab_size)
      .def_readonly("num_topics", &TrainedModel::num_topics)
      .def_readonly("num_slices", &TrainedModel::num_slices)
      .def_readonly("beta", &TrainedModel::beta)
      .def_readonly("best_epoch", &TrainedModel::best_epoch)
      .def_property_readonly("log",
                             [](const TrainedModel& t) {
                               std::vector<std::tuple<std::size_t, double, double>> out;
                               for (const auto& e : t.log) out.emplace_back(e.epoch, e.train_elbo, e.valid_perplexity);
                               return out;
                             })
      .def("save", [](const TrainedModel& t, const std::filesystem::path& p) { save_checkpoint(p, t); })
      .def_static("load", &load_checkpoint, py::arg("path"));

  m.def(
      "train",
      [](const std::string& kind, std::vector<BowDocument> train_docs, std::vector<BowDocument> valid_docs,
         const MatrixXd& rho, const TrainConfig& config) {
        CorpusSplits splits;
        splits.train = std::move(train_docs);
        splits.valid = std::move(valid_docs);
        EmbeddingMatrix emb{rho, std::vector<ColumnSource>(static_cast<std::size_t>(rho.cols()),
                                                           ColumnSource::WordVector)};
        py::gil_scoped_release release;
        return train(parse_model_kind(kind), splits, emb, config);
      },
      py::arg("kind"), py::arg("train_docs"), py::arg("valid_docs"), py::arg("rho"), py::arg("config"));

  // evaluation
  m.def(
      "document_completion_perplexity",
      [](const TrainedModel& model, const std::vector<BowDocument>& docs, std::uint64_t seed) {
        return perplexity_dict(document_completion_perplexity(model, docs, seed));
      },
      py::arg("model"), py::arg("docs"), py::arg("seed") = 0);
  m.def(
      "aggregate_ci",
      [](const std::vector<double>& values) {
        const auto a = aggregate_ci(values);
        return py::dict(py::arg("mean") = a.mean, py::arg("ci95") = a.ci95, py::arg("n") = a.values.size());
      },
      py::arg("values"));
  m.def("hungarian", &hungarian, py::arg("cost"));
  m.def("total_variation", &total_variation, py::arg("p"), py::arg("q"));
  m.def(
      "topic_recovery_score",
      [](const MatrixXd& truth, const MatrixXd& learned) {
        const auto r = topic_recovery_score(truth, learned);
        return std::make_pair(r.mean_tv, r.matching);
      },
      py::arg("true_beta"), py::arg("learned_beta"), "Returns (mean TV, matching[true] = learned).");

  // pipeline
  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("corpus", &RunConfig::corpus)
      .def_property(
          "linker", [](const RunConfig& c) { return std::string(to_string(c.linker)); },
          [](RunConfig& c, const std::string& s) { c.linker = parse_linker_mode(s); })
      .def_readwrite("link_threshold", &RunConfig::link_threshold)
      .def_readwrite("aliases", &RunConfig::aliases)
      .def_readwrite("stopwords", &RunConfig::stopwords)
      .def_readwrite("embeddings", &RunConfig::embeddings)
      .def_readwrite("embed_dim", &RunConfig::embed_dim)
      .def_readwrite("max_fallback_fraction", &RunConfig::max_fallback_fraction)
      .def_readwrite("max_doc_freq", &RunConfig::max_doc_freq)
      .def_readwrite("slice_start", &RunConfig::slice_start)
      .def_readwrite("slice_span", &RunConfig::slice_span)
      .def_readwrite("split_ratios", &RunConfig::split_ratios)
      .def_readwrite("split_seed", &RunConfig::split_seed)
      .def_property(
          "model", [](const RunConfig& c) { return std::string(to_string(c.model)); },
          [](RunConfig& c, const std::string& s) { c.model = parse_model_kind(s); })
      .def_readwrite("train", &RunConfig::train)
      .def_readwrite("eval_seed", &RunConfig::eval_seed)
      .def_readwrite("top_n", &RunConfig::top_n)
      .def_readwrite("out_dir", &RunConfig::out_dir)
      .def("validate", &RunConfig::validate)
      .def("hash", &RunConfig::hash);

  m.def(
      "run_pipeline",
      [](const RunConfig& config) {
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(config);
        }
        return py::dict(py::arg("manifest") = r.manifest, py::arg("test_perplexity") = r.test_perplexity,
                        py::arg("vocab_size") = r.vocab_size, py::arg("num_entities") = r.num_entities);
      },
      py::arg("config"));
}
