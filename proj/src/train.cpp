#include "etmkit/train.hpp"

#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "etmkit/error.hpp"
#include "etmkit/evaluation.hpp"
#include "etmkit/hash.hpp"

namespace etm {

ModelKind parse_model_kind(std::string_view name) {
  if (name == "etm") return ModelKind::Etm;
  if (name == "detm") return ModelKind::Detm;
  throw UsageError("unknown model '" + std::string(name) + "' (expected etm or detm)");
}

std::string_view to_string(ModelKind kind) { return kind == ModelKind::Etm ? "etm" : "detm"; }

void TrainConfig::validate() const {
  if (num_topics == 0) throw UsageError("number of topics must be positive");
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (batch_size == 0) throw UsageError("batch size must be positive");
  if (max_epochs == 0) throw UsageError("max epochs must be positive");
  if (!(clip_norm > 0.0)) throw UsageError("clip norm must be positive");
  if (hidden_dim == 0) throw UsageError("hidden width must be positive");
  if (!(hyper.sigma2 > 0.0 && hyper.delta2 > 0.0 && hyper.gamma2 > 0.0))
    throw UsageError("prior variances must be positive");
}

const Encoder& TrainedModel::encoder() const {
  return std::visit([](const auto& p) -> const Encoder& { return p.encoder; }, params);
}

TrainedModel TrainedModel::from_etm(EtmParams params, const MatrixXd& rho) {
  TrainedModel m;
  m.kind = ModelKind::Etm;
  m.vocab_size = static_cast<std::size_t>(rho.cols());
  m.num_topics = static_cast<std::size_t>(params.alpha.rows());
  m.embed_dim = static_cast<std::size_t>(params.alpha.cols());
  m.num_slices = 1;
  m.beta = {compute_beta(rho, params.alpha)};
  m.params = std::move(params);
  return m;
}

TrainedModel TrainedModel::from_detm(DetmParams params, const MatrixXd& rho) {
  TrainedModel m;
  m.kind = ModelKind::Detm;
  m.vocab_size = static_cast<std::size_t>(rho.cols());
  m.num_topics = static_cast<std::size_t>(params.num_topics());
  m.embed_dim = static_cast<std::size_t>(params.embed_dim());
  m.num_slices = static_cast<std::size_t>(params.num_slices());
  m.beta = detm_mean_beta(params, rho);
  m.params = std::move(params);
  return m;
}

Adam::Adam(Eigen::Index size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(VectorXd::Zero(size)), v_(VectorXd::Zero(size)) {}

void Adam::step(VectorXd& params, const VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() += lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

double clip_gradient(VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm) grad *= max_norm / norm;
  return norm;
}

namespace {

// Model-specific hooks for the shared training loop.
struct EtmOps {
  using Params = EtmParams;
  static Params init(const TrainConfig& cfg, Eigen::Index V, Eigen::Index L, Eigen::Index, Rng& rng) {
    return EtmParams::init(V, L, static_cast<Eigen::Index>(cfg.num_topics),
                           static_cast<Eigen::Index>(cfg.hidden_dim), rng);
  }
  static std::pair<double, Params> step(std::span<const BowDocument> batch, const Params& p,
                                        const MatrixXd& rho, std::uint64_t seed, std::uint64_t step,
                                        double) {
    auto r = elbo_etm(batch, p, rho, draw_etm_noise(batch, p.alpha.rows(), seed, step));
    return {r.value.elbo, std::move(r.grad)};
  }
  static double value(std::span<const BowDocument> docs, const Params& p, const MatrixXd& rho,
                      std::uint64_t seed, double) {
    return elbo_etm(docs, p, rho, draw_etm_noise(docs, p.alpha.rows(), seed, 0), false).value.elbo;
  }
  static TrainedModel snapshot(const Params& p, const MatrixXd& rho) {
    return TrainedModel::from_etm(p, rho);
  }
};

struct DetmOps {
  using Params = DetmParams;
  static Params init(const TrainConfig& cfg, Eigen::Index V, Eigen::Index L, Eigen::Index T, Rng& rng) {
    return DetmParams::init(V, L, static_cast<Eigen::Index>(cfg.num_topics), T,
                            static_cast<Eigen::Index>(cfg.hidden_dim), cfg.hyper, rng);
  }
  static std::pair<double, Params> step(std::span<const BowDocument> batch, const Params& p,
                                        const MatrixXd& rho, std::uint64_t seed, std::uint64_t step,
                                        double global_weight) {
    auto r = elbo_detm(batch, p, rho, draw_detm_noise(batch, p, seed, step), global_weight);
    return {r.value.elbo, std::move(r.grad)};
  }
  static double value(std::span<const BowDocument> docs, const Params& p, const MatrixXd& rho,
                      std::uint64_t seed, double global_weight) {
    return elbo_detm(docs, p, rho, draw_detm_noise(docs, p, seed, 0), global_weight, false).value.elbo;
  }
  static TrainedModel snapshot(const Params& p, const MatrixXd& rho) {
    return TrainedModel::from_detm(p, rho);
  }
};

void check_docs(std::span<const BowDocument> docs, std::size_t V, bool need_slice,
                std::size_t& max_slice) {
  for (const auto& d : docs) {
    if (d.n_tokens == 0) throw DataError("document " + d.doc_id + " is empty");
    for (const auto& [id, c] : d.counts)
      if (id >= V) throw DataError("document " + d.doc_id + " uses a term id outside the vocabulary");
    if (need_slice) {
      if (!d.slice) throw DataError("document " + d.doc_id + " has no time slice (required by D-ETM)");
      max_slice = std::max(max_slice, *d.slice);
    }
  }
}

template <class Ops>
TrainedModel train_loop(const CorpusSplits& splits, const MatrixXd& rho, const TrainConfig& cfg,
                        Eigen::Index num_slices, const EpochCallback& on_epoch) {
  const Eigen::Index V = rho.cols();
  const Eigen::Index L = rho.rows();
  Rng init_rng(hash_combine(cfg.seed, fnv1a64("init")));
  typename Ops::Params params = Ops::init(cfg, V, L, num_slices, init_rng);
  VectorXd flat = flatten(params);
  Adam adam(flat.size(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

  std::vector<BowDocument> docs = splits.train;
  const double n_train = static_cast<double>(docs.size());
  const std::uint64_t noise_seed = hash_combine(cfg.seed, fnv1a64("noise"));
  const std::uint64_t value_seed = hash_combine(cfg.seed, fnv1a64("value"));

  TrainedModel best;
  double best_ppl = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;
  std::vector<EpochLog> log;
  std::uint64_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(hash_combine(cfg.seed, epoch));
    shuffle_rng.shuffle(docs);
    std::size_t batches = 0;
    std::size_t failed = 0;
    for (std::size_t start = 0; start < docs.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, docs.size() - start);
      const std::span<const BowDocument> batch(docs.data() + start, len);
      ++step;
      ++batches;
      const double bsize = static_cast<double>(len);
      try {
        auto [elbo, grad] = Ops::step(batch, params, rho, noise_seed, step, bsize / n_train);
        VectorXd g = flatten(grad) / bsize;
        if (!g.allFinite()) throw NumericalError("non-finite gradient");
        clip_gradient(g, cfg.clip_norm);
        adam.step(flat, g);
        unflatten(params, flat);
      } catch (const NumericalError& e) {
        ++failed;
        spdlog::warn("epoch {} step {}: {}; update skipped", epoch, step, e.what());
      }
    }
    if (failed == batches)
      throw NumericalError("ELBO was non-finite for every batch of epoch " + std::to_string(epoch) +
                           "; try a smaller learning rate or clip norm");

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_elbo = Ops::value(splits.train, params, rho, value_seed, 1.0) / n_train;
    TrainedModel snap = Ops::snapshot(params, rho);
    entry.valid_perplexity =
        document_completion_perplexity(snap, splits.valid, cfg.eval_seed).perplexity;
    log.push_back(entry);
    spdlog::debug("epoch {}: train elbo/doc {:.6g}, valid ppl {:.6g}", epoch, entry.train_elbo,
                  entry.valid_perplexity);

    if (entry.valid_perplexity < best_ppl) {
      best_ppl = entry.valid_perplexity;
      best = std::move(snap);
      best.best_epoch = epoch;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
    }
    if (on_epoch && !on_epoch(entry)) break;
    if (bad_epochs > cfg.patience) break;
  }
  best.log = std::move(log);
  best.seed = cfg.seed;
  return best;
}

}  // namespace

TrainedModel train(ModelKind kind, const CorpusSplits& splits, const EmbeddingMatrix& rho,
                   const TrainConfig& config, std::uint64_t vocab_hash,
                   const EpochCallback& on_epoch) {
  config.validate();
  if (splits.train.empty()) throw DataError("training split is empty");
  if (splits.valid.empty()) throw DataError("validation split is empty (needed for early stopping)");
  const auto V = static_cast<std::size_t>(rho.rho.cols());
  if (V == 0) throw DataError("embedding matrix has no columns");
  const bool dynamic = kind == ModelKind::Detm;
  std::size_t max_slice = 0;
  check_docs(splits.train, V, dynamic, max_slice);
  check_docs(splits.valid, V, dynamic, max_slice);
  check_docs(splits.test, V, dynamic, max_slice);

  TrainedModel model =
      dynamic ? train_loop<DetmOps>(splits, rho.rho, config,
                                    static_cast<Eigen::Index>(max_slice + 1), on_epoch)
              : train_loop<EtmOps>(splits, rho.rho, config, 1, on_epoch);
  model.vocab_hash = vocab_hash;
  return model;
}

}  // namespace etm
