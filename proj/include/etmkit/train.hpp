#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "etmkit/corpus.hpp"
#include "etmkit/detm.hpp"
#include "etmkit/embeddings.hpp"
#include "etmkit/etm.hpp"

namespace etm {

enum class ModelKind { Etm, Detm };

ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(ModelKind kind);

struct TrainConfig {
  std::size_t num_topics = 10;
  double learning_rate = 2e-3;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 400;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  double clip_norm = 2.0;
  std::size_t hidden_dim = 256;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  DetmHyper hyper;
  // Seed of the validation completion split.
  std::uint64_t eval_seed = 0;

  // Throws UsageError unless every size/rate is positive.
  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;            // 1-based
  double train_elbo = 0.0;          // mean per-document ELBO at the end of the epoch
  double valid_perplexity = 0.0;
};

struct TrainedModel {
  ModelKind kind = ModelKind::Etm;
  std::size_t vocab_size = 0;
  std::size_t num_topics = 0;
  std::size_t embed_dim = 0;
  std::size_t num_slices = 1;
  std::variant<EtmParams, DetmParams> params;
  std::vector<MatrixXd> beta;  // one K x V matrix per slice (one for ETM)
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  std::uint64_t vocab_hash = 0;
  std::uint64_t seed = 0;

  const Encoder& encoder() const;
  bool is_dynamic() const { return kind == ModelKind::Detm; }

  static TrainedModel from_etm(EtmParams params, const MatrixXd& rho);
  static TrainedModel from_detm(DetmParams params, const MatrixXd& rho);
};

// Adam on a flat parameter vector, ascending the objective.
class Adam {
 public:
  Adam(Eigen::Index size, double lr, double beta1, double beta2, double eps);
  void step(VectorXd& params, const VectorXd& grad);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  VectorXd m_, v_;
  std::size_t t_ = 0;
};

// Flatten/unflatten in visit_blocks order.
template <class Params>
VectorXd flatten(const Params& p) {
  Eigen::Index n = 0;
  visit_blocks(p, [&](const auto& b) { n += b.size(); });
  VectorXd out(n);
  Eigen::Index off = 0;
  visit_blocks(p, [&](const auto& b) {
    out.segment(off, b.size()) = Eigen::Map<const VectorXd>(b.data(), b.size());
    off += b.size();
  });
  return out;
}

template <class Params>
void unflatten(Params& p, const VectorXd& flat) {
  Eigen::Index off = 0;
  visit_blocks(p, [&](auto& b) {
    Eigen::Map<VectorXd>(b.data(), b.size()) = flat.segment(off, b.size());
    off += b.size();
  });
}

// Rescales grad in place so its L2 norm is at most max_norm; returns the
// original norm.
double clip_gradient(VectorXd& grad, double max_norm);

// Called after each epoch; return false to stop early.
using EpochCallback = std::function<bool(const EpochLog&)>;

// Minibatch ELBO ascent with Adam and gradient clipping. After each epoch the
// validation completion perplexity decides early stopping; the parameters of
// the best validation epoch are returned. Training stops once `patience`
// consecutive epochs have failed to improve and one more fails too, i.e.
// after patience + 1 non-improving epochs.
TrainedModel train(ModelKind kind, const CorpusSplits& splits, const EmbeddingMatrix& rho,
                   const TrainConfig& config, std::uint64_t vocab_hash = 0,
                   const EpochCallback& on_epoch = {});

// Checkpoint: one JSON document (layout in the README). Doubles round-trip
// exactly.
void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_to_string(const TrainedModel& model);
TrainedModel checkpoint_from_string(std::string_view text);

}  // namespace etm
