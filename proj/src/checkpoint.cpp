#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "etmkit/error.hpp"
#include "etmkit/hash.hpp"
#include "etmkit/train.hpp"

namespace etm {
namespace {

using json = nlohmann::json;

constexpr std::string_view kFormat = "etmkit-checkpoint";
constexpr int kVersion = 1;

json matrix_json(const MatrixXd& m) {
  return json{{"rows", m.rows()},
              {"cols", m.cols()},
              {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

MatrixXd matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw DataError("checkpoint matrix data length does not match its shape");
  return Eigen::Map<const MatrixXd>(data.data(), rows, cols);
}

VectorXd vector_from(const json& j) {
  MatrixXd m = matrix_from(j);
  if (m.cols() != 1) throw DataError("checkpoint vector must have one column");
  return m.col(0);
}

json encoder_json(const Encoder& e) {
  return json{{"w_hidden", matrix_json(e.w_hidden)}, {"b_hidden", matrix_json(e.b_hidden)},
              {"w_mu", matrix_json(e.w_mu)},         {"b_mu", matrix_json(e.b_mu)},
              {"w_logvar", matrix_json(e.w_logvar)}, {"b_logvar", matrix_json(e.b_logvar)}};
}

Encoder encoder_from(const json& j) {
  Encoder e;
  e.w_hidden = matrix_from(j.at("w_hidden"));
  e.b_hidden = vector_from(j.at("b_hidden"));
  e.w_mu = matrix_from(j.at("w_mu"));
  e.b_mu = vector_from(j.at("b_mu"));
  e.w_logvar = matrix_from(j.at("w_logvar"));
  e.b_logvar = vector_from(j.at("b_logvar"));
  return e;
}

json matrices_json(const std::vector<MatrixXd>& ms) {
  json arr = json::array();
  for (const auto& m : ms) arr.push_back(matrix_json(m));
  return arr;
}

std::vector<MatrixXd> matrices_from(const json& j) {
  std::vector<MatrixXd> out;
  for (const auto& m : j) out.push_back(matrix_from(m));
  return out;
}

}  // namespace

std::string checkpoint_to_string(const TrainedModel& model) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["kind"] = to_string(model.kind);
  j["V"] = model.vocab_size;
  j["K"] = model.num_topics;
  j["L"] = model.embed_dim;
  j["T"] = model.num_slices;
  j["vocab_hash"] = to_hex(model.vocab_hash);
  j["seed"] = model.seed;
  j["best_epoch"] = model.best_epoch;
  if (model.kind == ModelKind::Etm) {
    const auto& p = std::get<EtmParams>(model.params);
    j["params"] = {{"alpha", matrix_json(p.alpha)}, {"encoder", encoder_json(p.encoder)}};
  } else {
    const auto& p = std::get<DetmParams>(model.params);
    j["hyper"] = {{"sigma2", p.hyper.sigma2}, {"delta2", p.hyper.delta2}, {"gamma2", p.hyper.gamma2}};
    j["params"] = {{"alpha_mean", matrices_json(p.alpha_mean)},
                   {"alpha_logvar", matrices_json(p.alpha_logvar)},
                   {"eta_mean", matrix_json(p.eta_mean)},
                   {"eta_logvar", matrix_json(p.eta_logvar)},
                   {"encoder", encoder_json(p.encoder)}};
  }
  j["beta"] = matrices_json(model.beta);
  json log = json::array();
  for (const auto& e : model.log)
    log.push_back({{"epoch", e.epoch}, {"train_elbo", e.train_elbo},
                   {"valid_perplexity", e.valid_perplexity}});
  j["log"] = std::move(log);
  return j.dump();
}

TrainedModel checkpoint_from_string(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormat) throw DataError("not an etmkit checkpoint");
    if (j.at("version").get<int>() != kVersion) throw DataError("unsupported checkpoint version");
    TrainedModel m;
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.vocab_size = j.at("V").get<std::size_t>();
    m.num_topics = j.at("K").get<std::size_t>();
    m.embed_dim = j.at("L").get<std::size_t>();
    m.num_slices = j.at("T").get<std::size_t>();
    m.vocab_hash = std::stoull(j.at("vocab_hash").get<std::string>(), nullptr, 16);
    m.seed = j.at("seed").get<std::uint64_t>();
    m.best_epoch = j.at("best_epoch").get<std::size_t>();
    const json& p = j.at("params");
    if (m.kind == ModelKind::Etm) {
      EtmParams params;
      params.alpha = matrix_from(p.at("alpha"));
      params.encoder = encoder_from(p.at("encoder"));
      m.params = std::move(params);
    } else {
      DetmParams params;
      const json& h = j.at("hyper");
      params.hyper = {h.at("sigma2").get<double>(), h.at("delta2").get<double>(),
                      h.at("gamma2").get<double>()};
      params.alpha_mean = matrices_from(p.at("alpha_mean"));
      params.alpha_logvar = matrices_from(p.at("alpha_logvar"));
      params.eta_mean = matrix_from(p.at("eta_mean"));
      params.eta_logvar = matrix_from(p.at("eta_logvar"));
      params.encoder = encoder_from(p.at("encoder"));
      m.params = std::move(params);
    }
    m.beta = matrices_from(j.at("beta"));
    for (const auto& e : j.at("log"))
      m.log.push_back(EpochLog{e.at("epoch").get<std::size_t>(), e.at("train_elbo").get<double>(),
                               e.at("valid_perplexity").get<double>()});
    if (m.beta.size() != m.num_slices) throw DataError("checkpoint beta count does not match T");
    for (const auto& b : m.beta)
      if (static_cast<std::size_t>(b.rows()) != m.num_topics ||
          static_cast<std::size_t>(b.cols()) != m.vocab_size)
        throw DataError("checkpoint beta shape does not match (K, V)");
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << checkpoint_to_string(model) << '\n';
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace etm
