#pragma once

// Helpers shared by the unit and acceptance suites: temp directories,
// random-instance generators, and independent reference implementations
// written with plain loops (no shared code with the library's math).

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "etmkit/corpus.hpp"
#include "etmkit/detm.hpp"
#include "etmkit/etm.hpp"
#include "etmkit/random.hpp"
#include "etmkit/train.hpp"

namespace etm::testing {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("etmkit-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& text) const {
    std::ofstream out(path_ / name, std::ios::binary);
    out << text;
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Random sparse documents over V terms; ids "d<i>", slices in [0, T).
inline std::vector<BowDocument> random_docs(Rng& rng, std::size_t n, std::size_t V, std::size_t max_len,
                                            std::size_t T = 0) {
  std::vector<BowDocument> docs;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint32_t> dense(V, 0);
    const std::size_t len = 2 + rng.below(max_len - 1);
    for (std::size_t j = 0; j < len; ++j) ++dense[rng.below(V)];
    BowDocument d;
    d.doc_id = "d" + std::to_string(i);
    for (std::size_t v = 0; v < V; ++v)
      if (dense[v]) d.counts.emplace_back(static_cast<TermId>(v), dense[v]);
    d.n_tokens = len;
    if (T) d.slice = rng.below(T);
    docs.push_back(std::move(d));
  }
  return docs;
}

// ---- reference implementations -------------------------------------------

inline std::vector<double> ref_softmax(const std::vector<double>& x) {
  double m = x[0];
  for (double v : x) m = std::max(m, v);
  std::vector<double> out(x.size());
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (out[i] = std::exp(x[i] - m));
  for (double& v : out) v /= s;
  return out;
}

// beta[k][v] for K x L alpha and L x V rho.
inline std::vector<std::vector<double>> ref_beta(const MatrixXd& rho, const MatrixXd& alpha) {
  std::vector<std::vector<double>> beta;
  for (Eigen::Index k = 0; k < alpha.rows(); ++k) {
    std::vector<double> logits(static_cast<std::size_t>(rho.cols()), 0.0);
    for (Eigen::Index v = 0; v < rho.cols(); ++v)
      for (Eigen::Index l = 0; l < rho.rows(); ++l) logits[v] += alpha(k, l) * rho(l, v);
    beta.push_back(ref_softmax(logits));
  }
  return beta;
}

inline double ref_kl(const std::vector<double>& mq, const std::vector<double>& vq,
                     const std::vector<double>& mp, const std::vector<double>& vp) {
  double kl = 0;
  for (std::size_t i = 0; i < mq.size(); ++i)
    kl += 0.5 * (vq[i] / vp[i] + (mp[i] - mq[i]) * (mp[i] - mq[i]) / vp[i] - 1.0 + std::log(vp[i] / vq[i]));
  return kl;
}

struct RefEncoded {
  std::vector<double> mu, logvar;
};

inline RefEncoded ref_encode(const Encoder& e, const std::vector<double>& x) {
  const auto H = static_cast<std::size_t>(e.w_hidden.rows());
  const auto K = static_cast<std::size_t>(e.w_mu.rows());
  std::vector<double> h(H);
  for (std::size_t i = 0; i < H; ++i) {
    double z = e.b_hidden[i];
    for (std::size_t j = 0; j < x.size(); ++j) z += e.w_hidden(i, j) * x[j];
    h[i] = std::log1p(std::exp(z));
  }
  RefEncoded out{std::vector<double>(K), std::vector<double>(K)};
  for (std::size_t k = 0; k < K; ++k) {
    double m = e.b_mu[k], lv = e.b_logvar[k];
    for (std::size_t i = 0; i < H; ++i) {
      m += e.w_mu(k, i) * h[i];
      lv += e.w_logvar(k, i) * h[i];
    }
    out.mu[k] = m;
    out.logvar[k] = lv;
  }
  return out;
}

inline std::vector<double> ref_input(const BowDocument& d, std::size_t V) {
  std::vector<double> x(V, 0.0);
  for (const auto& [id, c] : d.counts) x[id] = static_cast<double>(c) / static_cast<double>(d.n_tokens);
  return x;
}

// One document's reconstruction and KL under given theta prior.
inline double ref_doc_elbo(const BowDocument& d, const RefEncoded& enc, const VectorXd& eps,
                           const std::vector<std::vector<double>>& beta,
                           const std::vector<double>& prior_mean, double prior_var) {
  const std::size_t K = enc.mu.size();
  std::vector<double> delta(K), var(K);
  for (std::size_t k = 0; k < K; ++k) {
    var[k] = std::max(std::exp(enc.logvar[k]), 1e-6);
    delta[k] = enc.mu[k] + std::sqrt(var[k]) * eps[static_cast<Eigen::Index>(k)];
  }
  const auto theta = ref_softmax(delta);
  double rec = 0;
  for (const auto& [id, c] : d.counts) {
    double p = 0;
    for (std::size_t k = 0; k < K; ++k) p += theta[k] * beta[k][id];
    rec += c * std::log(std::max(p, 1e-12));
  }
  return rec - ref_kl(enc.mu, var, prior_mean, std::vector<double>(K, prior_var));
}

inline double ref_elbo_etm(std::span<const BowDocument> batch, const EtmParams& p, const MatrixXd& rho,
                           const EtmNoise& noise) {
  const auto beta = ref_beta(rho, p.alpha);
  const auto K = static_cast<std::size_t>(p.alpha.rows());
  double total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto enc = ref_encode(p.encoder, ref_input(batch[i], static_cast<std::size_t>(rho.cols())));
    total += ref_doc_elbo(batch[i], enc, noise.theta_eps[i], beta, std::vector<double>(K, 0.0), 1.0);
  }
  return total;
}

// Chain KL with the expectation over the previous step: closed-form KL
// against the previous mean plus trace(var_prev) / (2 prior_var).
inline double ref_chain_kl(const std::vector<std::vector<double>>& mean,
                           const std::vector<std::vector<double>>& logvar, double prior_var) {
  double kl = 0;
  for (std::size_t t = 0; t < mean.size(); ++t) {
    std::vector<double> var(mean[t].size());
    for (std::size_t i = 0; i < var.size(); ++i) var[i] = std::max(std::exp(logvar[t][i]), 1e-6);
    if (t == 0) {
      kl += ref_kl(mean[t], var, std::vector<double>(var.size(), 0.0), std::vector<double>(var.size(), 1.0));
    } else {
      kl += ref_kl(mean[t], var, mean[t - 1], std::vector<double>(var.size(), prior_var));
      for (double lv : logvar[t - 1]) kl += std::max(std::exp(lv), 1e-6) / (2 * prior_var);
    }
  }
  return kl;
}

inline std::vector<double> flat_row_major(const MatrixXd& m) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

inline double ref_elbo_detm(std::span<const BowDocument> batch, const DetmParams& p, const MatrixXd& rho,
                            const DetmNoise& noise, double global_weight) {
  const auto T = static_cast<std::size_t>(p.num_slices());
  const auto K = static_cast<std::size_t>(p.num_topics());
  const auto V = static_cast<std::size_t>(rho.cols());
  std::vector<std::vector<std::vector<double>>> betas;
  for (std::size_t t = 0; t < T; ++t) {
    MatrixXd a = p.alpha_mean[t];
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j)
        a(i, j) += std::sqrt(std::max(std::exp(p.alpha_logvar[t](i, j)), 1e-6)) * noise.alpha_eps[t](i, j);
    betas.push_back(ref_beta(rho, a));
  }
  double total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t t = *batch[i].slice;
    auto x = ref_input(batch[i], V);
    std::vector<double> eta(K);
    for (std::size_t k = 0; k < K; ++k) eta[k] = p.eta_mean(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k));
    x.insert(x.end(), eta.begin(), eta.end());
    total += ref_doc_elbo(batch[i], ref_encode(p.encoder, x), noise.theta_eps[i], betas[t], eta, p.hyper.gamma2);
  }
  std::vector<std::vector<double>> am, al, em, el;
  for (std::size_t t = 0; t < T; ++t) {
    am.push_back(flat_row_major(p.alpha_mean[t]));
    al.push_back(flat_row_major(p.alpha_logvar[t]));
    em.push_back(flat_row_major(p.eta_mean.row(static_cast<Eigen::Index>(t))));
    el.push_back(flat_row_major(p.eta_logvar.row(static_cast<Eigen::Index>(t))));
  }
  return total - global_weight * (ref_chain_kl(am, al, p.hyper.sigma2) + ref_chain_kl(em, el, p.hyper.delta2));
}

// ---- finite differences ----------------------------------------------------

// Central differences of f at x (step h) compared with the analytic gradient:
// returns max_i |a_i - n_i| / max(|a_i|, |n_i|, floor).
inline double max_gradient_error(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                                 const VectorXd& analytic, double h = 1e-4, double floor = 1e-4) {
  double worst = 0.0;
  VectorXd y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y[i] = x[i] + h;
    const double up = f(y);
    y[i] = x[i] - h;
    const double down = f(y);
    y[i] = x[i];
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

// A random ETM instance with moderately scaled parameters.
struct EtmInstance {
  MatrixXd rho;
  EtmParams params;
  std::vector<BowDocument> docs;
  EtmNoise noise;
};

inline EtmInstance random_etm_instance(Rng& rng, Eigen::Index V, Eigen::Index K, Eigen::Index L,
                                       Eigen::Index H, std::size_t n_docs) {
  EtmInstance inst;
  inst.rho = rng.normal_matrix(L, V);
  inst.params = EtmParams::init(V, L, K, H, rng);
  inst.params.alpha = 0.5 * rng.normal_matrix(K, L);
  auto& e = inst.params.encoder;
  e.b_hidden = 0.3 * rng.normal_vector(H);
  e.b_mu = 0.3 * rng.normal_vector(K);
  e.b_logvar = 0.3 * rng.normal_vector(K);
  inst.docs = random_docs(rng, n_docs, static_cast<std::size_t>(V), 12);
  inst.noise = draw_etm_noise(inst.docs, K, rng.next_u64(), 0);
  return inst;
}

struct DetmInstance {
  MatrixXd rho;
  DetmParams params;
  std::vector<BowDocument> docs;
  DetmNoise noise;
};

inline DetmInstance random_detm_instance(Rng& rng, Eigen::Index V, Eigen::Index K, Eigen::Index L,
                                         Eigen::Index T, Eigen::Index H, std::size_t n_docs) {
  DetmInstance inst;
  inst.rho = rng.normal_matrix(L, V);
  DetmHyper hyper{0.05 + rng.uniform(), 0.05 + rng.uniform(), 0.5 + rng.uniform()};
  inst.params = DetmParams::init(V, L, K, T, H, hyper, rng);
  for (Eigen::Index t = 0; t < T; ++t) {
    inst.params.alpha_mean[static_cast<std::size_t>(t)] = 0.5 * rng.normal_matrix(K, L);
    inst.params.alpha_logvar[static_cast<std::size_t>(t)] = -2.0 + 0.5 * rng.normal_matrix(K, L).array();
  }
  inst.params.eta_mean = 0.5 * rng.normal_matrix(T, K);
  inst.params.eta_logvar = -1.0 + 0.5 * rng.normal_matrix(T, K).array();
  auto& e = inst.params.encoder;
  e.b_hidden = 0.3 * rng.normal_vector(H);
  e.b_mu = 0.3 * rng.normal_vector(K);
  e.b_logvar = 0.3 * rng.normal_vector(K);
  inst.docs = random_docs(rng, n_docs, static_cast<std::size_t>(V), 12, static_cast<std::size_t>(T));
  inst.noise = draw_detm_noise(inst.docs, inst.params, rng.next_u64(), 0);
  return inst;
}

}  // namespace etm::testing
