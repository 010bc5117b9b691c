#include <doctest.h>

#include <cmath>

#include "etmkit/error.hpp"
#include "etmkit/etm.hpp"
#include "etmkit/train.hpp"
#include "support.hpp"

using namespace etm;
namespace t = etm::testing;

TEST_SUITE("encode") {
  TEST_CASE("zero network gives zero outputs of shape K") {
    const auto e = Encoder::zeros(11, 4, 3);
    const auto out = encode(e, Eigen::VectorXd::Constant(11, 1.0 / 11));
    CHECK(out.mu.size() == 3);
    CHECK(out.logvar.size() == 3);
    CHECK(out.mu.isZero(0));
    CHECK(out.logvar.isZero(0));
  }
  TEST_CASE("deterministic and equal to a loop reference") {
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
      const auto e = Encoder::random(9, 5, 3, rng);
      const Eigen::VectorXd x = rng.dirichlet(9, 1.0);
      const auto a = encode(e, x), b = encode(e, x);
      CHECK(a.mu == b.mu);
      const auto ref = t::ref_encode(e, std::vector<double>(x.data(), x.data() + 9));
      for (int k = 0; k < 3; ++k) {
        CHECK(a.mu[k] == doctest::Approx(ref.mu[k]).epsilon(1e-12));
        CHECK(a.logvar[k] == doctest::Approx(ref.logvar[k]).epsilon(1e-12));
      }
    }
  }
  TEST_CASE("non-finite output is a numerical error") {
    auto e = Encoder::zeros(2, 2, 2);
    e.b_mu[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(encode(e, Eigen::Vector2d(0.5, 0.5)), NumericalError);
  }
}

TEST_SUITE("reparameterize") {
  TEST_CASE("variance-floor limit and zero logits") {
    const Eigen::Vector3d mu(0.2, -1, 0.5);
    const auto r = reparameterize(mu, Eigen::Vector3d::Constant(-1e3), Eigen::Vector3d(1, -2, 3));
    for (int k = 0; k < 3; ++k) CHECK(r.theta[k] == doctest::Approx(softmax(mu)[k]).epsilon(1e-2));
    const auto z = reparameterize(Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero());
    for (int k = 0; k < 3; ++k) CHECK(z.theta[k] == doctest::Approx(1.0 / 3));
  }
  TEST_CASE("Monte Carlo mean of delta within 3 standard errors") {
    Rng rng(2);
    const Eigen::Vector2d mu(0.7, -1.2), logvar(0.4, -0.8);
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += reparameterize(mu, logvar, rng).delta;
    for (int k = 0; k < 2; ++k) {
      const double se = std::exp(logvar[k] / 2) / std::sqrt(static_cast<double>(n));
      CHECK(std::abs(sum[k] / n - mu[k]) < 3 * se);
    }
  }
}

TEST_SUITE("elbo_etm") {
  TEST_CASE("value equals the loop reference") {
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
      const auto inst = t::random_etm_instance(rng, 10, 3, 4, 6, 5);
      const auto r = elbo_etm(inst.docs, inst.params, inst.rho, inst.noise, false);
      CHECK(r.value.elbo == doctest::Approx(t::ref_elbo_etm(inst.docs, inst.params, inst.rho, inst.noise)).epsilon(1e-12));
      CHECK(r.value.elbo == doctest::Approx(r.value.reconstruction - r.value.local_kl).epsilon(1e-12));
    }
  }
  TEST_CASE("prior-matching encoder has zero KL") {
    Rng rng(4);
    auto inst = t::random_etm_instance(rng, 8, 3, 4, 5, 4);
    inst.params.encoder = Encoder::zeros(8, 5, 3);
    CHECK(elbo_etm(inst.docs, inst.params, inst.rho, inst.noise).value.local_kl == doctest::Approx(0.0));
  }
  TEST_CASE("K = 1 gives the multinomial log-likelihood") {
    Rng rng(5);
    auto inst = t::random_etm_instance(rng, 9, 1, 3, 4, 6);
    inst.params.encoder = Encoder::zeros(9, 4, 1);
    const auto beta = compute_beta(inst.rho, inst.params.alpha);
    double ll = 0;
    for (const auto& d : inst.docs)
      for (const auto& [id, c] : d.counts) ll += c * std::log(beta(0, id));
    CHECK(elbo_etm(inst.docs, inst.params, inst.rho, inst.noise).value.elbo == doctest::Approx(ll).epsilon(1e-12));
  }
  TEST_CASE("analytic gradient matches central differences") {
    Rng rng(6);
    for (int i = 0; i < 5; ++i) {
      const auto inst = t::random_etm_instance(rng, 9, 3, 4, 5, 4);
      const auto r = elbo_etm(inst.docs, inst.params, inst.rho, inst.noise);
      EtmParams p = inst.params;
      const auto f = [&](const Eigen::VectorXd& x) {
        unflatten(p, x);
        return elbo_etm(inst.docs, p, inst.rho, inst.noise, false).value.elbo;
      };
      CHECK(t::max_gradient_error(f, flatten(inst.params), flatten(r.grad)) <= 1e-4);
    }
  }
  TEST_CASE("a document's noise does not depend on its batch") {
    Rng rng(7);
    const auto docs = t::random_docs(rng, 6, 5, 6);
    const auto all = draw_etm_noise(docs, 3, 42, 7);
    const std::span<const BowDocument> tail(docs.data() + 3, 3);
    const auto part = draw_etm_noise(tail, 3, 42, 7);
    CHECK(part.theta_eps[0] == all.theta_eps[3]);
    CHECK(draw_etm_noise(docs, 3, 42, 8).theta_eps[0] != all.theta_eps[0]);
  }
  TEST_CASE("seeded overload is deterministic") {
    Rng rng(8);
    const auto inst = t::random_etm_instance(rng, 6, 2, 3, 4, 3);
    CHECK(elbo_etm(inst.docs, inst.params, inst.rho, 9, 1).value.elbo ==
          elbo_etm(inst.docs, inst.params, inst.rho, 9, 1).value.elbo);
  }
}
