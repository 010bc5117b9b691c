#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace etm {

// Random source with platform-independent output. The engine is
// std::mt19937_64 (fully specified by the standard); the distributions are
// implemented here because the std:: ones are implementation-defined and
// seeded runs must reproduce bit-for-bit everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  Eigen::VectorXd normal_vector(Eigen::Index n);
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

  // Gamma(shape, 1), Marsaglia-Tsang.
  double gamma(double shape);

  // Symmetric Dirichlet(concentration * 1_k).
  Eigen::VectorXd dirichlet(Eigen::Index k, double concentration);

  // Index drawn proportionally to non-negative weights.
  std::size_t categorical(std::span<const double> weights);
  std::size_t categorical(const Eigen::VectorXd& weights) {
    return categorical(std::span<const double>(weights.data(), static_cast<std::size_t>(weights.size())));
  }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace etm
