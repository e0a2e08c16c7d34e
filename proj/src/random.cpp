#include "bmc/random.hpp"

#include <stdexcept>
#include <vector>

namespace bmc {

Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (stream.size() + 1));
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto s : stream) push(s);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

double draw_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double draw_uniform(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double draw_gamma(double shape, double rate, Rng& rng) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::invalid_argument("gamma parameters must be positive");
  }
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(rng);
}

double draw_inverse_gamma(double shape, double rate, Rng& rng) {
  return 1.0 / draw_gamma(shape, rate, rng);
}

double draw_beta(double a, double b, Rng& rng) {
  const double x = draw_gamma(a, 1.0, rng);
  const double y = draw_gamma(b, 1.0, rng);
  return x / (x + y);
}

Eigen::MatrixXd draw_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

Eigen::VectorXd draw_normal_vector(Eigen::Index n, Rng& rng) {
  return draw_normal_matrix(n, 1, rng);
}

Eigen::VectorXd draw_gaussian_canonical(const Eigen::MatrixXd& precision,
                                        const Eigen::VectorXd& b, Rng& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("precision matrix is not positive definite");
  }
  const Eigen::VectorXd mean = llt.solve(b);
  // P = L L^T, so L^{-T} e has covariance P^{-1}.
  const Eigen::VectorXd e = draw_normal_vector(b.size(), rng);
  return mean + llt.matrixU().solve(e);
}

}  // namespace bmc
