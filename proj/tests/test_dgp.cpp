#include <cmath>

#include "bmc/dgp.hpp"
#include "doctest.h"

using namespace bmc;

namespace {

DgpSpec make(DgpKind kind, Index J, Index pre, Index post, double atet = 0.0, std::uint64_t seed = 1) {
  DgpSpec s;
  s.kind = kind;
  s.units = J;
  s.pre = pre;
  s.post = post;
  s.atet = atet;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("treatment structure: last unit, last periods, additive effect") {
  for (DgpKind kind : {DgpKind::Independent, DgpKind::Dependent, DgpKind::Weighted}) {
    const SyntheticPanel sp = generate(make(kind, 10, 10, 20, 5.0, 7));
    CHECK(sp.panel.units() == 10);
    CHECK(sp.panel.periods() == 30);
    CHECK(sp.panel.mask.sum() == 20);
    CHECK(sp.panel.mask.row(9).tail(20).minCoeff() == 1);
    CHECK(sp.panel.n_covariates() == 0);
    const Eigen::MatrixXd diff = sp.panel.outcomes - sp.truth;
    for (Index j = 0; j < 10; ++j)
      for (Index t = 0; t < 30; ++t) CHECK(std::abs(diff(j, t) - (sp.panel.mask(j, t) ? 5.0 : 0.0)) < 1e-12);
  }
  const SyntheticPanel zero = generate(make(DgpKind::Independent, 5, 10, 20, 0.0));
  CHECK(zero.panel.outcomes == zero.truth);
}

TEST_CASE("determinism under seed") {
  for (DgpKind kind : {DgpKind::Independent, DgpKind::Dependent, DgpKind::Weighted}) {
    const auto a = generate(make(kind, 10, 10, 20, 1.0, 3));
    const auto b = generate(make(kind, 10, 10, 20, 1.0, 3));
    const auto c = generate(make(kind, 10, 10, 20, 1.0, 4));
    CHECK(a.panel.outcomes == b.panel.outcomes);
    CHECK(a.truth == b.truth);
    CHECK(a.panel.outcomes != c.panel.outcomes);
  }
}

TEST_CASE("independent: conditional variance of each unit") {
  const SyntheticPanel sp = generate(make(DgpKind::Independent, 4, 10000, 1, 0.0, 11));
  for (Index j = 0; j < 4; ++j) {
    const Eigen::VectorXd y = sp.truth.row(j).transpose();
    const double var = (y.array() - y.mean()).square().sum() / (y.size() - 1);
    const double expected = sp.loadings.row(j).squaredNorm() + 1.0;
    CHECK(std::abs(var / expected - 1.0) < 0.05);
  }
}

TEST_CASE("dependent: lag-1 regression coefficient of each factor") {
  // Under psi_t = rho psi_{t-1} + e_t from psi_1 = e_1, E[psi_t psi_{t-1}] =
  // rho E[psi_{t-1}^2] at every t, so sum psi_t psi_{t-1} / sum psi_{t-1}^2
  // targets rho exactly despite the nonstationary start.
  const SyntheticPanel sp = generate(make(DgpKind::Dependent, 2, 100000, 1, 0.0, 12));
  const Eigen::MatrixXd& f = sp.factors;
  const Index T = f.rows();
  for (Index k = 0; k < 3; ++k) {
    const double num = f.col(k).tail(T - 1).dot(f.col(k).head(T - 1));
    const double den = f.col(k).head(T - 1).squaredNorm();
    CHECK(std::abs(num / den - kDependentAr[static_cast<std::size_t>(k)]) < 0.02);
  }
}

TEST_CASE("dependent with zero AR coefficients reduces to independent") {
  DgpSpec dep = make(DgpKind::Dependent, 5, 10, 20, 1.0, 9);
  dep.ar = std::array<double, 3>{0.0, 0.0, 0.0};
  const DgpSpec ind = make(DgpKind::Independent, 5, 10, 20, 1.0, 9);
  CHECK(generate(dep).panel.outcomes == generate(ind).panel.outcomes);
}

TEST_CASE("weighted: treated-unit mean and zero weights beyond the third control") {
  const SyntheticPanel sp = generate(make(DgpKind::Weighted, 10, 100000, 1, 0.0, 13));
  const Eigen::VectorXd y = sp.truth.row(9).transpose();
  CHECK(std::abs(y.mean() - 100.0) < 0.5);

  const Eigen::VectorXd u = y - (3 * sp.truth.row(0) + 2 * sp.truth.row(1) + sp.truth.row(2)).transpose();
  const double u_var = (u.array() - u.mean()).square().mean();
  CHECK(u_var == doctest::Approx(1.0).epsilon(0.03));
  // residual carries no trace of unit 5
  const Eigen::VectorXd y5 = sp.truth.row(4).transpose().array() - sp.truth.row(4).mean();
  const double corr = (u.array() - u.mean()).matrix().dot(y5) / std::sqrt(u_var * y5.squaredNorm() * y.size());
  CHECK(std::abs(corr) < 0.02);

  const Eigen::VectorXd mu = weighted_dgp_mean(10);
  for (Index j = 0; j < 9; ++j) CHECK(std::abs(sp.truth.row(j).mean() - mu[j]) < 0.1);
}

TEST_CASE("weighted: unit counts outside {10, 40} are rejected") {
  CHECK_THROWS_WITH_AS(generate(make(DgpKind::Weighted, 12, 10, 20)), doctest::Contains("{10, 40}"),
                       std::invalid_argument);
  CHECK(weighted_dgp_mean(40).size() == 39);
  CHECK_NOTHROW(generate(make(DgpKind::Weighted, 40, 10, 20)));
}

TEST_CASE("spec validation and kind names") {
  CHECK_THROWS_AS(generate(make(DgpKind::Independent, 1, 10, 20)), std::invalid_argument);
  CHECK_THROWS_AS(generate(make(DgpKind::Independent, 5, 1, 20)), std::invalid_argument);
  CHECK_THROWS_AS(generate(make(DgpKind::Independent, 5, 10, 0)), std::invalid_argument);
  CHECK(parse_dgp_kind("dependent") == DgpKind::Dependent);
  CHECK(to_string(DgpKind::Weighted) == "weighted");
  CHECK_THROWS_AS(parse_dgp_kind("ar"), std::invalid_argument);
}
