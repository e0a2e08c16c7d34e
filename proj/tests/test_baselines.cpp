#include <cmath>
#include <limits>

#include "bmc/baselines.hpp"
#include "doctest.h"

using namespace bmc;

namespace {

PanelData single_treated(const Eigen::MatrixXd& y, Index T0) {
  PanelData d;
  d.outcomes = y;
  d.mask = Mask::Zero(y.rows(), y.cols());
  d.mask.row(y.rows() - 1).tail(y.cols() - T0).setOnes();
  d.unit_labels = numbered_labels(y.rows());
  d.period_labels = numbered_labels(y.cols());
  return d;
}

double objective(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  return (y - a * w).squaredNorm();
}

}  // namespace

TEST_CASE("SCM: exact copy of a control is a vertex optimum") {
  Rng rng = make_rng(1);
  Eigen::MatrixXd y = draw_normal_matrix(5, 15, rng);
  y.row(4).head(10) = y.row(0).head(10);
  const ScmFit fit = scm_fit(single_treated(y, 10), 4, 10);
  REQUIRE(fit.weights.size() == 4);
  CHECK(fit.weights[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(fit.pretreat_rmse < 1e-4);
  CHECK(fit.controls == std::vector<Index>{0, 1, 2, 3});
}

TEST_CASE("SCM: average of two controls against a simplex grid-search oracle") {
  Rng rng = make_rng(2);
  const Index T0 = 200;
  Eigen::MatrixXd y = draw_normal_matrix(5, T0 + 5, rng);
  y.row(4) = 0.5 * (y.row(0) + y.row(1)) + 0.05 * draw_normal_matrix(1, T0 + 5, rng);
  const ScmFit fit = scm_fit(single_treated(y, T0), 4, T0);
  CHECK(fit.weights[0] == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(fit.weights[0] - 0.5) < 0.05);
  CHECK(std::abs(fit.weights[1] - 0.5) < 0.05);

  const Eigen::MatrixXd a = y.topRows(4).leftCols(T0).transpose();
  const Eigen::VectorXd target = y.row(4).head(T0).transpose();
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_w(4);
  const int steps = 50;
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; i + j <= steps; ++j)
      for (int k = 0; i + j + k <= steps; ++k) {
        Eigen::VectorXd w(4);
        w << i, j, k, steps - i - j - k;
        w /= steps;
        const double f = objective(a, target, w);
        if (f < best) {
          best = f;
          best_w = w;
        }
      }
  CHECK(objective(a, target, fit.weights) <= best + 1e-9);
  CHECK((fit.weights - best_w).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("SCM: feasibility, monotone objective, uniform bound") {
  Rng rng = make_rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::MatrixXd y = draw_normal_matrix(8, 25, rng);
    const ScmFit fit = scm_fit(y, 7, 20);
    CHECK((fit.weights.array() >= 0).all());
    CHECK(std::abs(fit.weights.sum() - 1.0) < 1e-9);
    for (std::size_t i = 1; i < fit.objective_trace.size(); ++i)
      CHECK(fit.objective_trace[i] <= fit.objective_trace[i - 1] + 1e-12);
    const Eigen::MatrixXd a = y.topRows(7).leftCols(20).transpose();
    const Eigen::VectorXd target = y.row(7).head(20).transpose();
    CHECK(objective(a, target, fit.weights) <= objective(a, target, Eigen::VectorXd::Constant(7, 1.0 / 7)));
    const Eigen::VectorXd path = scm_predict(y, fit);
    CHECK(path.size() == 25);
    CHECK(path[22] == doctest::Approx(y.topRows(7).col(22).dot(fit.weights)));
  }
}

TEST_CASE("SCM: duplicate controls tie toward the lowest index") {
  Eigen::MatrixXd y(4, 6);
  y << 1, 2, 3, 4, 5, 6,
       1, 2, 3, 4, 5, 6,
       -3, 0, 2, 1, 0, 1,
       1, 2, 3, 4, 5, 6;
  const ScmFit a = scm_fit(y, 3, 5);
  const ScmFit b = scm_fit(y, 3, 5);
  CHECK(a.weights == b.weights);
  CHECK(a.weights[0] >= a.weights[1]);
  CHECK(a.weights[0] + a.weights[1] == doctest::Approx(1.0));
}

TEST_CASE("SCM: errors") {
  Rng rng = make_rng(4);
  const Eigen::MatrixXd y = draw_normal_matrix(4, 10, rng);
  CHECK_THROWS_AS(scm_fit(y, 3, 1), std::invalid_argument);
  PanelData d = single_treated(y, 5);
  d.mask(0, 8) = 1;
  CHECK_THROWS_AS(scm_fit(d, 3, 5), std::invalid_argument);
}

TEST_CASE("soft-impute: fixed point, rank-1 completion, full thresholding") {
  Rng rng = make_rng(5);
  const Eigen::MatrixXd y = draw_normal_matrix(4, 6, rng);
  const Mask all = Mask::Ones(4, 6);
  CHECK((soft_impute(y, all, 0.0).completed - y).cwiseAbs().maxCoeff() < 1e-10);

  const Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(5, 1.0, 2.0);
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(7, -1.0, 1.5);
  const Eigen::MatrixXd r1 = u * v.transpose();
  Mask obs = Mask::Ones(5, 7);
  obs(4, 6) = 0;
  // From a cold start at reg ~ 0 every completion is a fixed point; follow a
  // warm-started decreasing path instead.
  SoftImputeOptions opts;
  opts.max_iter = 100000;
  opts.tol = 1e-14;
  Eigen::MatrixXd warm = Eigen::MatrixXd::Zero(5, 7);
  for (double reg = Eigen::JacobiSVD<Eigen::MatrixXd>(r1).singularValues()[0]; reg > 1e-9; reg *= 0.5)
    warm = soft_impute(r1, obs, reg, opts, &warm).completed;
  CHECK(std::abs(warm(4, 6) - u[4] * v[6]) < 1e-6);

  Eigen::MatrixXd zero_filled = y;
  Mask partial = all;
  partial(0, 0) = 0;
  zero_filled(0, 0) = 0.0;
  const double s1 = Eigen::JacobiSVD<Eigen::MatrixXd>(zero_filled).singularValues()[0];
  CHECK(soft_impute(y, partial, s1).completed.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("soft-impute: objective is nonincreasing and observed cells converge") {
  Rng rng = make_rng(6);
  const Eigen::MatrixXd y = draw_normal_matrix(6, 9, rng) + draw_normal_matrix(6, 2, rng) * draw_normal_matrix(2, 9, rng);
  Mask obs = Mask::Ones(6, 9);
  obs.bottomRightCorner(2, 3).setZero();
  const SoftImputeResult res = soft_impute(y, obs, 0.5);
  REQUIRE(res.objective_trace.size() >= 2);
  for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
    CHECK(res.objective_trace[i] <= res.objective_trace[i - 1] * (1 + 1e-12));

  double prev = std::numeric_limits<double>::infinity();
  for (double reg : {1.0, 0.1, 0.01, 0.001}) {
    const double err = (soft_impute(y, Mask::Ones(6, 9), reg).completed - y).cwiseAbs().maxCoeff();
    CHECK(err <= prev);
    prev = err;
  }
  CHECK(prev < 1e-2);
}

TEST_CASE("singular value thresholding") {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 3);
  z.diagonal() << 5.0, 2.0, 0.5;
  double nuc = 0.0;
  const Eigen::MatrixXd s = svt(z, 1.0, &nuc);
  CHECK(s(0, 0) == doctest::Approx(4.0));
  CHECK(s(1, 1) == doctest::Approx(1.0));
  CHECK(std::abs(s(2, 2)) < 1e-12);
  CHECK(nuc == doctest::Approx(5.0));
}

TEST_CASE("MC-NNM cross-validation") {
  Rng data_rng = make_rng(7);
  const Eigen::VectorXd u = draw_normal_vector(8, data_rng);
  const Eigen::VectorXd v = draw_normal_vector(12, data_rng);
  const Eigen::MatrixXd r1 = u * v.transpose();
  const PanelData d = single_treated(r1, 8);

  Rng rng = make_rng(8);
  const SoftImputeFit single = mc_nnm_cv(d, {0.3}, 5, rng);
  CHECK(single.reg == 0.3);
  CHECK(single.cv_curve.size() == 1);

  std::vector<double> grid;
  for (int e = 0; e >= -5; --e) grid.push_back(std::pow(10.0, e));
  Rng rng2 = make_rng(8);
  SoftImputeOptions opts;
  opts.max_iter = 20000;
  opts.tol = 1e-10;
  const SoftImputeFit fit = mc_nnm_cv(d, grid, 5, rng2, opts);
  CHECK(fit.reg <= 1e-4);
  double err = 0.0;
  for (const auto& c : d.treated_cells()) err = std::max(err, std::abs(fit.completed(c.unit, c.period) - r1(c.unit, c.period)));
  CHECK(err < 1e-3);

  Rng rng3 = make_rng(8);
  const SoftImputeFit again = mc_nnm_cv(d, grid, 5, rng3, opts, 2);
  CHECK(again.reg == fit.reg);
  CHECK(again.completed == fit.completed);

  Rng rng4 = make_rng(9);
  CHECK_THROWS_AS(mc_nnm_cv(d, {}, 5, rng4), std::invalid_argument);
}

TEST_CASE("default penalty grid") {
  Rng rng = make_rng(10);
  const PanelData d = single_treated(draw_normal_matrix(5, 10, rng), 6);
  const auto grid = default_nnm_grid(d);
  REQUIRE(grid.size() == 20);
  Eigen::MatrixXd zf = d.outcomes;
  for (const auto& c : d.treated_cells()) zf(c.unit, c.period) = 0.0;
  const double s1 = Eigen::JacobiSVD<Eigen::MatrixXd>(zf).singularValues()[0];
  CHECK(grid.front() == doctest::Approx(s1));
  CHECK(grid.back() == doctest::Approx(1e-3 * s1));
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] < grid[i - 1]);
}
