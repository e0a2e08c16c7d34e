#include "bmc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bmc/parallel.hpp"

namespace bmc {

ScmFit simplex_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                             const SimplexLsOptions& opts) {
  const Index n = a.cols();
  if (n < 1) throw std::invalid_argument("need at least one control unit");
  if (a.rows() != y.size()) throw std::invalid_argument("dimension mismatch");

  ScmFit fit;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd r = a * w - y;
  const double tol = opts.tol * std::max(1.0, y.squaredNorm());
  fit.objective_trace.push_back(r.squaredNorm());

  int it = 0;
  double gap = 0.0;
  for (; it < opts.max_iter; ++it) {
    const Eigen::VectorXd g = 2.0 * a.transpose() * r;
    const double gw = g.dot(w);
    Index s = 0;
    for (Index i = 1; i < n; ++i)
      if (g[i] < g[s]) s = i;
    Index v = -1;
    for (Index i = 0; i < n; ++i)
      if (w[i] > 0.0 && (v < 0 || g[i] > g[v])) v = i;
    gap = gw - g[s];
    if (gap <= tol) break;

    Eigen::VectorXd d;
    double gamma_max;
    bool away = false;
    if (gw - g[s] >= g[v] - gw || w[v] >= 1.0) {
      d = -w;
      d[s] += 1.0;
      gamma_max = 1.0;
    } else {
      d = w;
      d[v] -= 1.0;
      gamma_max = w[v] / (1.0 - w[v]);
      away = true;
    }
    const Eigen::VectorXd ad = a * d;
    const double denom = ad.squaredNorm();
    double gamma = denom > 0.0 ? -r.dot(ad) / denom : gamma_max;
    gamma = std::clamp(gamma, 0.0, gamma_max);
    if (gamma == 0.0) break;
    w += gamma * d;
    if (away && gamma == gamma_max) w[v] = 0.0;
    if (!away && gamma == 1.0) {
      w.setZero();
      w[s] = 1.0;
    }
    w = w.cwiseMax(0.0);
    w /= w.sum();
    r = a * w - y;
    fit.objective_trace.push_back(r.squaredNorm());
  }
  fit.weights = w;
  fit.iterations = it;
  fit.duality_gap = gap;
  fit.pretreat_rmse = std::sqrt(r.squaredNorm() / static_cast<double>(std::max<Index>(1, y.size())));
  return fit;
}

ScmFit scm_fit(const Eigen::MatrixXd& outcomes, Index treated_unit, Index T0,
               const SimplexLsOptions& opts) {
  const Index J = outcomes.rows();
  if (treated_unit < 0 || treated_unit >= J) throw std::invalid_argument("treated unit out of range");
  if (T0 < 2) throw std::invalid_argument("synthetic control needs at least 2 pretreatment periods");
  if (T0 > outcomes.cols()) throw std::invalid_argument("T0 exceeds the number of periods");
  std::vector<Index> controls;
  for (Index j = 0; j < J; ++j)
    if (j != treated_unit) controls.push_back(j);
  Eigen::MatrixXd a(T0, static_cast<Index>(controls.size()));
  for (std::size_t c = 0; c < controls.size(); ++c)
    a.col(static_cast<Index>(c)) = outcomes.row(controls[c]).head(T0).transpose();
  const Eigen::VectorXd y = outcomes.row(treated_unit).head(T0).transpose();
  ScmFit fit = simplex_least_squares(a, y, opts);
  fit.controls = std::move(controls);
  fit.treated_unit = treated_unit;
  return fit;
}

ScmFit scm_fit(const PanelData& panel, Index treated_unit, Index T0, const SimplexLsOptions& opts) {
  if (T0 > panel.periods()) throw std::invalid_argument("T0 exceeds the number of periods");
  if (T0 >= 1 && (panel.mask.leftCols(T0).array() != 0).any())
    throw std::invalid_argument("synthetic control requires untreated pretreatment periods");
  for (Index j = 0; j < panel.units(); ++j)
    if (j != treated_unit && (panel.mask.row(j).array() != 0).any())
      throw std::invalid_argument("synthetic control supports a single treated unit");
  return scm_fit(panel.outcomes, treated_unit, T0, opts);
}

Eigen::VectorXd scm_predict(const Eigen::MatrixXd& outcomes, const ScmFit& fit) {
  Eigen::VectorXd path = Eigen::VectorXd::Zero(outcomes.cols());
  for (std::size_t c = 0; c < fit.controls.size(); ++c)
    path += fit.weights[static_cast<Index>(c)] * outcomes.row(fit.controls[c]).transpose();
  return path;
}

Eigen::MatrixXd svt(const Eigen::MatrixXd& z, double reg, double* nuclear_norm) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = (svd.singularValues().array() - reg).cwiseMax(0.0);
  if (nuclear_norm) *nuclear_norm = s.sum();
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

SoftImputeResult soft_impute(const Eigen::MatrixXd& y, const Mask& observed, double reg,
                             const SoftImputeOptions& opts, const Eigen::MatrixXd* warm_start) {
  if (reg < 0.0) throw std::invalid_argument("nuclear-norm penalty must be nonnegative");
  if (observed.rows() != y.rows() || observed.cols() != y.cols())
    throw std::invalid_argument("observation mask does not match the matrix");
  const Eigen::ArrayXXd obs = (observed.array() != 0).cast<double>();
  const Eigen::MatrixXd y_obs = (obs * y.array()).matrix();

  SoftImputeResult res;
  Eigen::MatrixXd m = warm_start ? *warm_start : Eigen::MatrixXd::Zero(y.rows(), y.cols());
  for (int it = 0; it < opts.max_iter; ++it) {
    const Eigen::MatrixXd z = y_obs + ((1.0 - obs) * m.array()).matrix();
    double nuclear = 0.0;
    Eigen::MatrixXd next = svt(z, reg, &nuclear);
    const double fit = 0.5 * (obs * (y.array() - next.array())).matrix().squaredNorm();
    res.objective_trace.push_back(fit + reg * nuclear);
    const double change = (next - m).squaredNorm();
    const double base = m.squaredNorm();
    m = std::move(next);
    res.iterations = it + 1;
    if (change <= opts.tol * opts.tol * std::max(base, 1e-300)) break;
  }
  res.completed = std::move(m);
  return res;
}

Eigen::MatrixXd soft_impute(const PanelData& panel, double reg, const SoftImputeOptions& opts) {
  const Mask observed = (panel.mask.array() == 0).cast<int>();
  return soft_impute(panel.outcomes, observed, reg, opts).completed;
}

std::vector<double> default_nnm_grid(const PanelData& panel, int n) {
  if (n < 1) throw std::invalid_argument("grid size must be positive");
  const Eigen::MatrixXd z = ((panel.mask.array() == 0).cast<double>() * panel.outcomes.array()).matrix();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(z);
  const double s1 = svd.singularValues()[0];
  std::vector<double> grid;
  for (int i = 0; i < n; ++i) {
    const double e = n == 1 ? 0.0 : -3.0 + 3.0 * i / (n - 1);
    grid.push_back(s1 * std::pow(10.0, e));
  }
  std::sort(grid.begin(), grid.end(), std::greater<>());
  return grid;
}

SoftImputeFit mc_nnm_cv(const PanelData& panel, std::vector<double> grid, int folds, Rng& rng,
                        const SoftImputeOptions& opts, unsigned threads) {
  if (grid.empty()) throw std::invalid_argument("penalty grid is empty");
  if (folds < 2) throw std::invalid_argument("need at least 2 folds");
  std::sort(grid.begin(), grid.end(), std::greater<>());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<Cell> cells;
  for (Index j = 0; j < panel.units(); ++j)
    for (Index t = 0; t < panel.periods(); ++t)
      if (panel.mask(j, t) == 0) cells.push_back({j, t});
  if (cells.size() < 25) throw std::invalid_argument("cross-validation needs at least 25 untreated cells");
  std::shuffle(cells.begin(), cells.end(), rng);

  const Mask observed = (panel.mask.array() == 0).cast<int>();
  // mse(f, g) for fold f and grid point g
  Eigen::MatrixXd mse(folds, static_cast<Index>(grid.size()));
  parallel_for(
      static_cast<std::size_t>(folds),
      [&](std::size_t f) {
        Mask train = observed;
        std::vector<Cell> held;
        for (std::size_t i = f; i < cells.size(); i += static_cast<std::size_t>(folds)) {
          train(cells[i].unit, cells[i].period) = 0;
          held.push_back(cells[i]);
        }
        Eigen::MatrixXd warm = Eigen::MatrixXd::Zero(panel.units(), panel.periods());
        for (std::size_t g = 0; g < grid.size(); ++g) {
          SoftImputeResult r = soft_impute(panel.outcomes, train, grid[g], opts, &warm);
          double err = 0.0;
          for (const auto& c : held)
            err += std::pow(r.completed(c.unit, c.period) - panel.outcomes(c.unit, c.period), 2);
          mse(static_cast<Index>(f), static_cast<Index>(g)) = err / static_cast<double>(held.size());
          warm = std::move(r.completed);
        }
      },
      threads);

  SoftImputeFit fit;
  const Eigen::VectorXd mean = mse.colwise().mean().transpose();
  std::size_t best = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    fit.cv_curve[grid[g]] = mean[static_cast<Index>(g)];
    // strict comparison keeps the earlier (larger) penalty on ties
    if (mean[static_cast<Index>(g)] < mean[static_cast<Index>(best)]) best = g;
  }
  fit.reg = grid[best];
  fit.completed = soft_impute(panel.outcomes, observed, fit.reg, opts).completed;
  return fit;
}

}  // namespace bmc
