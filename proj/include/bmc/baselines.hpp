#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "bmc/panel.hpp"
#include "bmc/random.hpp"

namespace bmc {

// Synthetic control: treated pretreatment path matched by a convex
// combination of control units.
struct ScmFit {
  Eigen::VectorXd weights;       // over controls, on the simplex
  std::vector<Index> controls;   // unit index of each weight
  Index treated_unit = 0;
  double pretreat_rmse = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;
  std::vector<double> objective_trace;  // ||y - A w||^2 per iterate
};

struct SimplexLsOptions {
  double tol = 1e-8;  // duality gap, relative to max(1, ||y||^2)
  int max_iter = 10000;
};

// min ||y - A w||^2 over the probability simplex by Frank-Wolfe with away
// steps and exact line search, started at uniform weights. Ties in vertex
// selection go to the lowest index.
ScmFit simplex_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                             const SimplexLsOptions& opts = {});

// Uses periods [0, T0) of `outcomes`; controls are every other unit.
ScmFit scm_fit(const Eigen::MatrixXd& outcomes, Index treated_unit, Index T0,
               const SimplexLsOptions& opts = {});
// Also checks that no unit is treated before T0.
ScmFit scm_fit(const PanelData& panel, Index treated_unit, Index T0,
               const SimplexLsOptions& opts = {});
// Synthetic path sum_j w_j y_(j) over all periods.
Eigen::VectorXd scm_predict(const Eigen::MatrixXd& outcomes, const ScmFit& fit);

struct SoftImputeOptions {
  int max_iter = 2000;
  double tol = 1e-7;  // relative Frobenius change between iterates
};

struct SoftImputeResult {
  Eigen::MatrixXd completed;
  int iterations = 0;
  std::vector<double> objective_trace;  // 0.5 ||P_obs(Y - M)||^2 + reg ||M||_*
};

// Singular value soft-thresholding.
Eigen::MatrixXd svt(const Eigen::MatrixXd& z, double reg, double* nuclear_norm = nullptr);

// Iterates M <- SVT_reg(P_obs(Y) + P_miss(M)); `observed` is nonzero at
// cells whose value enters the fit.
SoftImputeResult soft_impute(const Eigen::MatrixXd& y, const Mask& observed, double reg,
                             const SoftImputeOptions& opts = {},
                             const Eigen::MatrixXd* warm_start = nullptr);
// Observed cells are the untreated ones.
Eigen::MatrixXd soft_impute(const PanelData& panel, double reg, const SoftImputeOptions& opts = {});

struct SoftImputeFit {
  Eigen::MatrixXd completed;
  double reg = 0.0;
  std::map<double, double> cv_curve;  // reg -> mean held-out MSE
};

// Twenty log-spaced values from 1e-3 s1 to s1, s1 the top singular value of
// the zero-filled untreated matrix; descending.
std::vector<double> default_nnm_grid(const PanelData& panel, int n = 20);

// K-fold cross-validation over the untreated cells (random partition without
// replacement), warm-started along the descending grid. Ties pick the larger
// penalty. The final fit uses every untreated cell.
SoftImputeFit mc_nnm_cv(const PanelData& panel, std::vector<double> grid, int folds, Rng& rng,
                        const SoftImputeOptions& opts = {}, unsigned threads = 1);

}  // namespace bmc
