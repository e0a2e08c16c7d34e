#pragma once

#include <utility>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "bmc/random.hpp"

namespace bmc {

// Geometry of the Stiefel manifold {X in R^{T x H} : X^T X = I} with the
// metric inherited from the ambient Frobenius inner product.

template <typename Derived>
using PlainOf = typename Derived::PlainObject;

template <typename Derived>
PlainOf<Derived> sym(const Eigen::MatrixBase<Derived>& a) {
  return (a + a.transpose()) / typename Derived::Scalar(2);
}

// max |X^T X - I|
template <typename Derived>
typename Derived::Scalar orthonormality_error(const Eigen::MatrixBase<Derived>& x) {
  using Mat = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  return (x.transpose() * x - Mat::Identity(x.cols(), x.cols())).cwiseAbs().maxCoeff();
}

// v - X sym(X^T v)
template <typename DX, typename DV>
PlainOf<DV> project_tangent(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DV>& v) {
  return v - x * sym(x.transpose() * v);
}

// Thin QR with the diagonal of R forced nonnegative, so the result is unique.
template <typename Derived>
PlainOf<Derived> reorthonormalize(const Eigen::MatrixBase<Derived>& x) {
  using Mat = PlainOf<Derived>;
  Eigen::HouseholderQR<Mat> qr(x);
  Mat q = qr.householderQ() * Mat::Identity(x.rows(), x.cols());
  const Mat r = qr.matrixQR().topRows(x.cols()).template triangularView<Eigen::Upper>();
  for (Eigen::Index h = 0; h < x.cols(); ++h)
    if (r(h, h) < 0) q.col(h) = -q.col(h);
  return q;
}

// Exact geodesic of the embedded metric started at x with velocity v, run for
// time eps. With A = X^T V and S = V^T V,
//   [X(t) V(t)] = [X V] exp(t [A -S; I A]) diag(exp(-tA), exp(-tA)).
template <typename DX, typename DV>
std::pair<PlainOf<DX>, PlainOf<DX>> geodesic_flow(const Eigen::MatrixBase<DX>& x,
                                                  const Eigen::MatrixBase<DV>& v,
                                                  typename DX::Scalar eps) {
  using Mat = PlainOf<DX>;
  const Eigen::Index H = x.cols();
  const Mat a = x.transpose() * v;
  const Mat s = v.transpose() * v;
  Mat gen(2 * H, 2 * H);
  gen << a, -s, Mat::Identity(H, H), a;
  const Mat big = (eps * gen).exp();
  const Mat rot = (-eps * a).exp();
  Mat xv(x.rows(), 2 * H);
  xv << x, v;
  const Mat moved = xv * big;
  return {moved.leftCols(H) * rot, moved.rightCols(H) * rot};
}

// Uniform (Haar) draw: sign-fixed thin QR of a Gaussian matrix.
Eigen::MatrixXd draw_haar_stiefel(Eigen::Index T, Eigen::Index H, Rng& rng);

struct GmcConfig {
  double step = 0.01;         // initial leapfrog step
  int n_step = 5;             // leapfrog steps per proposal
  double target_accept = 0.6; // a*
  double varsigma = 0.6;      // adaptation decay exponent, in (0.5, 1)
  // Use the adaptation rule exactly as printed in the appendix instead of the
  // Robbins-Monro form. See adapt_step.
  bool literal_adaptation = false;
};

void validate(const GmcConfig& cfg);

// Conditional log density of Psi (up to a constant) given the rest, where
// `resid_target` is Y - Xi:  -(tau/2) ||Y - Xi - Phi Psi^T||_F^2.
double log_density_psi(const Eigen::MatrixXd& resid_target, const Eigen::MatrixXd& phi,
                       const Eigen::MatrixXd& psi, double tau);

// tau (Y - Xi)^T Phi - tau Psi Phi^T Phi
Eigen::MatrixXd log_grad_psi(const Eigen::MatrixXd& y_complete, const Eigen::MatrixXd& xi,
                             const Eigen::MatrixXd& phi, const Eigen::MatrixXd& psi, double tau);

struct PsiUpdate {
  Eigen::MatrixXd psi;
  bool accepted = false;
  double accept_prob = 0.0;
  bool reorthonormalized = false;
};

// One geodesic Monte Carlo step: fresh Gaussian velocity projected to the
// tangent space, n_step kick-flow-kick leapfrog steps, Metropolis correction.
// Non-finite energies reject.
PsiUpdate sample_psi(const Eigen::MatrixXd& resid_target, const Eigen::MatrixXd& phi,
                     const Eigen::MatrixXd& psi, double tau, double step, int n_step, Rng& rng);

// When H == T the manifold is O(T), which has two connected components that
// geodesics never cross. This Metropolis move negates one uniformly chosen
// column, switching component.
PsiUpdate flip_column_move(const Eigen::MatrixXd& resid_target, const Eigen::MatrixXd& phi,
                           const Eigen::MatrixXd& psi, double tau, Rng& rng);

// Robbins-Monro step tuning:
//   log eps <- log eps + iter^{-varsigma} (avg_accept - a*)
// so the step grows while acceptance is above target and the gains are not
// summable. With literal_adaptation the printed rule
//   log eps <- log eps + iter^{-1/varsigma} (a* - avg_accept)
// is applied instead; it moves eps away from the target and can change it by
// at most a bounded factor over the whole run.
double adapt_step(double eps, long iter, double avg_accept, const GmcConfig& cfg);

inline constexpr double kOrthonormalityTolerance = 1e-8;

}  // namespace bmc
