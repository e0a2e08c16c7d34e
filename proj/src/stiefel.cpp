#include "bmc/stiefel.hpp"

#include <cmath>
#include <stdexcept>

namespace bmc {

Eigen::MatrixXd draw_haar_stiefel(Eigen::Index T, Eigen::Index H, Rng& rng) {
  if (H < 1 || H > T) throw std::invalid_argument("Stiefel draw needs 1 <= H <= T");
  return reorthonormalize(draw_normal_matrix(T, H, rng));
}

void validate(const GmcConfig& cfg) {
  if (!(cfg.step > 0.0)) throw std::invalid_argument("GMC step must be positive");
  if (cfg.n_step < 1) throw std::invalid_argument("GMC n_step must be >= 1");
  if (!(cfg.target_accept > 0.0 && cfg.target_accept < 1.0))
    throw std::invalid_argument("target acceptance must lie in (0, 1)");
  if (!(cfg.varsigma > 0.5 && cfg.varsigma < 1.0))
    throw std::invalid_argument("varsigma must lie in (0.5, 1)");
}

double log_density_psi(const Eigen::MatrixXd& resid_target, const Eigen::MatrixXd& phi,
                       const Eigen::MatrixXd& psi, double tau) {
  return -0.5 * tau * (resid_target - phi * psi.transpose()).squaredNorm();
}

Eigen::MatrixXd log_grad_psi(const Eigen::MatrixXd& y_complete, const Eigen::MatrixXd& xi,
                             const Eigen::MatrixXd& phi, const Eigen::MatrixXd& psi, double tau) {
  if (y_complete.rows() != xi.rows() || y_complete.cols() != xi.cols() ||
      phi.rows() != y_complete.rows() || psi.rows() != y_complete.cols() ||
      phi.cols() != psi.cols())
    throw std::invalid_argument("log_grad_psi: dimension mismatch");
  return tau * (y_complete - xi).transpose() * phi - tau * psi * (phi.transpose() * phi);
}

namespace {

Eigen::MatrixXd grad(const Eigen::MatrixXd& rt_phi, const Eigen::MatrixXd& phi_gram,
                     const Eigen::MatrixXd& psi, double tau) {
  return tau * (rt_phi - psi * phi_gram);
}

}  // namespace

namespace {

// One kick-flow-kick trajectory with an MH correction. LogDensity and Gradient are
// callables on a Stiefel point.
template <class LogDensity, class Gradient>
PsiUpdate gmc_transition(const Eigen::MatrixXd& psi, LogDensity&& log_density,
                         Gradient&& gradient, double step, int n_step, Rng& rng) {
  Eigen::MatrixXd v = project_tangent(psi, draw_normal_matrix(psi.rows(), psi.cols(), rng));
  const double h0 = -log_density(psi) + 0.5 * v.squaredNorm();

  Eigen::MatrixXd x = psi;
  Eigen::MatrixXd g = gradient(x);
  for (int k = 0; k < n_step; ++k) {
    v = project_tangent(x, v + 0.5 * step * g);
    auto [nx, nv] = geodesic_flow(x, v, step);
    x = std::move(nx);
    v = std::move(nv);
    g = gradient(x);
    v = project_tangent(x, v + 0.5 * step * g);
  }

  PsiUpdate out;
  if (orthonormality_error(x) > kOrthonormalityTolerance) {
    x = reorthonormalize(x);
    out.reorthonormalized = true;
  }
  const double h1 = -log_density(x) + 0.5 * v.squaredNorm();
  const double log_ratio = h0 - h1;
  if (!std::isfinite(log_ratio) || !x.allFinite()) {
    out.psi = psi;
    out.reorthonormalized = false;
    return out;
  }
  out.accept_prob = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
  if (std::log(draw_uniform(rng)) < log_ratio) {
    out.psi = std::move(x);
    out.accepted = true;
  } else {
    out.psi = psi;
    out.reorthonormalized = false;
  }
  return out;
}

}  // namespace

PsiUpdate sample_psi(const Eigen::MatrixXd& resid_target, const Eigen::MatrixXd& phi,
                     const Eigen::MatrixXd& psi, double tau, double step, int n_step, Rng& rng) {
  const Eigen::MatrixXd rt_phi = resid_target.transpose() * phi;
  const Eigen::MatrixXd phi_gram = phi.transpose() * phi;
  return gmc_transition(
      psi, [&](const Eigen::MatrixXd& x) { return log_density_psi(resid_target, phi, x, tau); },
      [&](const Eigen::MatrixXd& x) { return grad(rt_phi, phi_gram, x, tau); }, step, n_step,
      rng);
}

PsiUpdate flip_column_move(const Eigen::MatrixXd& resid_target, const Eigen::MatrixXd& phi,
                           const Eigen::MatrixXd& psi, double tau, Rng& rng) {
  std::uniform_int_distribution<Eigen::Index> pick(0, psi.cols() - 1);
  const Eigen::Index h = pick(rng);
  Eigen::MatrixXd proposal = psi;
  proposal.col(h) = -proposal.col(h);
  const double log_ratio = log_density_psi(resid_target, phi, proposal, tau) -
                           log_density_psi(resid_target, phi, psi, tau);
  PsiUpdate out;
  out.accept_prob = !std::isfinite(log_ratio) ? 0.0
                    : log_ratio >= 0.0        ? 1.0
                                              : std::exp(log_ratio);
  if (std::isfinite(log_ratio) && std::log(draw_uniform(rng)) < log_ratio) {
    out.psi = std::move(proposal);
    out.accepted = true;
  } else {
    out.psi = psi;
  }
  return out;
}

double adapt_step(double eps, long iter, double avg_accept, const GmcConfig& cfg) {
  if (iter < 1) throw std::invalid_argument("adaptation iteration index starts at 1");
  const double i = static_cast<double>(iter);
  if (cfg.literal_adaptation)
    return std::exp(std::log(eps) + std::pow(i, -1.0 / cfg.varsigma) * (cfg.target_accept - avg_accept));
  return std::exp(std::log(eps) + std::pow(i, -cfg.varsigma) * (avg_accept - cfg.target_accept));
}

}  // namespace bmc
