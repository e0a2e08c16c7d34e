#include "bmc/shrinkage.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace bmc {

StickWeights compute_weights(const Eigen::VectorXd& zeta) {
  const Eigen::Index H = zeta.size();
  if (H == 0) throw std::invalid_argument("zeta must be nonempty");
  for (Eigen::Index h = 0; h < H; ++h)
    if (!(zeta[h] > 0.0 && zeta[h] <= 1.0))
      throw std::invalid_argument("zeta entries must lie in (0, 1]");
  if (zeta[H - 1] != 1.0) throw std::invalid_argument("last stick proportion must equal 1");

  StickWeights w{Eigen::VectorXd(H), Eigen::VectorXd(H)};
  double remaining = 1.0;
  double cumulative = 0.0;
  for (Eigen::Index l = 0; l < H; ++l) {
    w.omega[l] = zeta[l] * remaining;
    remaining *= 1.0 - zeta[l];
    cumulative += w.omega[l];
    w.pi[l] = cumulative;
  }
  return w;
}

double log_spike_density(const Eigen::Ref<const Eigen::VectorXd>& x, double delta) {
  const double J = static_cast<double>(x.size());
  return -0.5 * J * std::log(2.0 * std::numbers::pi * delta) - 0.5 * x.squaredNorm() / delta;
}

double log_slab_marginal(const Eigen::Ref<const Eigen::VectorXd>& x, double kappa1,
                         double kappa2) {
  const double J = static_cast<double>(x.size());
  const double nu = 2.0 * kappa1;
  const double scale = kappa2 / kappa1;
  return std::lgamma(0.5 * (nu + J)) - std::lgamma(0.5 * nu) -
         0.5 * J * std::log(nu * std::numbers::pi * scale) -
         0.5 * (nu + J) * std::log1p(x.squaredNorm() / (nu * scale));
}

Eigen::MatrixXd z_log_probabilities(const Eigen::MatrixXd& phi, const Eigen::VectorXd& omega,
                                    const CspHyper& hyper) {
  const Eigen::Index H = omega.size();
  if (phi.cols() != H) throw std::invalid_argument("loading columns must match rank");
  Eigen::MatrixXd logp(H, H);
  for (Eigen::Index h = 0; h < H; ++h) {
    const double spike = log_spike_density(phi.col(h), hyper.delta_inf);
    const double slab = log_slab_marginal(phi.col(h), hyper.kappa1, hyper.kappa2);
    double max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index l = 0; l < H; ++l) {
      const double lw = omega[l] > 0.0 ? std::log(omega[l])
                                       : -std::numeric_limits<double>::infinity();
      logp(h, l) = lw + (l <= h ? spike : slab);
      if (logp(h, l) > max) max = logp(h, l);
    }
    if (!std::isfinite(max))
      throw std::runtime_error("no category of z has finite density (corrupted state)");
    const double lse = max + std::log((logp.row(h).array() - max).exp().sum());
    logp.row(h).array() -= lse;
  }
  return logp;
}

Eigen::VectorXi sample_z(const Eigen::MatrixXd& phi, const Eigen::VectorXd& omega,
                         const CspHyper& hyper, Rng& rng) {
  const Eigen::MatrixXd logp = z_log_probabilities(phi, omega, hyper);
  const Eigen::Index H = omega.size();
  Eigen::VectorXi z(H);
  for (Eigen::Index h = 0; h < H; ++h) {
    const double u = draw_uniform(rng);
    double acc = 0.0;
    Eigen::Index pick = H - 1;
    // Walk past trailing zero-probability categories so round-off never
    // selects one of them.
    while (pick > 0 && !(logp(h, pick) > -std::numeric_limits<double>::infinity())) --pick;
    for (Eigen::Index l = 0; l < H; ++l) {
      acc += std::exp(logp(h, l));
      if (u < acc) {
        pick = l;
        break;
      }
    }
    z[h] = static_cast<int>(pick);
  }
  return z;
}

Eigen::VectorXd sample_zeta(const Eigen::VectorXi& z, double eta, Rng& rng) {
  const Eigen::Index H = z.size();
  Eigen::VectorXd zeta(H);
  for (Eigen::Index h = 0; h + 1 < H; ++h) {
    const double at = static_cast<double>((z.array() == h).count());
    const double above = static_cast<double>((z.array() > h).count());
    double v = draw_beta(1.0 + at, eta + above, rng);
    // A Beta draw can round to exactly 0 or 1; keep zeta inside (0, 1].
    if (!(v > 0.0)) v = std::numeric_limits<double>::min();
    zeta[h] = v;
  }
  zeta[H - 1] = 1.0;
  return zeta;
}

Eigen::VectorXd sample_lambda(const Eigen::VectorXi& z, const Eigen::MatrixXd& phi,
                              const CspHyper& hyper, Rng& rng) {
  const Eigen::Index H = z.size();
  const double J = static_cast<double>(phi.rows());
  Eigen::VectorXd lambda(H);
  for (Eigen::Index h = 0; h < H; ++h) {
    if (z[h] <= h) {
      lambda[h] = hyper.delta_inf;
    } else {
      lambda[h] = draw_inverse_gamma(hyper.kappa1 + 0.5 * J,
                                     hyper.kappa2 + 0.5 * phi.col(h).squaredNorm(), rng);
    }
  }
  return lambda;
}

void update_shrinkage(CspState& state, const Eigen::MatrixXd& phi, const CspHyper& hyper,
                      Rng& rng) {
  const StickWeights w = compute_weights(state.zeta);
  state.z = sample_z(phi, w.omega, hyper, rng);
  state.zeta = sample_zeta(state.z, hyper.eta, rng);
  state.lambda = sample_lambda(state.z, phi, hyper, rng);
}

CspState sample_shrinkage_prior(Eigen::Index H, const CspHyper& hyper, Rng& rng) {
  CspState s;
  s.zeta.resize(H);
  for (Eigen::Index h = 0; h + 1 < H; ++h) {
    double v = draw_beta(1.0, hyper.eta, rng);
    if (!(v > 0.0)) v = std::numeric_limits<double>::min();
    s.zeta[h] = v;
  }
  s.zeta[H - 1] = 1.0;
  const StickWeights w = compute_weights(s.zeta);
  s.z.resize(H);
  for (Eigen::Index h = 0; h < H; ++h) {
    const double u = draw_uniform(rng);
    Eigen::Index pick = H - 1;
    for (Eigen::Index l = 0; l < H; ++l)
      if (u < w.pi[l]) {
        pick = l;
        break;
      }
    s.z[h] = static_cast<int>(pick);
  }
  s.lambda.resize(H);
  for (Eigen::Index h = 0; h < H; ++h)
    s.lambda[h] = s.z[h] <= h ? hyper.delta_inf
                              : draw_inverse_gamma(hyper.kappa1, hyper.kappa2, rng);
  return s;
}

}  // namespace bmc
