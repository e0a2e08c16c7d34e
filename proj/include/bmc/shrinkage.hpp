#pragma once

#include <Eigen/Dense>

#include "bmc/random.hpp"

namespace bmc {

// Cumulative shrinkage process prior on the column variances of the loading
// matrix. lambda[h] is the VARIANCE of phi(j, h). Indicators z are stored
// 0-based; column h is in the spike iff z[h] <= h.
struct CspHyper {
  double eta = 5.0;
  double kappa1 = 2.0;
  double kappa2 = 2.0;
  double delta_inf = 0.01;
};

struct CspState {
  Eigen::VectorXd zeta;   // stick proportions, zeta[H-1] == 1
  Eigen::VectorXi z;      // 0-based categories in [0, H)
  Eigen::VectorXd lambda; // column variances

  Eigen::Index rank() const { return zeta.size(); }
  bool spike(Eigen::Index h) const { return z[h] <= h; }
};

struct StickWeights {
  Eigen::VectorXd omega;  // omega[l] = zeta[l] * prod_{m<l} (1 - zeta[m])
  Eigen::VectorXd pi;     // cumulative sums of omega
};

StickWeights compute_weights(const Eigen::VectorXd& zeta);

// log N(x | 0, delta I)
double log_spike_density(const Eigen::Ref<const Eigen::VectorXd>& x, double delta);
// log t_{2 kappa1}(x | 0, (kappa2 / kappa1) I): the slab N(0, lambda I) with
// lambda ~ IG(kappa1, kappa2) integrated out.
double log_slab_marginal(const Eigen::Ref<const Eigen::VectorXd>& x, double kappa1, double kappa2);

// Normalized log probabilities: entry (h, l) = log P(z[h] = l | phi column h).
Eigen::MatrixXd z_log_probabilities(const Eigen::MatrixXd& phi, const Eigen::VectorXd& omega,
                                    const CspHyper& hyper);

Eigen::VectorXi sample_z(const Eigen::MatrixXd& phi, const Eigen::VectorXd& omega,
                         const CspHyper& hyper, Rng& rng);
Eigen::VectorXd sample_zeta(const Eigen::VectorXi& z, double eta, Rng& rng);
Eigen::VectorXd sample_lambda(const Eigen::VectorXi& z, const Eigen::MatrixXd& phi,
                              const CspHyper& hyper, Rng& rng);

// Joint update of (z, zeta, lambda) given the loadings, in that order.
void update_shrinkage(CspState& state, const Eigen::MatrixXd& phi, const CspHyper& hyper,
                      Rng& rng);

CspState sample_shrinkage_prior(Eigen::Index H, const CspHyper& hyper, Rng& rng);

}  // namespace bmc
