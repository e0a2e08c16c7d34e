#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "bmc/panel.hpp"
#include "bmc/random.hpp"
#include "bmc/shrinkage.hpp"
#include "bmc/stiefel.hpp"

namespace bmc {

struct Hyperparameters {
  CspHyper csp;
  double nu1 = 0.001;    // gamma shape of the error precision prior
  double nu2 = 0.001;    // gamma rate of the error precision prior
  double alpha = 0.001;  // prior precision of the covariate coefficients
  Index rank = 0;        // H; 0 selects min(J, T)
};

struct ChainConfig {
  long n_iter = 3000;
  long n_burn = 1000;
  long thin = 1;
  std::uint64_t seed = 1;
};

// Conjugate: precision Lambda^{-1} + tau Psi^T Psi, mean tau P^{-1} Psi^T r.
// AppendixLiteral: the same formulas without tau, for replication studies.
enum class PhiConditional { Conjugate, AppendixLiteral };

struct SamplerConfig {
  Hyperparameters hyper;
  ChainConfig chain;
  GmcConfig gmc;
  PhiConditional phi_conditional = PhiConditional::Conjugate;
  bool keep_phi = false;  // retain Phi per draw (needed for loading summaries)
  bool adapt = true;      // adapt the GMC step during burn-in
};

// Throws std::invalid_argument on any inconsistency with a J x T panel.
void validate(const SamplerConfig& cfg, Index J, Index T);
Index effective_rank(const SamplerConfig& cfg, Index J, Index T);

// Mask and covariates with the cross products used by the beta block.
class Design {
 public:
  Design(Mask mask, std::vector<Eigen::MatrixXd> covariates);
  explicit Design(const PanelData& data);

  Index units() const { return mask_.rows(); }
  Index periods() const { return mask_.cols(); }
  Index n_covariates() const { return static_cast<Index>(covariates_.size()); }
  const Mask& mask() const { return mask_; }
  const std::vector<Cell>& treated_cells() const { return treated_; }
  const std::vector<Eigen::MatrixXd>& covariates() const { return covariates_; }

  // Xi with xi(j, t) = x(j, t)^T beta
  Eigen::MatrixXd covariate_effect(const Eigen::VectorXd& beta) const;
  // X^T X with X stacked unit-major (X_1; ...; X_J)
  const Eigen::MatrixXd& gram() const { return gram_; }
  // X^T vec(r), vec unit-major to match the stacking of X
  Eigen::VectorXd cross(const Eigen::MatrixXd& r) const;

 private:
  Mask mask_;
  std::vector<Eigen::MatrixXd> covariates_;
  std::vector<Cell> treated_;
  Eigen::MatrixXd gram_;
};

struct ParamState {
  Eigen::MatrixXd phi;         // J x H loadings
  Eigen::MatrixXd psi;         // T x H, orthonormal columns
  Eigen::VectorXd beta;        // L
  double tau = 1.0;            // error precision
  CspState csp;
  Eigen::MatrixXd y_complete;  // observed at untreated cells, imputed at treated cells

  Eigen::MatrixXd gamma() const { return phi * psi.transpose(); }
};

Eigen::VectorXd sample_phi_row(Index j, const ParamState& state, const Eigen::MatrixXd& xi,
                               PhiConditional mode, Rng& rng);
// All rows; the precision is shared, so it is factored once.
Eigen::MatrixXd sample_phi(const ParamState& state, const Eigen::MatrixXd& xi,
                           PhiConditional mode, Rng& rng);
Eigen::VectorXd sample_beta(const ParamState& state, const Design& design, double alpha,
                            Rng& rng);
double sample_tau(const ParamState& state, const Eigen::MatrixXd& xi, double nu1, double nu2,
                  Rng& rng);
void sample_y_miss(ParamState& state, const Design& design, const Eigen::MatrixXd& xi,
                   Rng& rng);

// Unnormalized log joint: complete-data likelihood plus the priors of tau,
// beta and Phi | lambda. The discrete shrinkage terms are left out.
double log_posterior(const ParamState& state, const Design& design, const Hyperparameters& hyper);

struct GmcTracker {
  double eps = 0.01;
  long adapt_iter = 0;
  long proposals = 0;
  long accepted = 0;
  long reorthonormalizations = 0;
  long flips_proposed = 0;
  long flips_accepted = 0;
};

// One Gibbs sweep in fixed order: Y^miss, Phi rows, (z, zeta, lambda), Psi,
// beta (when L > 0), tau. When `adapt` is true the GMC step is tuned after
// the Psi update.
void sweep(ParamState& state, const Design& design, const SamplerConfig& cfg, GmcTracker& gmc,
           bool adapt, Rng& rng);

// Dispersed start: unit means at treated cells, small Gaussian loadings, Haar
// Psi, zero beta, tau = 1 / var(observed), shrinkage from the prior with every
// indicator in the slab position. Slab variances are rescaled by
// T * mean(y^2) / H so that the start matches the scale of the data.
ParamState initialize_state(const PanelData& data, const SamplerConfig& cfg, Rng& rng);

// Joint prior draw of the parameters followed by a draw of every cell of
// y_complete from the likelihood.
ParamState sample_prior_state(const Design& design, const Hyperparameters& hyper, Index rank,
                              Rng& rng);
// Redraws y_complete at every cell (mask ignored) from the likelihood.
void draw_outcomes(ParamState& state, const Design& design, Rng& rng,
                   bool untreated_only = false);

struct PosteriorDraws {
  std::vector<Cell> treated_cells;       // column order of y_miss
  Eigen::MatrixXd y_miss;                // N_post x |I1|
  Eigen::MatrixXd beta;                  // N_post x L
  Eigen::VectorXd tau;                   // N_post
  Eigen::MatrixXd gamma_eig;             // N_post x min(J, T), descending
  std::vector<Eigen::MatrixXd> phi;      // N_post of J x H when retained
  Eigen::VectorXd log_posterior;         // N_post
  double accept_rate = 0.0;              // GMC acceptance over retained sweeps
  double burn_accept_rate = 0.0;
  double eps_final = 0.0;
  long reorthonormalizations = 0;
  Index rank = 0;

  Index n_draws() const { return tau.size(); }
};

class NonFiniteStateError : public std::runtime_error {
 public:
  explicit NonFiniteStateError(long iteration)
      : std::runtime_error("non-finite sampler state at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

// Seeded from cfg.chain.seed.
PosteriorDraws run_mcmc(const PanelData& data, const SamplerConfig& cfg);
PosteriorDraws run_mcmc(const PanelData& data, const SamplerConfig& cfg, Rng& rng);

// Independent chains run concurrently; chain c is seeded by (seed, c) and the
// result vector is ordered by c.
std::vector<PosteriorDraws> run_chains(const PanelData& data, const SamplerConfig& cfg,
                                       std::size_t n_chains, unsigned threads = 0);

}  // namespace bmc
