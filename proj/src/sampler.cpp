#include "bmc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bmc/parallel.hpp"

namespace bmc {

namespace {

constexpr double kLambdaFloor = 1e-300;

}  // namespace

Index effective_rank(const SamplerConfig& cfg, Index J, Index T) {
  return cfg.hyper.rank > 0 ? cfg.hyper.rank : std::min(J, T);
}

void validate(const SamplerConfig& cfg, Index J, Index T) {
  const auto& h = cfg.hyper;
  if (!(h.csp.eta > 0 && h.csp.kappa1 > 0 && h.csp.kappa2 > 0 && h.csp.delta_inf > 0))
    throw std::invalid_argument("shrinkage hyperparameters must be positive");
  if (!(h.nu1 > 0 && h.nu2 > 0)) throw std::invalid_argument("nu1 and nu2 must be positive");
  if (!(h.alpha > 0)) throw std::invalid_argument("alpha must be positive");
  if (h.rank < 0) throw std::invalid_argument("rank must be positive");
  if (effective_rank(cfg, J, T) > std::min(J, T))
    throw std::invalid_argument("rank must not exceed min(J, T) = " +
                                std::to_string(std::min(J, T)));
  const auto& c = cfg.chain;
  if (c.n_iter < 1) throw std::invalid_argument("n_iter must be positive");
  if (c.n_burn < 0 || c.n_burn >= c.n_iter)
    throw std::invalid_argument("n_burn must be nonnegative and smaller than n_iter");
  if (c.thin < 1) throw std::invalid_argument("thin must be >= 1");
  if ((c.n_iter - c.n_burn) / c.thin < 1)
    throw std::invalid_argument("no draws retained: n_iter - n_burn < thin");
  validate(cfg.gmc);
}

Design::Design(Mask mask, std::vector<Eigen::MatrixXd> covariates)
    : mask_(std::move(mask)), covariates_(std::move(covariates)) {
  for (const auto& x : covariates_)
    if (x.rows() != mask_.rows() || x.cols() != mask_.cols())
      throw std::invalid_argument("covariate dimensions do not match the mask");
  for (Index j = 0; j < mask_.rows(); ++j)
    for (Index t = 0; t < mask_.cols(); ++t)
      if (mask_(j, t) != 0) treated_.push_back({j, t});
  const Index L = n_covariates();
  gram_.resize(L, L);
  for (Index a = 0; a < L; ++a)
    for (Index b = 0; b <= a; ++b)
      gram_(a, b) = gram_(b, a) = covariates_[a].cwiseProduct(covariates_[b]).sum();
}

Design::Design(const PanelData& data) : Design(data.mask, data.covariates) {}

Eigen::MatrixXd Design::covariate_effect(const Eigen::VectorXd& beta) const {
  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(units(), periods());
  for (Index l = 0; l < n_covariates(); ++l) xi += beta[l] * covariates_[l];
  return xi;
}

Eigen::VectorXd Design::cross(const Eigen::MatrixXd& r) const {
  Eigen::VectorXd out(n_covariates());
  for (Index l = 0; l < n_covariates(); ++l) out[l] = covariates_[l].cwiseProduct(r).sum();
  return out;
}

namespace {

Eigen::MatrixXd phi_precision(const ParamState& state, PhiConditional mode) {
  const Eigen::VectorXd inv_lambda =
      state.csp.lambda.cwiseMax(kLambdaFloor).cwiseInverse();
  const double scale = mode == PhiConditional::Conjugate ? state.tau : 1.0;
  Eigen::MatrixXd p = scale * state.psi.transpose() * state.psi;
  p.diagonal() += inv_lambda;
  return p;
}

}  // namespace

Eigen::VectorXd sample_phi_row(Index j, const ParamState& state, const Eigen::MatrixXd& xi,
                               PhiConditional mode, Rng& rng) {
  const double scale = mode == PhiConditional::Conjugate ? state.tau : 1.0;
  const Eigen::VectorXd r = (state.y_complete.row(j) - xi.row(j)).transpose();
  return draw_gaussian_canonical(phi_precision(state, mode), scale * state.psi.transpose() * r,
                                 rng);
}

Eigen::MatrixXd sample_phi(const ParamState& state, const Eigen::MatrixXd& xi,
                           PhiConditional mode, Rng& rng) {
  const double scale = mode == PhiConditional::Conjugate ? state.tau : 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(phi_precision(state, mode));
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("loading precision is not positive definite");
  // H x J: column j is b_j = scale Psi^T (y_(j) - xi_(j)).
  const Eigen::MatrixXd b = scale * state.psi.transpose() * (state.y_complete - xi).transpose();
  const Eigen::MatrixXd mean = llt.solve(b);
  const Eigen::MatrixXd noise = draw_normal_matrix(mean.rows(), mean.cols(), rng);
  return (mean + llt.matrixU().solve(noise)).transpose();
}

Eigen::VectorXd sample_beta(const ParamState& state, const Design& design, double alpha,
                            Rng& rng) {
  Eigen::MatrixXd p = state.tau * design.gram();
  p.diagonal().array() += alpha;
  const Eigen::VectorXd b = state.tau * design.cross(state.y_complete - state.gamma());
  return draw_gaussian_canonical(p, b, rng);
}

double sample_tau(const ParamState& state, const Eigen::MatrixXd& xi, double nu1, double nu2,
                  Rng& rng) {
  const double n = static_cast<double>(state.y_complete.size());
  const double ss = (state.y_complete - state.gamma() - xi).squaredNorm();
  return draw_gamma(nu1 + 0.5 * n, nu2 + 0.5 * ss, rng);
}

void sample_y_miss(ParamState& state, const Design& design, const Eigen::MatrixXd& xi,
                   Rng& rng) {
  const double sd = 1.0 / std::sqrt(state.tau);
  for (const auto& c : design.treated_cells()) {
    const double mean = state.phi.row(c.unit).dot(state.psi.row(c.period)) + xi(c.unit, c.period);
    state.y_complete(c.unit, c.period) = mean + sd * draw_normal(rng);
  }
}

double log_posterior(const ParamState& state, const Design& design, const Hyperparameters& hyper) {
  const Eigen::MatrixXd xi = design.covariate_effect(state.beta);
  const double n = static_cast<double>(state.y_complete.size());
  const double ss = (state.y_complete - state.gamma() - xi).squaredNorm();
  double lp = 0.5 * n * std::log(state.tau) - 0.5 * state.tau * ss;
  lp += (hyper.nu1 - 1.0) * std::log(state.tau) - hyper.nu2 * state.tau;
  lp -= 0.5 * hyper.alpha * state.beta.squaredNorm();
  const double J = static_cast<double>(state.phi.rows());
  for (Index h = 0; h < state.phi.cols(); ++h) {
    const double lambda = std::max(state.csp.lambda[h], kLambdaFloor);
    lp -= 0.5 * J * std::log(lambda) + 0.5 * state.phi.col(h).squaredNorm() / lambda;
  }
  return lp;
}

void sweep(ParamState& state, const Design& design, const SamplerConfig& cfg, GmcTracker& gmc,
           bool adapt, Rng& rng) {
  Eigen::MatrixXd xi = design.covariate_effect(state.beta);
  sample_y_miss(state, design, xi, rng);
  state.phi = sample_phi(state, xi, cfg.phi_conditional, rng);
  update_shrinkage(state.csp, state.phi, cfg.hyper.csp, rng);

  const Eigen::MatrixXd target = state.y_complete - xi;
  PsiUpdate upd = sample_psi(target, state.phi, state.psi, state.tau, gmc.eps, cfg.gmc.n_step, rng);
  ++gmc.proposals;
  if (upd.accepted) ++gmc.accepted;
  if (upd.reorthonormalized) ++gmc.reorthonormalizations;
  state.psi = std::move(upd.psi);
  if (adapt) {
    ++gmc.adapt_iter;
    gmc.eps = adapt_step(gmc.eps, gmc.adapt_iter, upd.accepted ? 1.0 : 0.0, cfg.gmc);
  }
  if (state.psi.cols() == state.psi.rows()) {
    PsiUpdate flip = flip_column_move(target, state.phi, state.psi, state.tau, rng);
    ++gmc.flips_proposed;
    if (flip.accepted) ++gmc.flips_accepted;
    state.psi = std::move(flip.psi);
  }

  if (design.n_covariates() > 0) {
    state.beta = sample_beta(state, design, cfg.hyper.alpha, rng);
    xi = design.covariate_effect(state.beta);
  }
  state.tau = sample_tau(state, xi, cfg.hyper.nu1, cfg.hyper.nu2, rng);
}

ParamState initialize_state(const PanelData& data, const SamplerConfig& cfg, Rng& rng) {
  const Index J = data.units();
  const Index T = data.periods();
  const Index H = effective_rank(cfg, J, T);
  ParamState s;
  s.y_complete = data.outcomes;

  double grand = 0.0;
  long n_obs = 0;
  for (Index j = 0; j < J; ++j)
    for (Index t = 0; t < T; ++t)
      if (data.mask(j, t) == 0) {
        grand += data.outcomes(j, t);
        ++n_obs;
      }
  grand /= static_cast<double>(n_obs);
  double var = 0.0;
  for (Index j = 0; j < J; ++j)
    for (Index t = 0; t < T; ++t)
      if (data.mask(j, t) == 0) var += std::pow(data.outcomes(j, t) - grand, 2);
  var /= static_cast<double>(std::max<long>(n_obs - 1, 1));

  for (Index j = 0; j < J; ++j) {
    double sum = 0.0;
    int n = 0;
    for (Index t = 0; t < T; ++t)
      if (data.mask(j, t) == 0) {
        sum += data.outcomes(j, t);
        ++n;
      }
    const double fill = n > 0 ? sum / n : grand;
    for (Index t = 0; t < T; ++t)
      if (data.mask(j, t) != 0) s.y_complete(j, t) = fill;
  }

  s.phi = std::sqrt(0.1) * draw_normal_matrix(J, H, rng);
  s.psi = draw_haar_stiefel(T, H, rng);
  s.beta = Eigen::VectorXd::Zero(data.n_covariates());
  s.tau = var > 0.0 ? 1.0 / var : 1.0;

  const auto& csp = cfg.hyper.csp;
  s.csp.zeta = sample_shrinkage_prior(H, csp, rng).zeta;
  s.csp.z = Eigen::VectorXi::Constant(H, static_cast<int>(H - 1));
  // Slab draws are rescaled to the loading variance implied by the data,
  // ||Y||^2 ~ J H lambda, so the first Phi draw is not swamped by the prior
  // when outcomes are far from unit scale.
  double second_moment = 0.0;
  for (Index j = 0; j < J; ++j)
    for (Index t = 0; t < T; ++t)
      if (data.mask(j, t) == 0) second_moment += data.outcomes(j, t) * data.outcomes(j, t);
  second_moment /= static_cast<double>(n_obs);
  const double lambda_scale =
      second_moment > 0.0 ? static_cast<double>(T) * second_moment / static_cast<double>(H) : 1.0;
  s.csp.lambda.resize(H);
  for (Index h = 0; h < H; ++h)
    s.csp.lambda[h] = s.csp.spike(h)
                          ? csp.delta_inf
                          : lambda_scale * draw_inverse_gamma(csp.kappa1, csp.kappa2, rng);
  return s;
}

ParamState sample_prior_state(const Design& design, const Hyperparameters& hyper, Index rank,
                              Rng& rng) {
  const Index J = design.units();
  const Index T = design.periods();
  ParamState s;
  s.csp = sample_shrinkage_prior(rank, hyper.csp, rng);
  s.phi.resize(J, rank);
  for (Index h = 0; h < rank; ++h)
    s.phi.col(h) = std::sqrt(s.csp.lambda[h]) * draw_normal_vector(J, rng);
  s.psi = draw_haar_stiefel(T, rank, rng);
  s.beta = draw_normal_vector(design.n_covariates(), rng) / std::sqrt(hyper.alpha);
  s.tau = draw_gamma(hyper.nu1, hyper.nu2, rng);
  s.y_complete.resize(J, T);
  draw_outcomes(s, design, rng);
  return s;
}

void draw_outcomes(ParamState& state, const Design& design, Rng& rng, bool untreated_only) {
  const Eigen::MatrixXd mean = state.gamma() + design.covariate_effect(state.beta);
  const double sd = 1.0 / std::sqrt(state.tau);
  for (Index t = 0; t < mean.cols(); ++t)
    for (Index j = 0; j < mean.rows(); ++j) {
      const double y = mean(j, t) + sd * draw_normal(rng);
      if (!untreated_only || design.mask()(j, t) == 0) state.y_complete(j, t) = y;
    }
}

namespace {

bool finite_state(const ParamState& s) {
  return std::isfinite(s.tau) && s.phi.allFinite() && s.psi.allFinite() && s.beta.allFinite() &&
         s.y_complete.allFinite() && s.csp.lambda.allFinite();
}

}  // namespace

PosteriorDraws run_mcmc(const PanelData& data, const SamplerConfig& cfg) {
  Rng rng = make_rng(cfg.chain.seed);
  return run_mcmc(data, cfg, rng);
}

PosteriorDraws run_mcmc(const PanelData& data, const SamplerConfig& cfg, Rng& rng) {
  require_valid(data);
  const Index J = data.units();
  const Index T = data.periods();
  validate(cfg, J, T);
  const Design design(data);
  const Index H = effective_rank(cfg, J, T);
  const Index L = data.n_covariates();
  const auto& chain = cfg.chain;
  const long n_post = (chain.n_iter - chain.n_burn) / chain.thin;
  const Index min_jt = std::min(J, T);

  PosteriorDraws out;
  out.rank = H;
  out.treated_cells = design.treated_cells();
  const Index n_miss = static_cast<Index>(out.treated_cells.size());
  out.y_miss.resize(n_post, n_miss);
  out.beta.resize(n_post, L);
  out.tau.resize(n_post);
  out.gamma_eig = Eigen::MatrixXd::Zero(n_post, min_jt);
  out.log_posterior.resize(n_post);
  if (cfg.keep_phi) out.phi.reserve(static_cast<std::size_t>(n_post));

  ParamState state = initialize_state(data, cfg, rng);
  GmcTracker gmc;
  gmc.eps = cfg.gmc.step;
  long burn_accepted = 0;
  long kept = 0;
  for (long it = 0; it < chain.n_iter; ++it) {
    const bool burning = it < chain.n_burn;
    if (it == chain.n_burn) {
      burn_accepted = gmc.accepted;
      gmc.accepted = 0;
      gmc.proposals = 0;
    }
    sweep(state, design, cfg, gmc, burning && cfg.adapt, rng);
    if (!finite_state(state)) throw NonFiniteStateError(it + 1);
    if (burning || (it - chain.n_burn + 1) % chain.thin != 0) continue;
    if (kept >= n_post) break;

    for (Index c = 0; c < n_miss; ++c) {
      const Cell cell = out.treated_cells[static_cast<std::size_t>(c)];
      out.y_miss(kept, c) = state.y_complete(cell.unit, cell.period);
    }
    out.beta.row(kept) = state.beta.transpose();
    out.tau[kept] = state.tau;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(state.phi);
    const Eigen::VectorXd sv = svd.singularValues();  // descending
    out.gamma_eig.row(kept).head(sv.size()) = sv.transpose();
    out.log_posterior[kept] = log_posterior(state, design, cfg.hyper);
    if (!std::isfinite(out.log_posterior[kept]) || !out.gamma_eig.row(kept).allFinite())
      throw NonFiniteStateError(it + 1);
    if (cfg.keep_phi) out.phi.push_back(state.phi);
    ++kept;
  }
  out.burn_accept_rate =
      chain.n_burn > 0 ? static_cast<double>(burn_accepted) / chain.n_burn : 0.0;
  out.accept_rate =
      gmc.proposals > 0 ? static_cast<double>(gmc.accepted) / gmc.proposals : 0.0;
  out.eps_final = gmc.eps;
  out.reorthonormalizations = gmc.reorthonormalizations;
  return out;
}

std::vector<PosteriorDraws> run_chains(const PanelData& data, const SamplerConfig& cfg,
                                       std::size_t n_chains, unsigned threads) {
  std::vector<PosteriorDraws> out(n_chains);
  parallel_for(
      n_chains,
      [&](std::size_t c) {
        Rng rng = make_rng(cfg.chain.seed, {static_cast<std::uint64_t>(c)});
        out[c] = run_mcmc(data, cfg, rng);
      },
      threads);
  return out;
}

}  // namespace bmc
