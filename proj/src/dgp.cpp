#include "bmc/dgp.hpp"

#include <stdexcept>

namespace bmc {

std::string to_string(DgpKind kind) {
  switch (kind) {
    case DgpKind::Independent: return "independent";
    case DgpKind::Dependent: return "dependent";
    case DgpKind::Weighted: return "weighted";
  }
  return "unknown";
}

DgpKind parse_dgp_kind(const std::string& name) {
  if (name == "independent") return DgpKind::Independent;
  if (name == "dependent") return DgpKind::Dependent;
  if (name == "weighted") return DgpKind::Weighted;
  throw std::invalid_argument("unknown DGP kind '" + name +
                              "' (expected independent, dependent or weighted)");
}

void validate(const DgpSpec& spec) {
  if (spec.units < 2) throw std::invalid_argument("DGP needs at least 2 units");
  if (spec.pre < 2) throw std::invalid_argument("DGP needs at least 2 pretreatment periods");
  if (spec.post < 1) throw std::invalid_argument("DGP needs at least 1 treated period");
  if (!(spec.noise_var > 0.0)) throw std::invalid_argument("noise variance must be positive");
  if (spec.kind == DgpKind::Weighted && spec.units != 10 && spec.units != 40)
    throw std::invalid_argument(
        "weighted DGP requires J in {10, 40}: its control means mu are defined only for "
        "J = 10 and J = 40");
}

namespace {

SyntheticPanel assemble(const DgpSpec& spec, Eigen::MatrixXd truth) {
  const Index J = truth.rows();
  const Index T = truth.cols();
  SyntheticPanel out;
  TreatmentSpec ts;
  ts.kind = TreatmentSpec::Kind::SingleUnitBlock;
  ts.treated_units = {J - 1};
  ts.start_period = spec.pre;
  out.panel.mask = build_mask(ts, J, T);
  out.panel.outcomes = truth;
  out.panel.outcomes.row(J - 1).tail(spec.post).array() += spec.atet;
  out.panel.unit_labels = numbered_labels(J);
  out.panel.period_labels = numbered_labels(T);
  out.truth = std::move(truth);
  return out;
}

SyntheticPanel factor_panel(const DgpSpec& spec, const std::array<double, 3>& ar, Rng& rng) {
  validate(spec);
  const Index J = spec.units;
  const Index T = spec.periods();
  const Eigen::MatrixXd loadings = draw_normal_matrix(J, 3, rng);
  Eigen::MatrixXd factors = draw_normal_matrix(T, 3, rng);  // innovations
  for (Index t = 1; t < T; ++t)
    for (Index k = 0; k < 3; ++k) factors(t, k) += ar[static_cast<std::size_t>(k)] * factors(t - 1, k);
  const Eigen::MatrixXd noise = draw_normal_matrix(J, T, rng);
  SyntheticPanel out = assemble(spec, loadings * factors.transpose() + noise);
  out.loadings = loadings;
  out.factors = factors;
  return out;
}

}  // namespace

SyntheticPanel gen_independent(const DgpSpec& spec, Rng& rng) {
  if (spec.kind != DgpKind::Independent) throw std::invalid_argument("spec kind is not independent");
  return factor_panel(spec, {0.0, 0.0, 0.0}, rng);
}

SyntheticPanel gen_dependent(const DgpSpec& spec, Rng& rng) {
  if (spec.kind != DgpKind::Dependent) throw std::invalid_argument("spec kind is not dependent");
  return factor_panel(spec, spec.ar.value_or(kDependentAr), rng);
}

Eigen::VectorXd weighted_dgp_mean(Index J) {
  Eigen::VectorXd mu(J - 1);
  if (J == 10) {
    mu << 10, 20, 30, 40, 15, 15, 15, 15, 15;
  } else if (J == 40) {
    mu.head(4) << 10, 20, 30, 40;
    mu.segment(4, 6).setConstant(15);   // units 5..10
    mu.segment(10, 10).setConstant(25); // 11..20
    mu.segment(20, 10).setConstant(35); // 21..30
    mu.segment(30, 9).setConstant(45);  // 31..39
  } else {
    throw std::invalid_argument("weighted DGP means are defined only for J = 10 and J = 40");
  }
  return mu;
}

SyntheticPanel gen_weighted(const DgpSpec& spec, Rng& rng) {
  if (spec.kind != DgpKind::Weighted) throw std::invalid_argument("spec kind is not weighted");
  validate(spec);
  const Index J = spec.units;
  const Index T = spec.periods();
  const Index n = J - 1;
  const Eigen::VectorXd mu = weighted_dgp_mean(J);
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(n, n, 0.5);
  sigma.diagonal().setConstant(10.0);
  const Eigen::MatrixXd chol = sigma.llt().matrixL();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  alpha.head(3) << 3, 2, 1;

  Eigen::MatrixXd truth(J, T);
  truth.topRows(n) = (chol * draw_normal_matrix(n, T, rng)).colwise() + mu;
  const Eigen::VectorXd u = std::sqrt(spec.noise_var) * draw_normal_vector(T, rng);
  truth.row(J - 1) = alpha.transpose() * truth.topRows(n) + u.transpose();
  return assemble(spec, std::move(truth));
}

SyntheticPanel generate(const DgpSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case DgpKind::Independent: return gen_independent(spec, rng);
    case DgpKind::Dependent: return gen_dependent(spec, rng);
    case DgpKind::Weighted: return gen_weighted(spec, rng);
  }
  throw std::invalid_argument("unknown DGP kind");
}

SyntheticPanel generate(const DgpSpec& spec) {
  Rng rng = make_rng(spec.seed);
  return generate(spec, rng);
}

}  // namespace bmc
