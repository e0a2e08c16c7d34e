#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "bmc/panel.hpp"
#include "bmc/random.hpp"

namespace bmc {

enum class DgpKind { Independent, Dependent, Weighted };

std::string to_string(DgpKind kind);
DgpKind parse_dgp_kind(const std::string& name);

struct DgpSpec {
  DgpKind kind = DgpKind::Independent;
  Index units = 5;       // J
  Index pre = 10;        // T0
  Index post = 20;       // T1
  double atet = 0.0;
  std::uint64_t seed = 1;
  double noise_var = 1.0;                   // weighted: variance of the treated unit's noise
  std::optional<std::array<double, 3>> ar;  // dependent: overrides (0.6, 0.4, 0.2)

  Index periods() const { return pre + post; }
};

void validate(const DgpSpec& spec);

// The last unit is treated in the last `post` periods; outcomes there equal
// truth + atet, and truth elsewhere.
struct SyntheticPanel {
  PanelData panel;
  Eigen::MatrixXd truth;    // untreated outcomes y(0) at every cell
  Eigen::MatrixXd loadings; // J x 3 (factor DGPs only)
  Eigen::MatrixXd factors;  // T x 3 (factor DGPs only)
};

inline constexpr std::array<double, 3> kDependentAr{0.6, 0.4, 0.2};

// y_t = Phi psi_t + u_t with three i.i.d. standard normal factors.
SyntheticPanel gen_independent(const DgpSpec& spec, Rng& rng);
// As gen_independent, factors AR(1) with coefficients 0.6, 0.4, 0.2 started
// at psi_1 = eps_1.
SyntheticPanel gen_dependent(const DgpSpec& spec, Rng& rng);
// Controls i.i.d. N(mu, Sigma) over t; the last unit is 3 y_1 + 2 y_2 + y_3 + u.
// mu is defined for J = 10 and J = 40 only.
SyntheticPanel gen_weighted(const DgpSpec& spec, Rng& rng);

SyntheticPanel generate(const DgpSpec& spec, Rng& rng);
// Seeded from spec.seed.
SyntheticPanel generate(const DgpSpec& spec);

// Control-unit means of the weighted design (length J - 1).
Eigen::VectorXd weighted_dgp_mean(Index J);

}  // namespace bmc
