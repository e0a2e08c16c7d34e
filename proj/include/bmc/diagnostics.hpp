#pragma once

#include <span>
#include <stdexcept>

namespace bmc {

class DegenerateChainError : public std::invalid_argument {
 public:
  DegenerateChainError() : std::invalid_argument("degenerate chain") {}
};

// Spectral density at frequency zero of a stationary series, estimated by
// nonoverlapping batch means with floor(sqrt(n)) batches. Returns S such that
// Var(mean) ~ S / n.
double spectral_density_zero(std::span<const double> x);

// Geweke z-score comparing the first `frac_a` and last `frac_b` of the chain:
//   (mean_A - mean_B) / sqrt(S_A / n_A + S_B / n_B).
// Throws DegenerateChainError when either segment has zero variance.
double geweke_diagnostic(std::span<const double> chain, double frac_a = 0.1,
                         double frac_b = 0.5);

inline constexpr double kGewekeCritical = 1.959963984540054;  // two-sided 5%

}  // namespace bmc
