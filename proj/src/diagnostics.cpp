#include "bmc/diagnostics.hpp"

#include <cmath>
#include <numeric>
#include <vector>

namespace bmc {

double spectral_density_zero(std::span<const double> x) {
  const std::size_t n = x.size();
  const std::size_t batches = static_cast<std::size_t>(std::floor(std::sqrt(double(n))));
  if (batches < 2) throw std::invalid_argument("series too short for batch means");
  const std::size_t size = n / batches;
  // Leading samples that do not fill a batch are dropped.
  const std::size_t offset = n - batches * size;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    const auto first = x.begin() + static_cast<std::ptrdiff_t>(offset + b * size);
    means[b] = std::accumulate(first, first + static_cast<std::ptrdiff_t>(size), 0.0) / size;
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / batches;
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  return static_cast<double>(size) * ss / static_cast<double>(batches - 1);
}

namespace {

bool constant(std::span<const double> x) {
  for (double v : x)
    if (v != x.front()) return false;
  return true;
}

}  // namespace

double geweke_diagnostic(std::span<const double> chain, double frac_a, double frac_b) {
  if (!(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0))
    throw std::invalid_argument("Geweke fractions must be positive and sum to at most 1");
  const std::size_t n = chain.size();
  if (n < 100) throw std::invalid_argument("Geweke diagnostic needs at least 100 draws");
  const std::size_t na = static_cast<std::size_t>(std::floor(frac_a * n));
  const std::size_t nb = static_cast<std::size_t>(std::floor(frac_b * n));
  const auto a = chain.first(na);
  const auto b = chain.last(nb);
  if (constant(a) || constant(b)) throw DegenerateChainError();
  const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / na;
  const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / nb;
  const double var = spectral_density_zero(a) / na + spectral_density_zero(b) / nb;
  if (!(var > 0.0)) throw DegenerateChainError();
  return (mean_a - mean_b) / std::sqrt(var);
}

}  // namespace bmc
