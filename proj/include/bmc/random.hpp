#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace bmc {

using Rng = std::mt19937_64;

// Generator seeded from a base seed plus stream identifiers (replication,
// method, chain...). Distinct streams give statistically independent chains.
Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {});

double draw_normal(Rng& rng);
double draw_uniform(Rng& rng);

// Gamma with shape/rate parameterization.
double draw_gamma(double shape, double rate, Rng& rng);
// Inverse gamma with shape/rate: 1/X with X ~ Gamma(shape, rate).
double draw_inverse_gamma(double shape, double rate, Rng& rng);
double draw_beta(double a, double b, Rng& rng);

Eigen::MatrixXd draw_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);
Eigen::VectorXd draw_normal_vector(Eigen::Index n, Rng& rng);

// Draw from N(P^{-1} b, P^{-1}) given the precision P and b, through one
// Cholesky factorization. Throws if P is not positive definite.
Eigen::VectorXd draw_gaussian_canonical(const Eigen::MatrixXd& precision,
                                        const Eigen::VectorXd& b, Rng& rng);

}  // namespace bmc
