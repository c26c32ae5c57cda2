#pragma once

#include "demexp/linalg.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace demexp {

using Rng = std::mt19937_64;

/// Hierarchical seed derivation: FNV-1a over `stream_id`, mixed with the
/// master seed and the replication counter through two SplitMix64 rounds.
/// Depends only on its arguments, never on execution order.
std::uint64_t split_seed(std::uint64_t master_seed, std::string_view stream_id,
                         std::uint64_t counter);

std::uint64_t splitmix64(std::uint64_t x);

double standard_normal(Rng& rng);
double uniform01(Rng& rng);
Vector standard_normal_vector(Rng& rng, Index n);

/// Draw from InvGam(shape, scale), density proportional to x^{-shape-1} e^{-scale/x}.
double inverse_gamma(Rng& rng, double shape, double scale);

/// Log density of InvGam(shape, scale) at x > 0.
double inverse_gamma_log_pdf(double x, double shape, double scale);

/// Draw from Normal(mean, covariance) given a Cholesky factor of the covariance.
Vector multivariate_normal(Rng& rng, const Vector& mean, const CholeskyFactor& cov_factor);

}  // namespace demexp
