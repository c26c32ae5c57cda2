#pragma once

#include "demexp/kernels.hpp"
#include "demexp/random.hpp"

#include <utility>

namespace demexp {

/// Finite-dimensional Gaussian law.
struct GaussianLaw {
  Vector mean;
  Matrix covariance;

  Index dim() const { return mean.size(); }
  double variance(Index i) const { return covariance(i, i); }

  /// `count` draws, one per row. Covariance eigenvalues below N eps times the
  /// largest are round-off and count as zero.
  Matrix sample(Rng& rng, Index count) const;
};

/// `count` draws of a zero-mean GP with kernel `spec` at the rows of `x`, one
/// per row. Projected kernels are sampled as base draws minus their
/// least-squares image, so in-sample draws stay orthogonal to the anchor
/// design to solve precision.
Matrix sample_prior(const KernelSpec& spec, const Matrix& x, Rng& rng, Index count);

/// Conjugate GP regression with a known noise scale and a fractional
/// likelihood exponent alpha in (0, 1]. The tempered Gaussian likelihood is a
/// Gaussian likelihood with variance noise_sd^2 / alpha.
struct GpFit {
  KernelSpec kernel;
  Matrix design;
  Vector targets;
  double noise_sd = 1.0;
  double alpha = 1.0;

  void validate() const;
  double effective_noise_variance() const { return noise_sd * noise_sd / alpha; }
};

/// Law of (mu(X_1), ..., mu(X_N)): mean K (K + vI)^{-1} Y, covariance
/// K - K (K + vI)^{-1} K with v = noise_sd^2 / alpha.
GaussianLaw posterior_at_design(const GpFit& fit);

/// Law of the least-squares projection beta* = (X^T X)^{-1} X^T mu.
GaussianLaw posterior_projection(const GpFit& fit);

/// Predictive law of mu at new inputs (latent function, no observation noise).
GaussianLaw predict(const GpFit& fit, const Matrix& x_new);

/// Equal-tailed interval mean +/- z_{(1+level)/2} sd for one coordinate.
std::pair<double, double> credible_interval(const GaussianLaw& law, Index index, double level);

/// Standard normal quantile.
double normal_quantile(double p);

}  // namespace demexp
