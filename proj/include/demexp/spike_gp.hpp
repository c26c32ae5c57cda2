#pragma once

#include "demexp/chain.hpp"
#include "demexp/random.hpp"

#include <array>
#include <cstdint>

namespace demexp {

/// Priors and chain settings for the spike-and-GP regression
///
///   Y = X beta + r(X) + eps,  r | sigma_mu^2, rho ~ GP(0, sigma_mu^2 k_rho),
///   sigma_mu^2 ~ p0 delta_0 + (1 - p0) InvGam(a_sigma_mu, b_sigma_mu),
///   rho ~ InvGam(a_rho, b_rho),  sigma^2 ~ InvGam(a_sigma, b_sigma),
///   beta flat,
///
/// with k_rho(x, x') = exp(-rho |x - x'|^2), optionally orthogonalized
/// against the design. The likelihood is raised to the power alpha.
struct SpikeGpConfig {
  double p0 = 0.5;
  double a_sigma_mu = 1.0;
  double b_sigma_mu = 1.0;
  double a_rho = 1.0;
  double b_rho = 1.0;
  double a_sigma = 1.0;
  double b_sigma = 1.0;
  double alpha = 1.0;
  int iterations = 4000;
  int burn_in = 1000;
  double proposal_sd = 0.5;
  bool orthogonalize = true;

  void validate() const;
};

struct SpikeGpState {
  bool included = false;
  double sigma_mu_sq = 0.0;
  double rho = 0.5;
  Vector beta;
  double sigma_sq = 1.0;
};

/// alpha * log Normal(Y; X beta, sigma_mu^2 K_rho + sigma^2 I), with r
/// integrated out. `orthogonalize` selects the projected kernel.
double marginal_log_likelihood(const RegressionData& data, const SpikeGpState& state,
                               double alpha, bool orthogonalize = true);

/// Holds the data-dependent caches (pairwise distances, the most recently used
/// kernel matrices and Cholesky factors) for repeated sweeps over one dataset.
class SpikeGpSampler {
 public:
  SpikeGpSampler(RegressionData data, SpikeGpConfig config);

  /// included = false, beta = least squares, sigma^2 = residual variance.
  SpikeGpState initial_state() const;

  /// One sweep: model jump, slab random walks on sigma_mu^2 and rho, beta
  /// from its Gaussian conditional, then sigma^2.
  void step(SpikeGpState& state, Rng& rng);

  /// Tempered marginal log-likelihood at `state`, using the caches.
  double log_likelihood(const SpikeGpState& state);

  /// E[X beta + r(X) | Y, state] at the design rows.
  Vector conditional_mean_function(const SpikeGpState& state);

  const RegressionData& data() const { return data_; }
  const SpikeGpConfig& config() const { return config_; }

 private:
  struct KernelSlot {
    std::uint64_t used = 0;
    double rho = -1.0;
    Matrix k;
  };
  struct FactorSlot {
    std::uint64_t used = 0;
    double rho = -1.0;
    double sigma_mu_sq = -1.0;
    double sigma_sq = -1.0;
    CholeskyFactor factor;
  };

  const Matrix& kernel_for(double rho);
  const CholeskyFactor& factor_for(double rho, double sigma_mu_sq, double sigma_sq);

  void jump_move(SpikeGpState& state, Rng& rng);
  void slab_moves(SpikeGpState& state, Rng& rng);
  void draw_beta(SpikeGpState& state, Rng& rng);
  void draw_sigma_sq(SpikeGpState& state, Rng& rng);

  double log_prior_sigma_mu_sq(double v) const;
  double log_prior_rho(double v) const;

  RegressionData data_;
  SpikeGpConfig config_;
  Matrix sq_dist_;
  Matrix xtx_inv_;
  std::array<KernelSlot, 2> kernels_;
  std::array<FactorSlot, 3> factors_;
  std::uint64_t tick_ = 0;
};

/// One sweep from `state`. Builds a fresh sampler; prefer SpikeGpSampler for
/// repeated sweeps.
SpikeGpState mcmc_step(const SpikeGpState& state, const RegressionData& data,
                       const SpikeGpConfig& config, Rng& rng);

/// iterations - burn_in retained draws. With an empty dataset the likelihood
/// is identically one and the chain targets the prior. Tracks the posterior
/// mean of mu at the design rows when data are present.
McmcChain run_chain(const RegressionData& data, const SpikeGpConfig& config, Rng& rng);

/// Fraction of retained draws with r != 0.
double inclusion_probability(const McmcChain& chain);

}  // namespace demexp
