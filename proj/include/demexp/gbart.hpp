#pragma once

#include "demexp/chain.hpp"
#include "demexp/random.hpp"
#include "demexp/tree.hpp"

#include <vector>

namespace demexp {

/// Sum-of-trees prior. A node at depth d splits with probability
/// q(d) = branch_a / (1 + branch_b)^d; leaf values are Normal(0, sigma_mu^2 / T)
/// on the standardized target scale, where targets span [-0.5, 0.5].
struct BartPrior {
  int num_trees = 200;
  double branch_a = 0.95;
  double branch_b = 2.0;
  double sigma_mu = 0.5;
  /// When set, sigma_mu is random with a half-Cauchy(0, sigma_mu) prior and
  /// is resampled every sweep.
  bool sigma_mu_half_cauchy = false;

  double branch_probability(int depth) const;
  double leaf_variance() const;
  void validate() const;
};

struct GbartRunConfig {
  int iterations = 4000;
  int burn_in = 1000;
  double alpha = 1.0;
  /// false gives plain BART: beta is held at zero.
  bool linear_component = true;
  bool keep_mu_draws = false;
  /// Holds every tree at a single zero-valued leaf. Test hook for the
  /// all-empty-forest reduction.
  bool freeze_forest = false;
  /// sigma^2 ~ nu * lambda / chi^2_nu with P(sigma < sigma_hat) = sigma_quantile,
  /// sigma_hat the least-squares residual SD.
  double sigma_nu = 3.0;
  double sigma_quantile = 0.9;

  void validate() const;
};

struct PredictorRange {
  double min = 0.0;
  double max = 0.0;
};

/// Sampler state. beta, sigma and the leaf values live on the standardized
/// scale y_std = (y - y_shift) / y_scale.
struct GbartState {
  std::vector<Tree> forest;
  Vector beta;
  double sigma = 1.0;
  /// Current forest scale; leaf values are Normal(0, sigma_mu^2 / T).
  double sigma_mu = 0.5;
  double y_shift = 0.0;
  double y_scale = 1.0;
};

/// One draw from the branching-process prior. Split variables are uniform over
/// predictors with a nonzero range, cutpoints uniform over that range.
Tree sample_tree_prior(const BartPrior& prior, const std::vector<PredictorRange>& ranges,
                       Rng& rng);

/// (1 - a)^T: prior probability that every tree is a single leaf.
double prior_all_empty_probability(const BartPrior& prior);

/// Original-scale predictions y_shift + y_scale * (x^T beta + sum_t g_t(x)).
Vector forest_predict(const GbartState& state, const Matrix& x);

/// True iff every tree is a single leaf.
bool is_all_empty(const GbartState& state);

/// log of the (tempered) likelihood of `residuals` with the leaf values of
/// `tree` integrated out under Normal(0, leaf_variance) priors:
///   log int prod_i N(r_i; lambda_leaf(i), sigma^2)^alpha prod_l N(lambda_l; 0, tau^2) d lambda.
double tree_log_marginal_likelihood(const Tree& tree, const Matrix& x, const Vector& residuals,
                                    double sigma, double leaf_variance, double alpha = 1.0);

/// Proposal ratio q(reverse) / q(forward) times the split-rule prior ratio, on
/// the log scale, for a GROW move on a tree with `leaves_before` leaves that
/// leaves `prunable_after` prunable branches. The cutpoint is proposed
/// uniformly on an interval of width `cut_width`; the prior spreads it over
/// `var_range`. The matching PRUNE term is its negative.
double grow_log_proposal_ratio(int leaves_before, int prunable_after, double cut_width,
                               double var_range);

/// Bayesian backfitting sampler over one dataset. Keeps per-tree fits and
/// leaf memberships in sync with the state passed to sweep().
class GbartSampler {
 public:
  GbartSampler(RegressionData data, BartPrior prior, GbartRunConfig config);

  GbartState initial_state() const;

  /// Rebuilds the caches from an arbitrary state on this dataset.
  void attach(const GbartState& state);

  /// One sweep: GROW/PRUNE and leaf draws for each tree, then sigma_mu when it
  /// is random, then beta, then sigma.
  void sweep(GbartState& state, Rng& rng);

  /// Forest fit on the standardized scale at the design rows.
  const Vector& forest_fit() const { return forest_fit_; }

  double y_shift() const { return y_shift_; }
  double y_scale() const { return y_scale_; }
  /// Index of the all-ones column, or -1.
  Index intercept_column() const { return intercept_; }
  double sigma_prior_shape() const { return sigma_shape_; }
  double sigma_prior_scale() const { return sigma_scale_; }

 private:
  double leaf_log_ml(double n, double sum, double sigma_sq) const;
  void draw_sigma_mu(GbartState& state, Rng& rng);
  void update_tree(GbartState& state, std::size_t t, Rng& rng);
  void grow(Tree& tree, std::vector<int>& leaf_of, const Vector& resid, double sigma_sq,
            Rng& rng);
  void prune(Tree& tree, std::vector<int>& leaf_of, const Vector& resid, double sigma_sq,
             Rng& rng);
  void draw_leaves(Tree& tree, const std::vector<int>& leaf_of, const Vector& resid,
                   double sigma_sq, Rng& rng);
  void draw_beta(GbartState& state, Rng& rng);
  void draw_sigma(GbartState& state, Rng& rng);

  RegressionData data_;
  BartPrior prior_;
  GbartRunConfig config_;
  Vector y_std_;
  double y_shift_ = 0.0;
  double y_scale_ = 1.0;
  Index intercept_ = -1;
  std::vector<int> split_vars_;
  std::vector<PredictorRange> ranges_;
  Matrix ls_operator_;    // (X^T X)^{-1} X^T
  Matrix xtx_inv_chol_;   // lower Cholesky factor of (X^T X)^{-1}
  double sigma_shape_ = 0.0;
  double sigma_scale_ = 0.0;
  double leaf_var_ = 0.0;

  std::vector<Vector> tree_fit_;
  std::vector<std::vector<int>> leaf_of_;
  Vector forest_fit_;
  std::vector<int> scratch_;
};

/// One sweep from `state` with a freshly attached sampler.
GbartState gibbs_sweep(const GbartState& state, const RegressionData& data,
                       const BartPrior& prior, const GbartRunConfig& run, Rng& rng);

/// Runs the chain. Each retained draw reports beta and sigma on the original
/// scale, with the in-sample forest output centered and its mean folded into
/// the intercept coordinate, the all-empty flag, and the R^2 of the linear
/// projection of the in-sample mu draw. mu_mean is the posterior mean of mu at
/// the design rows.
McmcChain fit_gbart(const RegressionData& data, const BartPrior& prior,
                    const GbartRunConfig& run, Rng& rng);

}  // namespace demexp
