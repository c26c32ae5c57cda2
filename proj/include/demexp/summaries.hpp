#pragma once

#include "demexp/linalg.hpp"
#include "demexp/tree.hpp"

#include <vector>

namespace demexp {

/// Least-squares projection of a fitted function onto the columns of X.
struct ProjectionSummary {
  Vector beta_star;
  double r_squared = 0.0;  // 1 - sse / sum_i (mu_i - mean(mu))^2
  double sse = 0.0;        // sum_i (mu_i - x_i^T beta_star)^2
};

/// Requires N > P and X of full column rank. A constant mu has no variation
/// to explain and raises InvalidArgument.
ProjectionSummary linear_projection(const Vector& mu, const Matrix& x);

/// Both summaries of a posterior over mu: one per draw (rows of `mu_draws`)
/// and one of the posterior mean function.
struct PosteriorProjection {
  std::vector<ProjectionSummary> per_draw;
  ProjectionSummary of_mean;
};

PosteriorProjection project_posterior(const Matrix& mu_draws, const Vector& mu_mean,
                                      const Matrix& x);

/// sum_i KL(Bernoulli(p_i) || Bernoulli(logistic(x_i^T beta))) and its gradient
/// sum_i (logistic(x_i^T beta) - p_i) x_i.
double logistic_kl(const Vector& p, const Matrix& x, const Vector& beta);
Vector logistic_kl_gradient(const Vector& p, const Matrix& x, const Vector& beta);

/// Damped Newton on logistic_kl. Returns once the gradient sup-norm drops
/// below `tol`. Throws ConvergenceError carrying the last iterate when
/// max_iter is exhausted or the iterate sup-norm exceeds `max_norm`.
Vector kl_projection_logistic(const Vector& p, const Matrix& x, double tol = 1e-10,
                              int max_iter = 100, double max_norm = 1e6);

struct CartSummary {
  Tree tree;
  int depth_limit = 3;
  int min_leaf = 10;
  double sse_root = 0.0;  // squared error around the overall mean
  double sse_fit = 0.0;   // squared error around the leaf means
};

/// Greedy least-squares regression tree. Candidate cuts are midpoints between
/// consecutive distinct values of each predictor; a split is kept only if it
/// strictly lowers the squared error and leaves min_leaf rows on each side.
/// Ties go to the lower column index, then the lower cut.
CartSummary cart_residual_fit(const Vector& residuals, const Matrix& x, int depth_limit = 3,
                              int min_leaf = 10);

}  // namespace demexp
