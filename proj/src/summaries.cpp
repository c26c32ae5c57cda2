#include "demexp/summaries.hpp"

#include "demexp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace demexp {

namespace {

void check_projection_shape(Index n, const Matrix& x) {
  if (x.rows() != n) {
    throw DimensionError("mu has " + std::to_string(n) + " entries but the design has " +
                         std::to_string(x.rows()) + " rows");
  }
  if (n <= x.cols()) {
    throw InvalidArgument("linear projection needs more rows than columns");
  }
}

ProjectionSummary project_with(const Vector& mu, const Matrix& x, const Matrix& ls) {
  ProjectionSummary out;
  out.beta_star = ls * mu;
  out.sse = (mu - x * out.beta_star).squaredNorm();
  const double total = (mu.array() - mu.mean()).square().sum();
  if (!(total > 0.0)) {
    throw InvalidArgument("mu is constant, so the summary R^2 is undefined");
  }
  out.r_squared = 1.0 - out.sse / total;
  return out;
}

double logistic(double eta) {
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

// log(1 + exp(eta)) without overflow.
double softplus(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

struct Split {
  int var = -1;
  double cut = 0.0;
  double gain = 0.0;
};

class CartBuilder {
 public:
  CartBuilder(const Vector& r, const Matrix& x, int depth_limit, int min_leaf)
      : r_(r), x_(x), depth_limit_(depth_limit), min_leaf_(min_leaf) {}

  void grow(Tree& tree, int id, std::vector<Index>& rows) {
    const int depth = tree.node(id).depth;
    if (depth >= depth_limit_ || rows.size() < 2 * static_cast<std::size_t>(min_leaf_)) return;
    const Split best = best_split(rows);
    if (best.var < 0) return;

    std::vector<Index> left, right;
    for (Index i : rows) (x_(i, best.var) < best.cut ? left : right).push_back(i);
    const auto [l, r] = tree.split(id, best.var, best.cut, mean(left), mean(right));
    rows.clear();
    rows.shrink_to_fit();
    grow(tree, l, left);
    grow(tree, r, right);
  }

  double mean(const std::vector<Index>& rows) const {
    double s = 0.0;
    for (Index i : rows) s += r_(i);
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
  }

 private:
  Split best_split(const std::vector<Index>& rows) const {
    const auto n = rows.size();
    double total = 0.0;
    double total_sq = 0.0;
    for (Index i : rows) {
      total += r_(i);
      total_sq += r_(i) * r_(i);
    }
    // Gain differences below this are rounding noise: a split must beat the
    // root and the incumbent by more than it, so equal partitions reached
    // through different columns keep the first (lower column, lower cut).
    const double threshold = 1e-12 * std::max(1.0, total_sq);

    Split best;
    std::vector<Index> order(rows);
    for (Index j = 0; j < x_.cols(); ++j) {
      std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        return x_(a, j) < x_(b, j) || (x_(a, j) == x_(b, j) && a < b);
      });
      double left_sum = 0.0;
      for (std::size_t k = 1; k < n; ++k) {
        left_sum += r_(order[k - 1]);
        const double lo = x_(order[k - 1], j);
        const double hi = x_(order[k], j);
        if (k < static_cast<std::size_t>(min_leaf_) || n - k < static_cast<std::size_t>(min_leaf_) ||
            !(lo < hi)) {
          continue;
        }
        const double nl = static_cast<double>(k);
        const double nr = static_cast<double>(n - k);
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr -
                            total * total / static_cast<double>(n);
        if (gain > best.gain + threshold) {
          best = {static_cast<int>(j), 0.5 * (lo + hi), gain};
        }
      }
    }
    return best;
  }

  const Vector& r_;
  const Matrix& x_;
  int depth_limit_;
  int min_leaf_;
};

}  // namespace

ProjectionSummary linear_projection(const Vector& mu, const Matrix& x) {
  check_projection_shape(mu.size(), x);
  require_full_column_rank(x, "linear projection");
  return project_with(mu, x, least_squares_operator(x));
}

PosteriorProjection project_posterior(const Matrix& mu_draws, const Vector& mu_mean,
                                      const Matrix& x) {
  check_projection_shape(mu_mean.size(), x);
  if (mu_draws.size() > 0 && mu_draws.cols() != x.rows()) {
    throw DimensionError("mu draws must have one column per design row");
  }
  require_full_column_rank(x, "linear projection");
  const Matrix ls = least_squares_operator(x);
  PosteriorProjection out;
  out.per_draw.reserve(static_cast<std::size_t>(mu_draws.rows()));
  for (Index d = 0; d < mu_draws.rows(); ++d) {
    out.per_draw.push_back(project_with(mu_draws.row(d).transpose(), x, ls));
  }
  out.of_mean = project_with(mu_mean, x, ls);
  return out;
}

double logistic_kl(const Vector& p, const Matrix& x, const Vector& beta) {
  const Vector eta = x * beta;
  double out = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    const double pi = p(i);
    // p log p / m + (1 - p) log (1 - p) / (1 - m), with log m = eta - softplus(eta).
    out += pi * std::log(pi) + (1.0 - pi) * std::log1p(-pi) + softplus(eta(i)) - pi * eta(i);
  }
  return out;
}

Vector logistic_kl_gradient(const Vector& p, const Matrix& x, const Vector& beta) {
  const Vector eta = x * beta;
  Vector resid(p.size());
  for (Index i = 0; i < p.size(); ++i) resid(i) = logistic(eta(i)) - p(i);
  return x.transpose() * resid;
}

Vector kl_projection_logistic(const Vector& p, const Matrix& x, double tol, int max_iter,
                              double max_norm) {
  if (x.rows() != p.size()) throw DimensionError("probabilities and design rows differ");
  if (!(tol > 0.0) || max_iter < 1) throw InvalidArgument("kl projection needs tol > 0, max_iter >= 1");
  for (Index i = 0; i < p.size(); ++i) {
    if (!(p(i) > 0.0 && p(i) < 1.0)) {
      throw InvalidArgument("probability " + std::to_string(i) + " lies outside (0, 1)");
    }
  }
  require_full_column_rank(x, "kl projection");

  Vector beta = Vector::Zero(x.cols());
  double objective = logistic_kl(p, x, beta);
  // Rounding noise of the objective sum; changes below it carry no signal.
  const double slack = 1e-14 * static_cast<double>(p.size());
  for (int it = 0; it < max_iter; ++it) {
    const Vector grad = logistic_kl_gradient(p, x, beta);
    if (grad.lpNorm<Eigen::Infinity>() < tol) return beta;

    const Vector eta = x * beta;
    Vector w(p.size());
    for (Index i = 0; i < p.size(); ++i) {
      const double m = logistic(eta(i));
      w(i) = m * (1.0 - m);
    }
    const Matrix hessian = x.transpose() * w.asDiagonal() * x;
    const Vector step = hessian.ldlt().solve(grad);

    double scale = 1.0;
    Vector next = beta - step;
    double next_objective = logistic_kl(p, x, next);
    while (next_objective > objective + slack && scale > 1e-10) {
      scale *= 0.5;
      next = beta - scale * step;
      next_objective = logistic_kl(p, x, next);
    }
    beta = next;
    objective = next_objective;
    if (!beta.allFinite() || beta.lpNorm<Eigen::Infinity>() > max_norm) {
      throw ConvergenceError("kl projection diverged (coefficients exceed the norm bound)",
                             to_std(beta));
    }
  }
  if (logistic_kl_gradient(p, x, beta).lpNorm<Eigen::Infinity>() < tol) return beta;
  throw ConvergenceError("kl projection did not converge in " + std::to_string(max_iter) +
                             " iterations",
                         to_std(beta));
}

CartSummary cart_residual_fit(const Vector& residuals, const Matrix& x, int depth_limit,
                              int min_leaf) {
  if (x.rows() != residuals.size()) throw DimensionError("residuals and design rows differ");
  if (depth_limit < 0 || min_leaf < 1) {
    throw InvalidArgument("cart needs depth_limit >= 0 and min_leaf >= 1");
  }
  if (residuals.size() < 2 * static_cast<Index>(min_leaf)) {
    throw InvalidArgument("cart needs at least 2 * min_leaf rows");
  }
  std::vector<Index> rows(static_cast<std::size_t>(residuals.size()));
  std::iota(rows.begin(), rows.end(), Index{0});

  CartBuilder builder(residuals, x, depth_limit, min_leaf);
  CartSummary out{Tree(builder.mean(rows)), depth_limit, min_leaf, 0.0, 0.0};
  builder.grow(out.tree, Tree::kRoot, rows);

  const double overall = residuals.mean();
  for (Index i = 0; i < residuals.size(); ++i) {
    out.sse_root += std::pow(residuals(i) - overall, 2);
    out.sse_fit += std::pow(residuals(i) - out.tree.predict(x, i), 2);
  }
  return out;
}

}  // namespace demexp
