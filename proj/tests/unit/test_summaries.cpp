#include "demexp/errors.hpp"
#include "demexp/summaries.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

using namespace demexp;
using namespace demexp::testing;

namespace {

Matrix design_with_intercept(Rng& rng, Index n, Index p) {
  Matrix x = random_matrix(rng, n, p);
  x.col(0).setOnes();
  return x;
}

Vector logistic(const Vector& eta) { return (1.0 / (1.0 + (-eta.array()).exp())).matrix(); }

}  // namespace

TEST_CASE("in-span mu is reproduced exactly") {
  Rng rng(1);
  const Matrix x = design_with_intercept(rng, 30, 4);
  const Vector beta = random_vector(rng, 4);
  const ProjectionSummary s = linear_projection(x * beta, x);
  CHECK(max_abs(s.beta_star - beta) < 1e-10);
  CHECK(s.sse < 1e-20);
  CHECK(s.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mu orthogonal to the design explains nothing") {
  Rng rng(2);
  const Matrix x = design_with_intercept(rng, 25, 3);
  const Vector z = random_vector(rng, 25);
  const Vector mu = z - x * (x.transpose() * x).fullPivLu().solve(x.transpose() * z);
  const ProjectionSummary s = linear_projection(mu, x);
  CHECK(s.r_squared == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(s.beta_star.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(s.sse == doctest::Approx(mu.squaredNorm()));
}

TEST_CASE("projection is idempotent and R^2 is affine invariant") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix x = design_with_intercept(rng, 40, 3);
    const Vector mu = random_vector(rng, 40) + x.col(1);
    const ProjectionSummary s = linear_projection(mu, x);
    const ProjectionSummary again = linear_projection(x * s.beta_star, x);
    CHECK(max_abs(again.beta_star - s.beta_star) < 1e-10);
    CHECK(again.r_squared == doctest::Approx(1.0).epsilon(1e-12));

    const double a = -3.0 + 0.5 * trial, b = 7.0;
    if (a == 0.0) continue;
    const ProjectionSummary moved = linear_projection((a * mu.array() + b).matrix(), x);
    CHECK(moved.r_squared == doctest::Approx(s.r_squared).epsilon(1e-10));
    Vector expected = a * s.beta_star;
    expected(0) += b;
    CHECK(max_abs(moved.beta_star - expected) < 1e-9);
    CHECK(s.r_squared == doctest::Approx(1.0 - s.sse / (mu.array() - mu.mean()).square().sum()));
  }
}

TEST_CASE("degenerate projections are rejected") {
  Rng rng(4);
  const Matrix x = design_with_intercept(rng, 10, 3);
  CHECK_THROWS_AS(linear_projection(Vector::Constant(10, 2.0), x), InvalidArgument);
  CHECK_THROWS_AS(linear_projection(random_vector(rng, 3), x.topRows(3)), InvalidArgument);
  Matrix collinear = x;
  collinear.col(2) = 2.0 * collinear.col(1);
  CHECK_THROWS_AS(linear_projection(random_vector(rng, 10), collinear), RankDeficientError);
  CHECK_THROWS_AS(linear_projection(random_vector(rng, 9), x), DimensionError);
}

TEST_CASE("posterior projection summarizes each draw and the mean") {
  Rng rng(5);
  const Matrix x = design_with_intercept(rng, 20, 2);
  const Matrix draws = random_matrix(rng, 6, 20);
  const Vector mean = draws.colwise().mean().transpose();
  const PosteriorProjection pp = project_posterior(draws, mean, x);
  REQUIRE(pp.per_draw.size() == 6);
  Vector avg = Vector::Zero(2);
  for (std::size_t i = 0; i < 6; ++i) {
    const ProjectionSummary one = linear_projection(draws.row(static_cast<Index>(i)).transpose(), x);
    CHECK(max_abs(pp.per_draw[i].beta_star - one.beta_star) < 1e-12);
    avg += one.beta_star / 6.0;
  }
  // beta* is linear in mu, so the projection of the mean is the mean projection.
  CHECK(max_abs(pp.of_mean.beta_star - avg) < 1e-12);
  CHECK_THROWS_AS(project_posterior(Matrix::Zero(2, 19), mean, x), DimensionError);
}

TEST_CASE("KL projection recovers the generating coefficients") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix x = design_with_intercept(rng, 80, 3);
    const Vector beta0 = random_vector(rng, 3);
    const Vector p = logistic(x * beta0);
    const Vector beta = kl_projection_logistic(p, x);
    CHECK(max_abs(beta - beta0) < 1e-8);
    CHECK(logistic_kl_gradient(p, x, beta).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(logistic_kl(p, x, beta) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }
}

TEST_CASE("KL projection with an intercept-only design") {
  const Matrix ones = Matrix::Ones(12, 1);
  CHECK(std::abs(kl_projection_logistic(Vector::Constant(12, 0.5), ones)(0)) < 1e-12);
  const double c = 0.8;
  CHECK(kl_projection_logistic(Vector::Constant(12, c), ones)(0) ==
        doctest::Approx(std::log(c / (1.0 - c))).epsilon(1e-10));
}

TEST_CASE("KL objective and gradient agree with finite differences") {
  Rng rng(7);
  const Matrix x = design_with_intercept(rng, 30, 3);
  Vector p = logistic(random_vector(rng, 30));
  const Vector beta = random_vector(rng, 3);
  const Vector g = logistic_kl_gradient(p, x, beta);
  for (Index j = 0; j < 3; ++j) {
    Vector up = beta, down = beta;
    up(j) += 1e-6;
    down(j) -= 1e-6;
    const double fd = (logistic_kl(p, x, up) - logistic_kl(p, x, down)) / 2e-6;
    CHECK(g(j) == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK(logistic_kl(p, x, beta) > 0.0);
}

TEST_CASE("KL projection failures carry the last iterate") {
  Rng rng(8);
  const Matrix x = design_with_intercept(rng, 40, 2);
  Vector beta0(2);
  beta0 << 0.5, 4.0;
  const Vector p = logistic(x * beta0);
  try {
    kl_projection_logistic(p, x, 1e-10, 1);
    FAIL("expected a convergence error");
  } catch (const ConvergenceError& e) {
    CHECK(e.kind() == "convergence");
    CHECK(e.last_iterate().size() == 2);
  }
  CHECK_THROWS_AS(kl_projection_logistic(p, x, 1e-10, 100, 1.0), ConvergenceError);
  Vector bad = p;
  bad(3) = 1.0;
  CHECK_THROWS_AS(kl_projection_logistic(bad, x), InvalidArgument);
}

TEST_CASE("CART on zero residuals is a single zero leaf") {
  Rng rng(9);
  const Matrix x = random_matrix(rng, 30, 2);
  const CartSummary s = cart_residual_fit(Vector::Zero(30), x);
  CHECK(s.tree.is_stump());
  CHECK(s.tree.node(Tree::kRoot).value == 0.0);
  CHECK(s.sse_fit == 0.0);
}

TEST_CASE("CART finds a step in the first predictor") {
  Rng rng(10);
  Matrix x(60, 2);
  for (Index i = 0; i < 60; ++i) {
    x(i, 0) = uniform01(rng);
    x(i, 1) = uniform01(rng);
  }
  Vector r(60);
  for (Index i = 0; i < 60; ++i) r(i) = x(i, 0) < 0.5 ? -1.0 : 2.0;
  const CartSummary s = cart_residual_fit(r, x, 1, 5);
  REQUIRE_FALSE(s.tree.is_stump());
  const TreeNode& root = s.tree.node(Tree::kRoot);
  CHECK(root.split_var == 0);
  CHECK(std::abs(root.cutpoint - 0.5) < 0.1);
  CHECK(s.tree.node(root.left).value == doctest::Approx(-1.0));
  CHECK(s.tree.node(root.right).value == doctest::Approx(2.0));
  const BruteSplit b = brute_force_split(r, x, 5);
  CHECK(root.cutpoint == b.cut);
  CHECK(s.sse_fit == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("depth-1 CART matches an exhaustive scan") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 4 + static_cast<Index>(rng() % 37);
    const Index p = 1 + static_cast<Index>(rng() % 3);
    Matrix x = random_matrix(rng, n, p);
    if (trial % 4 == 0) x = x.array().round().matrix();  // repeated values
    const Vector r = random_vector(rng, n);
    const int min_leaf = 1 + static_cast<int>(rng() % static_cast<unsigned>(n / 2));
    const CartSummary s = cart_residual_fit(r, x, 1, min_leaf);
    const BruteSplit b = brute_force_split(r, x, min_leaf);
    if (b.var < 0) {
      CHECK(s.tree.is_stump());
      continue;
    }
    REQUIRE_FALSE(s.tree.is_stump());
    CHECK(s.tree.node(Tree::kRoot).split_var == b.var);
    CHECK(s.tree.node(Tree::kRoot).cutpoint == b.cut);
  }
}

TEST_CASE("CART tree respects its limits and fits leaf means") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = random_matrix(rng, 120, 3);
    Vector r = random_vector(rng, 120);
    for (Index i = 0; i < 120; ++i) r(i) += x(i, 1) > 0.0 ? 1.5 : 0.0;
    const int depth = 1 + trial % 4;
    const CartSummary s = cart_residual_fit(r, x, depth, 8);
    CHECK(s.tree.max_depth() <= depth);
    CHECK(s.sse_fit <= s.sse_root);
    if (!s.tree.is_stump()) CHECK(s.sse_fit < s.sse_root);

    std::map<int, std::pair<int, double>> routed;
    for (Index i = 0; i < 120; ++i) {
      auto& [count, sum] = routed[s.tree.leaf_for(x, i)];
      ++count;
      sum += r(i);
    }
    for (const auto& [leaf, cs] : routed) {
      CHECK(cs.first >= 8);
      CHECK(s.tree.node(leaf).value == doctest::Approx(cs.second / cs.first).epsilon(1e-12));
    }
  }
}

TEST_CASE("CART with exactly two minimum leaves splits at most once") {
  Rng rng(13);
  const Matrix x = random_matrix(rng, 20, 2);
  const Vector r = random_vector(rng, 20);
  const CartSummary s = cart_residual_fit(r, x, 3, 10);
  CHECK(s.tree.num_leaves() <= 2);
  CHECK_THROWS_AS(cart_residual_fit(r, x, 3, 11), InvalidArgument);
  CHECK_THROWS_AS(cart_residual_fit(r.head(19), x, 3, 5), DimensionError);
}

TEST_CASE("equal partitions from different columns go to the lower column") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix x(15, 2);
    x.col(0) = random_vector(rng, 15);
    x.col(1) = -3.0 * x.col(0);  // same partitions, reversed order
    const Vector r = random_vector(rng, 15);
    const CartSummary s = cart_residual_fit(r, x, 1, 1);
    if (!s.tree.is_stump()) CHECK(s.tree.node(Tree::kRoot).split_var == 0);
  }
}
