#pragma once

#include "demexp/linalg.hpp"

#include <memory>
#include <string>
#include <vector>

namespace demexp {

enum class KernelKind { Linear, SquaredExponential, Laplace, Scaled, Sum, Projected };

/// Immutable, cheaply copyable description of a covariance kernel.
///
///   Linear              sigma_beta_sq * x^T x'
///   SquaredExponential  exp(-rho * |x - x'|^2)
///   Laplace             exp(-|x - x'|)            (Euclidean norm, no lengthscale)
///   Scaled              amplitude * child(x, x')
///   Sum                 sum of children (an empty sum is the zero kernel)
///   Projected           base kernel orthogonalized against an anchor design X:
///                       k(x,x') - k_x^T X (X^T K X)^{-1} X^T k_x'
///
/// Parameters are validated at construction; a Projected spec caches K X and
/// (X^T K X)^{-1} for its anchor design.
class KernelSpec {
 public:
  static KernelSpec linear(double sigma_beta_sq);
  static KernelSpec squared_exponential(double rho);
  static KernelSpec laplace();
  static KernelSpec scaled(double amplitude, KernelSpec child);
  static KernelSpec sum(std::vector<KernelSpec> children);

  KernelKind kind() const;
  double sigma_beta_sq() const;
  double rho() const;
  double amplitude() const;
  const std::vector<KernelSpec>& children() const;

  // Projected only.
  const KernelSpec& base() const;
  const Matrix& anchor_design() const;
  const Matrix& anchor_gram_times_design() const;  // K X, N x P
  const Matrix& inner_inverse() const;             // (X^T K X)^{-1}, P x P

  std::string describe() const;

 private:
  struct Node;
  explicit KernelSpec(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;

  friend KernelSpec project_kernel(const KernelSpec& spec, const Matrix& x);
};

double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& x_prime);

/// N x N Gram matrix over the rows of `x`; symmetric by construction.
Matrix gram(const KernelSpec& spec, const Matrix& x);

/// M x N matrix with entry (m, n) = k(x_new_m, x_n).
Matrix cross_gram(const KernelSpec& spec, const Matrix& x, const Matrix& x_new);

/// Orthogonalizes `spec` against the columns of `x`. Throws RankDeficientError
/// when `x` lacks full column rank or X^T K X is numerically singular.
KernelSpec project_kernel(const KernelSpec& spec, const Matrix& x);

/// Pairwise squared Euclidean distances between rows of `x`.
Matrix squared_distances(const Matrix& x);

/// exp(-rho * D) for a precomputed squared-distance matrix.
Matrix squared_exponential_from_distances(const Matrix& sq_dist, double rho);

/// Projected Gram K - K X (X^T K X)^{-1} X^T K for a precomputed in-sample
/// Gram matrix. Same contract as gram(project_kernel(spec, x), x).
Matrix project_gram(const Matrix& k, const Matrix& x);

}  // namespace demexp
