#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace demexp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Cholesky factor of a symmetric PSD matrix, together with the diagonal
/// jitter that had to be added (0 when the first attempt succeeded).
struct CholeskyFactor {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;

  Index size() const { return llt.matrixLLT().rows(); }
  double log_det() const;
  Vector solve(const Vector& b) const { return llt.solve(b); }
  Matrix solve(const Matrix& b) const { return llt.solve(b); }
  // L^{-1} b
  Matrix half_solve(const Matrix& b) const;
};

/// Factorizes `a` with at most one retry after adding 1e-10 * trace(a) / n to
/// the diagonal. The retry is logged; a second failure throws
/// FactorizationError mentioning `what`.
CholeskyFactor factorize_psd(const Matrix& a, std::string_view what);

/// (a + a^T) / 2
Matrix symmetrize(const Matrix& a);

/// Throws RankDeficientError unless `x` has full column rank.
void require_full_column_rank(const Matrix& x, std::string_view what);

/// Returns (X^T X)^{-1} X^T, the least-squares coefficient operator.
Matrix least_squares_operator(const Matrix& x);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& a);

}  // namespace demexp
