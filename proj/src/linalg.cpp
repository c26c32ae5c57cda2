#include "demexp/linalg.hpp"

#include "demexp/errors.hpp"

#include <spdlog/spdlog.h>

#include <string>

namespace demexp {

double CholeskyFactor::log_det() const {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix CholeskyFactor::half_solve(const Matrix& b) const {
  return llt.matrixL().solve(b);
}

CholeskyFactor factorize_psd(const Matrix& a, std::string_view what) {
  CholeskyFactor out;
  if (a.rows() != a.cols()) {
    throw DimensionError("cannot factorize non-square matrix for " + std::string(what));
  }
  if (a.rows() == 0) {
    out.llt.compute(a);
    return out;
  }
  out.llt.compute(a);
  if (out.llt.info() == Eigen::Success) return out;

  const double n = static_cast<double>(a.rows());
  const double jitter = 1e-10 * std::max(a.trace(), 0.0) / n;
  spdlog::warn("cholesky of {} (n={}) failed; retrying with jitter {:.3e}", what, a.rows(),
               jitter);
  Matrix jittered = a;
  jittered.diagonal().array() += jitter;
  out.llt.compute(jittered);
  if (out.llt.info() != Eigen::Success || jitter <= 0.0) {
    throw FactorizationError("cholesky of " + std::string(what) + " failed after jitter");
  }
  out.jitter = jitter;
  return out;
}

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

void require_full_column_rank(const Matrix& x, std::string_view what) {
  if (x.rows() < x.cols()) {
    throw RankDeficientError(std::string(what) + ": design has " + std::to_string(x.rows()) +
                             " rows but " + std::to_string(x.cols()) + " columns");
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  if (qr.rank() < x.cols()) {
    throw RankDeficientError(std::string(what) + ": design has rank " + std::to_string(qr.rank()) +
                             " < " + std::to_string(x.cols()) + " columns");
  }
}

Matrix least_squares_operator(const Matrix& x) {
  require_full_column_rank(x, "least squares");
  const Matrix xtx = x.transpose() * x;
  return xtx.inverse() * x.transpose();
}

double min_eigenvalue(const Matrix& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace demexp
