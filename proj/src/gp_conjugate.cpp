#include "demexp/gp_conjugate.hpp"

#include "demexp/errors.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace demexp {

namespace {

struct DesignSolve {
  Matrix k;
  CholeskyFactor factor;  // of K + vI
};

DesignSolve factor_design(const GpFit& fit) {
  DesignSolve out;
  out.k = gram(fit.kernel, fit.design);
  Matrix shifted = out.k;
  shifted.diagonal().array() += fit.effective_noise_variance();
  out.factor = factorize_psd(shifted, "K + vI");
  return out;
}

}  // namespace

Matrix GaussianLaw::sample(Rng& rng, Index count) const {
  Matrix draws(count, dim());
  if (dim() == 0) return draws;
  // Symmetric square root; rank-deficient covariances (projected kernels,
  // degenerate laws) are legitimate here, so a Cholesky factor will not do.
  Matrix cov = symmetrize(covariance);
  const double scale = cov.diagonal().cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    for (Index r = 0; r < count; ++r) draws.row(r) = mean.transpose();
    return draws;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  // Eigenvalues within round-off of zero carry no variance; their square
  // roots would otherwise leak sqrt(eps) noise into the null space.
  const double tol = static_cast<double>(dim()) * std::numeric_limits<double>::epsilon() *
                     es.eigenvalues().cwiseAbs().maxCoeff();
  const Vector root =
      es.eigenvalues().unaryExpr([tol](double v) { return v > tol ? std::sqrt(v) : 0.0; });
  const Matrix half = es.eigenvectors() * root.asDiagonal();
  for (Index r = 0; r < count; ++r) {
    draws.row(r) = (mean + half * standard_normal_vector(rng, dim())).transpose();
  }
  return draws;
}

Matrix sample_prior(const KernelSpec& spec, const Matrix& x, Rng& rng, Index count) {
  const Index n = x.rows();
  switch (spec.kind()) {
    case KernelKind::Scaled:
      return std::sqrt(spec.amplitude()) * sample_prior(spec.children().front(), x, rng, count);
    case KernelKind::Sum: {
      Matrix out = Matrix::Zero(count, n);
      for (const auto& child : spec.children()) out += sample_prior(child, x, rng, count);
      return out;
    }
    case KernelKind::Projected: {
      // r*(x) = r(x) - k(x, A) A (A^T K A)^{-1} A^T r(A) for a base draw r taken
      // jointly at x and the anchor rows A.
      const Matrix& a = spec.anchor_design();
      Matrix stacked(n + a.rows(), x.cols());
      stacked << x, a;
      const Matrix base = sample_prior(spec.base(), stacked, rng, count);
      const Matrix correction =
          cross_gram(spec.base(), a, x) * a * spec.inner_inverse() * a.transpose();
      return base.leftCols(n) - base.rightCols(a.rows()) * correction.transpose();
    }
    default:
      return GaussianLaw{Vector::Zero(n), gram(spec, x)}.sample(rng, count);
  }
}

void GpFit::validate() const {
  if (design.rows() < 1) throw InvalidArgument("GP fit needs at least one observation");
  if (design.rows() != targets.size()) {
    throw DimensionError("design has " + std::to_string(design.rows()) + " rows but targets have " +
                         std::to_string(targets.size()) + " entries");
  }
  if (!(noise_sd > 0.0)) throw InvalidArgument("noise_sd must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0, 1]");
}

GaussianLaw posterior_at_design(const GpFit& fit) {
  fit.validate();
  const DesignSolve ds = factor_design(fit);
  GaussianLaw law;
  law.mean = ds.k * ds.factor.solve(fit.targets);
  const Matrix w = ds.factor.half_solve(ds.k);  // L^{-1} K
  law.covariance = symmetrize(ds.k - w.transpose() * w);
  return law;
}

GaussianLaw posterior_projection(const GpFit& fit) {
  fit.validate();
  const Matrix b = least_squares_operator(fit.design);  // P x N
  const DesignSolve ds = factor_design(fit);
  const Matrix kbt = ds.k * b.transpose();  // N x P
  GaussianLaw law;
  law.mean = kbt.transpose() * ds.factor.solve(fit.targets);
  const Matrix w = ds.factor.half_solve(kbt);  // L^{-1} K B^T
  law.covariance = symmetrize(b * kbt - w.transpose() * w);
  return law;
}

GaussianLaw predict(const GpFit& fit, const Matrix& x_new) {
  fit.validate();
  if (x_new.cols() != fit.design.cols()) {
    throw DimensionError("prediction inputs have " + std::to_string(x_new.cols()) +
                         " columns, training design has " + std::to_string(fit.design.cols()));
  }
  GaussianLaw law;
  if (x_new.rows() == 0) {
    law.mean = Vector(0);
    law.covariance = Matrix(0, 0);
    return law;
  }
  const DesignSolve ds = factor_design(fit);
  const Matrix k_new = cross_gram(fit.kernel, fit.design, x_new);  // M x N
  law.mean = k_new * ds.factor.solve(fit.targets);
  const Matrix w = ds.factor.half_solve(k_new.transpose());  // N x M
  law.covariance = symmetrize(gram(fit.kernel, x_new) - w.transpose() * w);
  return law;
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

std::pair<double, double> credible_interval(const GaussianLaw& law, Index index, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("credible level must lie in (0, 1)");
  if (index < 0 || index >= law.dim()) {
    throw DimensionError("credible interval index " + std::to_string(index) +
                         " out of range for dimension " + std::to_string(law.dim()));
  }
  const double sd = std::sqrt(std::max(law.covariance(index, index), 0.0));
  const double z = normal_quantile(0.5 * (1.0 + level));
  const double m = law.mean(index);
  return {m - z * sd, m + z * sd};
}

}  // namespace demexp
