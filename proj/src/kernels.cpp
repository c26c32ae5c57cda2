#include "demexp/kernels.hpp"

#include "demexp/errors.hpp"

#include <cmath>
#include <sstream>

namespace demexp {

struct KernelSpec::Node {
  KernelKind kind = KernelKind::Sum;
  double sigma_beta_sq = 0.0;
  double rho = 0.0;
  double amplitude = 0.0;
  std::vector<KernelSpec> children;
  // Projected
  Matrix anchor;
  Matrix anchor_kx;
  Matrix inner_inv;
};

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InvalidArgument(std::string("kernel parameter ") + name + " must be positive and finite");
  }
}

double base_eval(KernelKind kind, double param, const Eigen::Ref<const Vector>& x,
                 const Eigen::Ref<const Vector>& y) {
  switch (kind) {
    case KernelKind::Linear:
      return param * x.dot(y);
    case KernelKind::SquaredExponential:
      return std::exp(-param * (x - y).squaredNorm());
    case KernelKind::Laplace:
      return std::exp(-(x - y).norm());
    default:
      return 0.0;
  }
}

double base_param(const KernelSpec& spec) {
  switch (spec.kind()) {
    case KernelKind::Linear:
      return spec.sigma_beta_sq();
    case KernelKind::SquaredExponential:
      return spec.rho();
    default:
      return 0.0;
  }
}

// Rows of `a` against rows of `b` for the three primitive kinds.
Matrix base_cross(const KernelSpec& spec, const Matrix& a, const Matrix& b) {
  const double param = base_param(spec);
  switch (spec.kind()) {
    case KernelKind::Linear:
      return param * (a * b.transpose());
    case KernelKind::SquaredExponential:
    case KernelKind::Laplace: {
      Matrix out(a.rows(), b.rows());
      for (Index j = 0; j < b.rows(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
          const double d2 = (a.row(i) - b.row(j)).squaredNorm();
          out(i, j) = spec.kind() == KernelKind::Laplace ? std::exp(-std::sqrt(d2))
                                                         : std::exp(-param * d2);
        }
      }
      return out;
    }
    default:
      return Matrix::Zero(a.rows(), b.rows());
  }
}

Matrix base_gram(const KernelSpec& spec, const Matrix& x) {
  const Index n = x.rows();
  if (spec.kind() == KernelKind::Linear) {
    Matrix g = spec.sigma_beta_sq() * (x * x.transpose());
    return symmetrize(g);
  }
  Matrix g(n, n);
  for (Index j = 0; j < n; ++j) {
    g(j, j) = base_eval(spec.kind(), base_param(spec), x.row(j).transpose(),
                        x.row(j).transpose());
    for (Index i = j + 1; i < n; ++i) {
      const double v =
          base_eval(spec.kind(), base_param(spec), x.row(i).transpose(), x.row(j).transpose());
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

// (rows of a) x (rows of b), not symmetrized.
Matrix cross_impl(const KernelSpec& spec, const Matrix& a, const Matrix& b) {
  switch (spec.kind()) {
    case KernelKind::Linear:
    case KernelKind::SquaredExponential:
    case KernelKind::Laplace:
      return base_cross(spec, a, b);
    case KernelKind::Scaled:
      return spec.amplitude() * cross_impl(spec.children().front(), a, b);
    case KernelKind::Sum: {
      Matrix out = Matrix::Zero(a.rows(), b.rows());
      for (const auto& child : spec.children()) out += cross_impl(child, a, b);
      return out;
    }
    case KernelKind::Projected: {
      const Matrix& anchor = spec.anchor_design();
      const Matrix ca = cross_impl(spec.base(), a, anchor) * anchor;  // |a| x P
      const Matrix cb = cross_impl(spec.base(), b, anchor) * anchor;  // |b| x P
      return cross_impl(spec.base(), a, b) - ca * spec.inner_inverse() * cb.transpose();
    }
  }
  return {};
}

Matrix gram_impl(const KernelSpec& spec, const Matrix& x) {
  switch (spec.kind()) {
    case KernelKind::Linear:
    case KernelKind::SquaredExponential:
    case KernelKind::Laplace:
      return base_gram(spec, x);
    case KernelKind::Scaled:
      return spec.amplitude() * gram_impl(spec.children().front(), x);
    case KernelKind::Sum: {
      Matrix out = Matrix::Zero(x.rows(), x.rows());
      for (const auto& child : spec.children()) out += gram_impl(child, x);
      return out;
    }
    case KernelKind::Projected: {
      const Matrix& anchor = spec.anchor_design();
      const Matrix c = cross_impl(spec.base(), x, anchor) * anchor;
      Matrix g = gram_impl(spec.base(), x) - c * spec.inner_inverse() * c.transpose();
      return symmetrize(g);
    }
  }
  return {};
}

}  // namespace

KernelSpec KernelSpec::linear(double sigma_beta_sq) {
  require_positive(sigma_beta_sq, "sigma_beta_sq");
  auto node = std::make_shared<Node>();
  node->kind = KernelKind::Linear;
  node->sigma_beta_sq = sigma_beta_sq;
  return KernelSpec(std::move(node));
}

KernelSpec KernelSpec::squared_exponential(double rho) {
  require_positive(rho, "rho");
  auto node = std::make_shared<Node>();
  node->kind = KernelKind::SquaredExponential;
  node->rho = rho;
  return KernelSpec(std::move(node));
}

KernelSpec KernelSpec::laplace() {
  auto node = std::make_shared<Node>();
  node->kind = KernelKind::Laplace;
  return KernelSpec(std::move(node));
}

KernelSpec KernelSpec::scaled(double amplitude, KernelSpec child) {
  require_positive(amplitude, "amplitude");
  auto node = std::make_shared<Node>();
  node->kind = KernelKind::Scaled;
  node->amplitude = amplitude;
  node->children.push_back(std::move(child));
  return KernelSpec(std::move(node));
}

KernelSpec KernelSpec::sum(std::vector<KernelSpec> children) {
  auto node = std::make_shared<Node>();
  node->kind = KernelKind::Sum;
  node->children = std::move(children);
  return KernelSpec(std::move(node));
}

KernelKind KernelSpec::kind() const { return node_->kind; }
double KernelSpec::sigma_beta_sq() const { return node_->sigma_beta_sq; }
double KernelSpec::rho() const { return node_->rho; }
double KernelSpec::amplitude() const { return node_->amplitude; }
const std::vector<KernelSpec>& KernelSpec::children() const { return node_->children; }

const KernelSpec& KernelSpec::base() const {
  if (node_->children.empty()) throw InvalidArgument("kernel has no base/child kernel");
  return node_->children.front();
}

const Matrix& KernelSpec::anchor_design() const { return node_->anchor; }
const Matrix& KernelSpec::anchor_gram_times_design() const { return node_->anchor_kx; }
const Matrix& KernelSpec::inner_inverse() const { return node_->inner_inv; }

std::string KernelSpec::describe() const {
  std::ostringstream os;
  switch (kind()) {
    case KernelKind::Linear:
      os << "linear(" << sigma_beta_sq() << ")";
      break;
    case KernelKind::SquaredExponential:
      os << "se(" << rho() << ")";
      break;
    case KernelKind::Laplace:
      os << "laplace";
      break;
    case KernelKind::Scaled:
      os << amplitude() << "*" << base().describe();
      break;
    case KernelKind::Sum: {
      os << "sum(";
      for (std::size_t i = 0; i < children().size(); ++i) {
        if (i) os << " + ";
        os << children()[i].describe();
      }
      os << ")";
      break;
    }
    case KernelKind::Projected:
      os << "projected(" << base().describe() << ", N=" << anchor_design().rows()
         << ", P=" << anchor_design().cols() << ")";
      break;
  }
  return os.str();
}

double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& x_prime) {
  if (x.size() != x_prime.size()) {
    throw DimensionError("kernel arguments have dimensions " + std::to_string(x.size()) +
                         " and " + std::to_string(x_prime.size()));
  }
  switch (spec.kind()) {
    case KernelKind::Linear:
    case KernelKind::SquaredExponential:
    case KernelKind::Laplace:
      return base_eval(spec.kind(), base_param(spec), x, x_prime);
    case KernelKind::Scaled:
      return spec.amplitude() * eval_kernel(spec.base(), x, x_prime);
    case KernelKind::Sum: {
      double total = 0.0;
      for (const auto& child : spec.children()) total += eval_kernel(child, x, x_prime);
      return total;
    }
    case KernelKind::Projected: {
      const Matrix& anchor = spec.anchor_design();
      if (x.size() != anchor.cols()) {
        throw DimensionError("projected kernel anchored on " + std::to_string(anchor.cols()) +
                             " columns evaluated at dimension " + std::to_string(x.size()));
      }
      const Matrix a = x.transpose();
      const Matrix b = x_prime.transpose();
      return cross_impl(spec, a, b)(0, 0);
    }
  }
  return 0.0;
}

Matrix gram(const KernelSpec& spec, const Matrix& x) {
  if (x.rows() == 0) throw InvalidArgument("gram matrix requested for an empty design");
  if (spec.kind() == KernelKind::Projected && x.cols() != spec.anchor_design().cols()) {
    throw DimensionError("design column count does not match projected kernel anchor");
  }
  return gram_impl(spec, x);
}

Matrix cross_gram(const KernelSpec& spec, const Matrix& x, const Matrix& x_new) {
  if (x.cols() != x_new.cols()) {
    throw DimensionError("cross_gram column mismatch: " + std::to_string(x.cols()) + " vs " +
                         std::to_string(x_new.cols()));
  }
  if (spec.kind() == KernelKind::Projected && x.cols() != spec.anchor_design().cols()) {
    throw DimensionError("design column count does not match projected kernel anchor");
  }
  if (x_new.rows() == 0) return Matrix(0, x.rows());
  return cross_impl(spec, x_new, x);
}

KernelSpec project_kernel(const KernelSpec& spec, const Matrix& x) {
  require_full_column_rank(x, "projected kernel anchor");
  const Matrix k = gram(spec, x);
  const Matrix kx = k * x;
  const Matrix inner = symmetrize(x.transpose() * kx);
  Eigen::LDLT<Matrix> ldlt(inner);
  const double scale = inner.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || !(scale > 0.0) || ldlt.rcond() < 1e-13) {
    throw RankDeficientError("projected kernel: X^T K X is singular (rcond " +
                             std::to_string(scale > 0.0 ? ldlt.rcond() : 0.0) +
                             "); the kernel does not span the design columns");
  }
  auto node = std::make_shared<KernelSpec::Node>();
  node->kind = KernelKind::Projected;
  node->children.push_back(spec);
  node->anchor = x;
  node->anchor_kx = kx;
  node->inner_inv = symmetrize(inner.inverse());
  return KernelSpec(std::move(node));
}

Matrix squared_distances(const Matrix& x) {
  const Index n = x.rows();
  Matrix d(n, n);
  for (Index j = 0; j < n; ++j) {
    d(j, j) = 0.0;
    for (Index i = j + 1; i < n; ++i) {
      const double v = (x.row(i) - x.row(j)).squaredNorm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

Matrix squared_exponential_from_distances(const Matrix& sq_dist, double rho) {
  return (-rho * sq_dist.array()).exp().matrix();
}

Matrix project_gram(const Matrix& k, const Matrix& x) {
  const Matrix kx = k * x;
  const Matrix inner = symmetrize(x.transpose() * kx);
  Eigen::LDLT<Matrix> ldlt(inner);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-13) {
    throw RankDeficientError("projected kernel: X^T K X is singular");
  }
  return symmetrize(k - kx * ldlt.solve(kx.transpose()));
}

}  // namespace demexp
