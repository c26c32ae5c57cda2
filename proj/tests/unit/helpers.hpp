#pragma once

// Independent oracles for the unit and acceptance tests. Nothing here calls
// into the library's factorization code.

#include "demexp/linalg.hpp"
#include "demexp/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace demexp::testing {

inline Matrix random_matrix(Rng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = standard_normal(rng);
  return m;
}

inline Vector random_vector(Rng& rng, Index n) { return random_matrix(rng, n, 1).col(0); }

/// Random PSD matrix A A^T / k with a rank that may fall short of n.
inline Matrix random_psd(Rng& rng, Index n, Index rank) {
  const Matrix a = random_matrix(rng, n, rank);
  return a * a.transpose() / static_cast<double>(rank);
}

/// Gaussian conditioning by explicit block formulas with a full-pivot LU
/// inverse: [a; b] ~ N(0, [[saa, sab], [sba, sbb]]) gives
/// b | a ~ N(sba saa^{-1} a, sbb - sba saa^{-1} sab).
inline std::pair<Vector, Matrix> condition_gaussian(const Matrix& saa, const Matrix& sab,
                                                    const Matrix& sbb, const Vector& a) {
  const Matrix inv = saa.fullPivLu().inverse();
  return {sab.transpose() * inv * a, sbb - sab.transpose() * inv * sab};
}

/// log N(y; mean, cov) from the full-pivot LU determinant and inverse.
inline double dense_mvn_log_density(const Vector& y, const Vector& mean, const Matrix& cov) {
  const auto lu = cov.fullPivLu();
  const Vector e = y - mean;
  return -0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi) -
         0.5 * std::log(lu.determinant()) - 0.5 * e.dot(lu.inverse() * e);
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
inline double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

/// InvGam(shape, scale) CDF: Q(shape, scale / x), the upper regularized gamma.
double inverse_gamma_cdf(double x, double shape, double scale);

struct BruteSplit {
  int var = -1;
  double cut = 0.0;
};

// Exhaustive depth-1 scan in (column, cut) order; the first strictly best
// candidate wins, which is the lower-column, lower-cut tie rule.
inline BruteSplit brute_force_split(const Vector& r, const Matrix& x, int min_leaf) {
  const Index n = r.size();
  const double mean = r.mean();
  const double root = (r.array() - mean).square().sum();
  double best = root - 1e-12 * std::max(1.0, r.squaredNorm());
  BruteSplit out;
  for (Index j = 0; j < x.cols(); ++j) {
    std::vector<double> values(x.col(j).data(), x.col(j).data() + n);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      const double cut = 0.5 * (values[k] + values[k + 1]);
      std::vector<double> left, right;
      for (Index i = 0; i < n; ++i) (x(i, j) < cut ? left : right).push_back(r(i));
      if (static_cast<int>(left.size()) < min_leaf || static_cast<int>(right.size()) < min_leaf) continue;
      auto sse = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double a : v) m += a;
        m /= static_cast<double>(v.size());
        double s = 0.0;
        for (double a : v) s += (a - m) * (a - m);
        return s;
      };
      const double total = sse(left) + sse(right);
      if (total < best) {
        best = total;
        out = {static_cast<int>(j), cut};
      }
    }
  }
  return out;
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace demexp::testing
