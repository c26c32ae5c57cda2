#pragma once

#include "demexp/linalg.hpp"

#include <limits>
#include <string>
#include <vector>

namespace demexp {

/// Regression data: design rows X (N x P) and targets y. `names` holds the
/// design column names when the data came from a file.
struct RegressionData {
  Matrix x;
  Vector y;
  std::vector<std::string> names;

  Index n() const { return x.rows(); }
  Index p() const { return x.cols(); }
  void validate() const;
};

/// One retained posterior draw. Fields a sampler does not produce stay NaN.
struct McmcDraw {
  Vector beta;
  double sigma = std::numeric_limits<double>::quiet_NaN();
  bool included = false;   // spike-and-GP: r != 0
  bool all_empty = false;  // GBART: every tree is a single leaf
  double r_squared = std::numeric_limits<double>::quiet_NaN();
  double sigma_mu_sq = std::numeric_limits<double>::quiet_NaN();
  double rho = std::numeric_limits<double>::quiet_NaN();
};

struct McmcChain {
  std::vector<McmcDraw> draws;
  /// Posterior mean of mu at the design rows; empty when not tracked.
  Vector mu_mean;
  /// One row per retained draw when requested, otherwise 0 x 0.
  Matrix mu_draws;

  std::size_t size() const { return draws.size(); }
  bool empty() const { return draws.empty(); }
};

}  // namespace demexp
