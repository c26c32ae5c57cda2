#include "demexp/random.hpp"

#include "demexp/errors.hpp"

#include <cmath>

namespace demexp {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t split_seed(std::uint64_t master_seed, std::string_view stream_id,
                         std::uint64_t counter) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(master_seed ^ h) ^ counter);
}

double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double uniform01(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

Vector standard_normal_vector(Rng& rng, Index n) {
  Vector z(n);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (Index i = 0; i < n; ++i) z(i) = dist(rng);
  return z;
}

double inverse_gamma(Rng& rng, double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) {
    throw InvalidArgument("inverse gamma requires positive shape and scale");
  }
  std::gamma_distribution<double> gamma(shape, 1.0 / scale);
  return 1.0 / gamma(rng);
}

double inverse_gamma_log_pdf(double x, double shape, double scale) {
  if (!(x > 0.0)) return -INFINITY;
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

Vector multivariate_normal(Rng& rng, const Vector& mean, const CholeskyFactor& cov_factor) {
  const Vector z = standard_normal_vector(rng, mean.size());
  return mean + cov_factor.llt.matrixL() * z;
}

}  // namespace demexp
