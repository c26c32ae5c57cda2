#include "helpers.hpp"

#include <boost/math/special_functions/gamma.hpp>

namespace demexp::testing {

double inverse_gamma_cdf(double x, double shape, double scale) {
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_q(shape, scale / x);
}

}  // namespace demexp::testing
