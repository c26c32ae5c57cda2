#include "demexp/chain.hpp"

#include "demexp/errors.hpp"

#include <string>

namespace demexp {

void RegressionData::validate() const {
  if (x.rows() != y.size()) {
    throw DimensionError("design has " + std::to_string(x.rows()) + " rows but the target has " +
                         std::to_string(y.size()) + " entries");
  }
  if (!names.empty() && static_cast<Index>(names.size()) != x.cols()) {
    throw DimensionError("expected " + std::to_string(x.cols()) + " column names, got " +
                         std::to_string(names.size()));
  }
  if (!x.allFinite()) throw InvalidArgument("design contains NaN or infinite values");
  if (!y.allFinite()) throw InvalidArgument("target contains NaN or infinite values");
}

}  // namespace demexp
