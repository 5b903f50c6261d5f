#include "cxr/errors.hpp"
#include "cxr/training.hpp"

namespace cxr {

ClassWeights class_weights(std::size_t n_positive, std::size_t n_negative) {
  if (n_positive == 0 || n_negative == 0) {
    throw DataError("degenerate cohort: class weights need both classes (positives=" + std::to_string(n_positive) +
                    ", negatives=" + std::to_string(n_negative) + ")");
  }
  const double total = static_cast<double>(n_positive) + static_cast<double>(n_negative);
  return {total / static_cast<double>(n_positive), total / static_cast<double>(n_negative), n_positive, n_negative};
}

ClassWeights unit_class_weights(std::size_t n_positive, std::size_t n_negative) {
  return {1.0, 1.0, n_positive, n_negative};
}

std::string_view to_string(ClassWeighting w) { return w == ClassWeighting::unit ? "unit" : "inverse_frequency"; }

ClassWeighting parse_class_weighting(std::string_view text) {
  if (text == "inverse_frequency") return ClassWeighting::inverse_frequency;
  if (text == "unit") return ClassWeighting::unit;
  throw ConfigError("unknown class weighting '" + std::string(text) + "'");
}

}  // namespace cxr
