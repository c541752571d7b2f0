#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vlqa/autodiff.h"

namespace vlqa {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  // Same comparison restricted to components with max(|analytic|, |numeric|)
  // of at least kSignificantGradient, and the largest absolute gap overall.
  double max_relative_error_significant = 0.0;
  double max_absolute_error = 0.0;
};

inline constexpr double kSignificantGradient = 1e-6;

// Builds a scalar loss on the given tape from parameters bound to it.
using ScalarFn = std::function<Var(Tape&)>;

// Compares reverse-mode gradients against central differences over every
// scalar of the selected parameters (all of them when `names` is empty).
// Relative error is |analytic - numeric| / max(|numeric|, 1e-8).
// Parameter values are restored before returning.
GradCheckResult GradCheck(ParameterStore& params, const ScalarFn& f, double step = 1e-5,
                          const std::vector<std::string>& names = {});

}  // namespace vlqa
