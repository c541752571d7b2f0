#include "vlqa/grad_check.h"

#include <algorithm>
#include <cmath>

#include "vlqa/errors.h"

namespace vlqa {
namespace {

double Evaluate(ParameterStore& params, const ScalarFn& f) {
  Tape tape(&params);
  const double value = f(tape).value().item();
  if (!std::isfinite(value)) throw Error(ErrorKind::kNumeric, "grad check objective is not finite");
  return value;
}

}  // namespace

GradCheckResult GradCheck(ParameterStore& params, const ScalarFn& f, double step,
                          const std::vector<std::string>& names) {
  std::vector<std::string> selected = names.empty() ? params.Names() : names;

  params.ZeroGrad();
  {
    Tape tape(&params);
    Var loss = f(tape);
    if (!std::isfinite(loss.value().item())) {
      throw Error(ErrorKind::kNumeric, "grad check objective is not finite");
    }
    tape.Backward(loss);
  }

  GradCheckResult result;
  for (const std::string& name : selected) {
    const Tensor analytic = params.Grad(name);
    Tensor& value = params.MutableValue(name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double original = value[i];
      value[i] = original + step;
      const double up = Evaluate(params, f);
      value[i] = original - step;
      const double down = Evaluate(params, f);
      value[i] = original;

      const double numeric = (up - down) / (2.0 * step);
      const double err = std::abs(analytic[i] - numeric) / std::max(std::abs(numeric), 1e-8);
      ++result.checked;
      result.max_absolute_error = std::max(result.max_absolute_error, std::abs(analytic[i] - numeric));
      if (std::max(std::abs(analytic[i]), std::abs(numeric)) >= kSignificantGradient) {
        result.max_relative_error_significant = std::max(result.max_relative_error_significant, err);
      }
      if (result.worst_parameter.empty() || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = name;
        result.worst_index = i;
        result.worst_analytic = analytic[i];
        result.worst_numeric = numeric;
      }
    }
  }
  params.ZeroGrad();
  return result;
}

}  // namespace vlqa
