#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "fast/params.hpp"
#include "fast/tensor.hpp"

namespace fast {

/// Builds a scalar loss on the given tape from the given parameters. Must be deterministic.
using LossBuilder = std::function<Var(Tape&, const ParameterSet&)>;

/// Applied to analytic gradients before comparison; used for negative controls.
using GradientHook = std::function<void(Gradients&)>;

struct GradCheckResult {
  bool passed = true;
  Real worst_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::map<std::string, Real> per_param;  // worst relative error per tensor
};

inline Real gradient_relative_error(Real analytic, Real numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

/// Compares reverse-mode gradients of `loss` against central differences,
/// element by element, for every parameter.
inline GradCheckResult grad_check(const LossBuilder& loss, ParameterSet params, Real tol,
                                  Real step = 1e-5, const GradientHook& hook = {}) {
  Gradients analytic;
  {
    Tape tape;
    analytic = tape.backward(loss(tape, params));
  }
  if (hook) hook(analytic);

  auto evaluate = [&]() {
    Tape tape;
    return loss(tape, params).value()(0, 0);
  };

  GradCheckResult result;
  for (auto& [name, tensor] : params) {
    Real worst = 0.0;
    // A parameter never bound on the tape has a zero gradient.
    const auto found = analytic.find(name);
    const Tensor g = found != analytic.end() ? found->second : Tensor(tensor.rows(), tensor.cols());
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const Real saved = tensor[i];
      tensor[i] = saved + step;
      const Real up = evaluate();
      tensor[i] = saved - step;
      const Real down = evaluate();
      tensor[i] = saved;
      const Real numeric = (up - down) / (2.0 * step);
      const Real err = gradient_relative_error(g[i], numeric);
      worst = std::max(worst, err);
      if (err > result.worst_rel_error) {
        result.worst_rel_error = err;
        result.worst_param = name;
        result.worst_index = i;
      }
    }
    result.per_param[name] = worst;
  }
  result.passed = result.worst_rel_error <= tol;
  return result;
}

}  // namespace fast
