#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "flicker/tensor/graph.hpp"
#include "flicker/tensor/parameters.hpp"

namespace flicker {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Coordinates whose +-eps probes straddle a relu/abs kink even at the
  // smallest step; the loss is not differentiable there.
  std::size_t kinks = 0;
  std::string worst;  // "<param>[<index>]" of the largest error
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

using LossBuilder = std::function<Var(Graph&)>;

// Compares backward() against fourth-order central differences (probes at
// +-eps and +-2 eps) for every element of every parameter: |analytic - numeric| / max(1e-8, |numeric|). When a probe lands in
// a different relu/abs branch than the base point the step is shrunk (down to
// 1e-7) before the coordinate is declared a kink.
GradCheckReport gradient_check(ParameterSet& params, const LossBuilder& loss, double eps = 1e-5);

}  // namespace flicker
