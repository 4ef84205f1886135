#include "flicker/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flicker {

namespace {

struct Probe {
  double loss;
  std::uint64_t signature;
};

Probe evaluate(const LossBuilder& loss) {
  Graph g;
  Var root = loss(g);
  const Tensor& v = g.value(root);
  if (v.size() != 1) throw std::invalid_argument("gradient_check: loss must be 1x1, got " + v.shape_string());
  if (!std::isfinite(v[0])) throw std::runtime_error("gradient_check: non-finite loss");
  return {v[0], g.branch_signature()};
}

}  // namespace

GradCheckReport gradient_check(ParameterSet& params, const LossBuilder& loss, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-4)) throw std::invalid_argument("gradient_check: eps must lie in [1e-7, 1e-4]");
  constexpr double kMinEps = 1e-7;

  params.zero_grad();
  std::uint64_t base_signature = 0;
  {
    Graph g;
    Var root = loss(g);
    if (g.value(root).size() != 1) {
      throw std::invalid_argument("gradient_check: loss must be 1x1, got " + g.value(root).shape_string());
    }
    if (!std::isfinite(g.value(root)[0])) throw std::runtime_error("gradient_check: non-finite loss");
    g.backward(root);
    base_signature = g.branch_signature();
  }

  GradCheckReport report;
  for (auto& p : params) {
    auto w = p.value.data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double analytic = p.grad.empty() ? 0.0 : p.grad[k];
      const double saved = w[k];
      double h = eps;
      double numeric = 0.0;
      bool smooth = false;
      while (true) {
        // Fourth-order central difference: probes at +-h and +-2h.
        w[k] = saved + h;
        const Probe p1 = evaluate(loss);
        w[k] = saved - h;
        const Probe m1 = evaluate(loss);
        w[k] = saved + 2.0 * h;
        const Probe p2 = evaluate(loss);
        w[k] = saved - 2.0 * h;
        const Probe m2 = evaluate(loss);
        w[k] = saved;
        if (p1.signature == base_signature && m1.signature == base_signature && p2.signature == base_signature &&
            m2.signature == base_signature) {
          numeric = (8.0 * (p1.loss - m1.loss) - (p2.loss - m2.loss)) / (12.0 * h);
          smooth = true;
          break;
        }
        if (h <= kMinEps) break;
        h = std::max(kMinEps, h * 0.1);
      }
      if (!smooth) {
        ++report.kinks;
        continue;
      }
      ++report.checked;
      const double err = std::fabs(analytic - numeric) / std::max(1e-8, std::fabs(numeric));
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst = p.name + "[" + std::to_string(k) + "]";
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace flicker
