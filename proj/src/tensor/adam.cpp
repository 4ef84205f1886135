#include "flicker/tensor/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "flicker/common/binary_io.hpp"

namespace flicker {

Adam::Adam(const ParameterSet& params, AdamConfig config) : config_(config) {
  for (const auto& p : params) {
    m_.emplace_back(p.value.shape(), 0.0);
    v_.emplace_back(p.value.shape(), 0.0);
  }
}

void Adam::step(ParameterSet& params) {
  if (params.size() != m_.size()) throw std::invalid_argument("adam: parameter set does not match optimizer state");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.grad.same_shape(p.value)) continue;
    auto w = p.value.data();
    auto g = p.grad.data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g[k];
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g[k] * g[k];
      w[k] -= config_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.eps);
    }
  }
}

void Adam::save(std::ostream& os) const {
  io::write_f64(os, config_.lr);
  io::write_f64(os, config_.beta1);
  io::write_f64(os, config_.beta2);
  io::write_f64(os, config_.eps);
  io::write_u64(os, t_);
  io::write_u64(os, m_.size());
  for (std::size_t i = 0; i < m_.size(); ++i) {
    io::write_tensor(os, m_[i]);
    io::write_tensor(os, v_[i]);
  }
}

void Adam::load(std::istream& is, const ParameterSet& params) {
  AdamConfig c;
  c.lr = io::read_f64(is);
  c.beta1 = io::read_f64(is);
  c.beta2 = io::read_f64(is);
  c.eps = io::read_f64(is);
  const auto t = io::read_u64(is);
  const auto n = io::read_u64(is);
  if (n != params.size()) throw std::runtime_error("adam: saved state has " + std::to_string(n) + " tensors, expected " + std::to_string(params.size()));
  std::vector<Tensor> m, v;
  for (std::size_t i = 0; i < n; ++i) {
    m.push_back(io::read_tensor(is));
    v.push_back(io::read_tensor(is));
    if (m.back().shape() != params[i].value.shape() || v.back().shape() != params[i].value.shape()) {
      throw std::runtime_error("adam: moment shape mismatch for '" + params[i].name + "'");
    }
  }
  config_ = c;
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace flicker
