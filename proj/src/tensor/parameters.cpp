#include "flicker/tensor/parameters.hpp"

#include <cmath>
#include <stdexcept>

#include "flicker/common/rng.hpp"

namespace flicker {

std::size_t ParameterSet::add(std::string name, Tensor value) {
  if (find(name) != nullptr) throw std::invalid_argument("parameter set: duplicate name '" + name + "'");
  params_.push_back(Parameter{std::move(name), std::move(value), Tensor{}});
  return params_.size() - 1;
}

std::size_t ParameterSet::add_uniform(std::string name, std::size_t rows, std::size_t cols,
                                      std::size_t fan_in, Rng& rng) {
  Tensor t = Tensor::matrix(rows, cols);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return add(std::move(name), std::move(t));
}

std::size_t ParameterSet::element_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) {
    if (p.grad.same_shape(p.value)) {
      p.grad.fill(0.0);
    } else {
      p.grad = Tensor(p.value.shape(), 0.0);
    }
  }
}

double ParameterSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) {
    for (double g : p.grad.data()) sq += g * g;
  }
  return std::sqrt(sq);
}

double ParameterSet::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const double k = max_norm / norm;
    for (auto& p : params_) {
      for (auto& g : p.grad.data()) g *= k;
    }
  }
  return norm;
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
  if (other.size() != size()) throw std::invalid_argument("parameter set: size mismatch on copy");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name || params_[i].value.shape() != other.params_[i].value.shape()) {
      throw std::invalid_argument("parameter set: layout mismatch on copy at '" + params_[i].name + "'");
    }
    params_[i].value = other.params_[i].value;
  }
}

}  // namespace flicker
