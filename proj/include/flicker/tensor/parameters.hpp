#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "flicker/tensor/tensor.hpp"

namespace flicker {

class Rng;

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Owns a flat list of named parameters. Modules keep indices into the set,
// so copying a set (e.g. into a target network) keeps every module valid.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value);
  // Uniform in +-1/sqrt(fan_in).
  std::size_t add_uniform(std::string name, std::size_t rows, std::size_t cols,
                          std::size_t fan_in, Rng& rng);

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;

  const Parameter* find(std::string_view name) const;

  void zero_grad();
  double grad_norm() const;
  // Scales every gradient so the global L2 norm is at most max_norm; returns the norm before clipping.
  double clip_grad_norm(double max_norm);
  // Copies values from a set with identical names and shapes.
  void copy_values_from(const ParameterSet& other);

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

}  // namespace flicker
