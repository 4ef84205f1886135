#pragma once

#include <cstddef>
#include <string>

#include "flicker/tensor/graph.hpp"
#include "flicker/tensor/parameters.hpp"

namespace flicker {

class Rng;

// Affine map x W + b. Holds indices into a ParameterSet, so the same layer
// description works on a copied (target) parameter set.
struct Linear {
  static constexpr std::size_t kNoBias = static_cast<std::size_t>(-1);
  std::size_t weight = 0;
  std::size_t bias = kNoBias;
  std::size_t in = 0;
  std::size_t out = 0;

  static Linear create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                       bool with_bias = true);
  Var operator()(Graph& g, ParameterSet& params, Var x) const;
};

// Gated recurrent unit with reset gate r, update gate z and candidate n:
//   r = sigmoid(x Wr + h Ur), z = sigmoid(x Wz + h Uz)
//   n = tanh(x Wn + r * (h Un)), h' = (1 - z) * n + z * h
struct GruCell {
  Linear input;
  Linear hidden;
  std::size_t size = 0;

  static GruCell create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t hidden,
                        Rng& rng);
  Var operator()(Graph& g, ParameterSet& params, Var x, Var h) const;
};

// Two-layer perceptron with a relu in between.
struct Mlp2 {
  Linear first;
  Linear second;

  static Mlp2 create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t hidden,
                     std::size_t out, Rng& rng);
  Var operator()(Graph& g, ParameterSet& params, Var x) const;
};

}  // namespace flicker
