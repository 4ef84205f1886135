#include "flicker/tensor/layers.hpp"

#include <stdexcept>

#include "flicker/common/rng.hpp"

namespace flicker {

Linear Linear::create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                      bool with_bias) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight = params.add_uniform(name + ".weight", in, out, in, rng);
  if (with_bias) l.bias = params.add_uniform(name + ".bias", 1, out, in, rng);
  return l;
}

Var Linear::operator()(Graph& g, ParameterSet& params, Var x) const {
  if (g.value(x).cols() != in) {
    throw std::invalid_argument("linear '" + params[weight].name + "': expected width " + std::to_string(in) +
                                ", got " + g.value(x).shape_string());
  }
  Var y = g.matmul(x, g.param(params[weight]));
  return bias == kNoBias ? y : g.add(y, g.param(params[bias]));
}

GruCell GruCell::create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t hidden,
                        Rng& rng) {
  GruCell c;
  c.size = hidden;
  c.input = Linear::create(params, name + ".input", in, 3 * hidden, rng);
  // PyTorch-style init: both maps use 1/sqrt(hidden).
  c.hidden = Linear::create(params, name + ".hidden", hidden, 3 * hidden, rng);
  return c;
}

Var GruCell::operator()(Graph& g, ParameterSet& params, Var x, Var h) const {
  const std::size_t n = size;
  Var gx = input(g, params, x);
  Var gh = hidden(g, params, h);
  Var r = g.sigmoid(g.add(g.slice(gx, 0, n), g.slice(gh, 0, n)));
  Var z = g.sigmoid(g.add(g.slice(gx, n, n), g.slice(gh, n, n)));
  Var cand = g.tanh(g.add(g.slice(gx, 2 * n, n), g.mul(r, g.slice(gh, 2 * n, n))));
  return g.add(cand, g.mul(z, g.sub(h, cand)));
}

Mlp2 Mlp2::create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t hidden,
                  std::size_t out, Rng& rng) {
  return Mlp2{Linear::create(params, name + ".0", in, hidden, rng),
              Linear::create(params, name + ".1", hidden, out, rng)};
}

Var Mlp2::operator()(Graph& g, ParameterSet& params, Var x) const {
  return second(g, params, g.relu(first(g, params, x)));
}

}  // namespace flicker
