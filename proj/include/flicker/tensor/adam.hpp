#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "flicker/tensor/parameters.hpp"

namespace flicker {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected adaptive-moment descent over one ParameterSet. Moments are
// stored per parameter in the same order as the set.
class Adam {
 public:
  Adam() = default;
  Adam(const ParameterSet& params, AdamConfig config);

  void step(ParameterSet& params);
  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

  void save(std::ostream& os) const;
  void load(std::istream& is, const ParameterSet& params);

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace flicker
