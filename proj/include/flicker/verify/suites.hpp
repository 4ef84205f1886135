#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "flicker/envs/scenario.hpp"

namespace flicker {

// Outcome of one property suite. `metrics` holds the headline numbers (worst
// error, cells checked, ...); `failures` the first few violations in words.
struct SuiteReport {
  std::string suite;
  std::size_t cases = 0;
  std::size_t violations = 0;
  double seconds = 0.0;
  std::map<std::string, double> metrics;
  std::vector<std::string> failures;

  bool passed() const { return violations == 0 && cases > 0; }
  void fail(std::string message);
  std::string json() const;
};

struct Prop1Row {
  int n_agents = 0;
  int n_entities = 0;
  int delta = 0;
  double empirical = 0.0;
  double bound = 0.0;
  double standard_error = 0.0;
  bool pass = false;
};

struct Prop1Grid {
  std::vector<int> n_agents{1, 2, 4, 8, 16};
  int n_min = 2;
  int n_max = 10;
  std::size_t samples = 100000;
  double se_multiplier = 3.0;
};

// Monte Carlo dispersion against sqrt(Delta (N - Delta) / N_A) on every grid
// cell; the Delta = 0 and Delta = N cells must be exactly zero.
SuiteReport verify_prop1(const Prop1Grid& grid, std::uint64_t seed, std::vector<Prop1Row>* rows = nullptr);

// Central-difference check of the full TD loss (tokenizer, attention or
// slot encoder, GRU, Q head, hypernetwork mixer) on random small networks
// and random episode batches with arrivals and dropped rows.
struct GradientSuiteOptions {
  std::size_t attention_instances = 100;
  std::size_t mlp_instances = 20;
  double tolerance = 1e-4;
  double eps = 1e-4;
};
SuiteReport verify_gradients(const GradientSuiteOptions& options, std::uint64_t seed);

// The six scenarios shipped as presets.
std::vector<std::shared_ptr<const Scenario>> shipped_scenarios();

// Production reward against the independent oracle on random states,
// compared with ==.
SuiteReport verify_reward_oracle(std::size_t states_per_env, std::uint64_t seed);

// DAED on random observations with up to `overload` times the training
// counts: kept count per type == min(observed, N^train), viewer kept, kept
// rows a subset of the observation in order.
SuiteReport verify_daed(std::size_t compositions, double overload, std::uint64_t seed);

}  // namespace flicker
