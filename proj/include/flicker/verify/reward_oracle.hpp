#pragma once

#include <span>
#include <vector>

#include "flicker/envs/entity.hpp"
#include "flicker/envs/scenario.hpp"

namespace flicker {

// Bodies of one role as parallel arrays.
struct Bodies {
  std::vector<double> x, y, r;
  std::size_t size() const { return x.size(); }
};

// Straight-line restatement of the six reward formulas over plain arrays,
// kept separate from compute_reward so the two can check each other.
double oracle_reward(EnvId env, const Bodies& agents, const Bodies& adversaries, const Bodies& targets,
                     double bound, double offset);

// Splits active entities by role and calls oracle_reward.
double oracle_reward(const Scenario& scenario, std::span<const Entity> entities);

}  // namespace flicker
