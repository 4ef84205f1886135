#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "flicker/common/rng.hpp"
#include "flicker/envs/entity.hpp"
#include "flicker/envs/scenario.hpp"
#include "flicker/tensor/tensor.hpp"

namespace flicker {

inline constexpr int kActionCount = 5;
enum Action : int { kNoAction = 0, kLeft = 1, kRight = 2, kDown = 3, kUp = 4 };

struct PendingArrival {
  int tick = 0;
  Entity entity;
};

struct WorldState {
  int tick = 0;
  // Active entities in activation order; ids increase along the vector.
  std::vector<Entity> entities;
  std::vector<PendingArrival> pending;
  std::int64_t next_id = 0;
  std::uint64_t seed = 0;
  Rng rng;

  // Indices into `entities` of all entities of one type, in id order.
  std::vector<std::size_t> of_type(int kind) const;
  std::vector<int> counts(std::size_t type_count) const;
  const Entity* find(std::int64_t id) const;
};

struct StepResult {
  double reward = 0.0;
  bool done = false;
  std::vector<std::int64_t> arrivals;
};

// Counts drawn for one episode.
struct EpisodePlan {
  std::vector<int> init;
  std::vector<int> intra;
};

// Joint observation. Features are absolute, so one table serves every agent;
// only the previous action differs per agent.
struct Observation {
  Tensor features;  // one row per active entity: type one-hot, pos, vel
  std::vector<std::int64_t> ids;
  std::vector<int> kinds;
  std::vector<std::size_t> agent_rows;  // row of each agent, in action order
  std::vector<std::array<double, kActionCount>> last_actions;
};

class Env {
 public:
  Env(std::shared_ptr<const Scenario> scenario, DomainSpec domain);

  const Scenario& scenario() const { return *scenario_; }
  const DomainSpec& domain() const { return domain_; }

  EpisodePlan sample_plan(Rng& rng) const;
  WorldState reset(std::uint64_t seed) const;
  WorldState reset(std::uint64_t seed, const EpisodePlan& plan) const;

  // actions[i] belongs to the i-th agent in id order.
  StepResult step(WorldState& state, std::span<const int> actions) const;

  // Velocity each heuristic entity will take this tick, indexed like
  // state.entities (zero for agents and static landmarks). Re-draws wander
  // headings when the tick is a multiple of the wander period.
  std::vector<Vec2> heuristic_policy(WorldState& state) const;

  Observation observe(const WorldState& state) const;
  double reward(const WorldState& state) const;

 private:
  Entity spawn(int kind, const SpawnRule& rule, Rng& rng) const;
  void activate(WorldState& state, Entity e) const;

  std::shared_ptr<const Scenario> scenario_;
  DomainSpec domain_;
};

// Reward of the scenario's environment on the given active entities.
double compute_reward(const Scenario& scenario, std::span<const Entity> entities);

// Per-agent boundary penalty used by Tag and Repel.
double boundary_penalty(double x, double y, double bound, double offset);

}  // namespace flicker
