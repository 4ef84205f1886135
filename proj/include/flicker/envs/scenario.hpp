#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flicker {

enum class EnvId { Tag, Spread, Guard, Repel, Adversary, Hunt };

std::string_view env_name(EnvId id);
EnvId parse_env(std::string_view name);

// How a non-agent entity moves each step.
enum class Behavior {
  Agent,         // driven by actions
  Static,        // landmark
  Chase,         // toward the closest agent
  Flee,          // away from the closest agent, clamped to the play area
  Wander,        // fixed heading re-drawn every wander_period ticks, clamped
  SeekLandmark,  // toward the landmark closest to any agent
};

std::string_view behavior_name(Behavior b);
Behavior parse_behavior(std::string_view name);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Initial placement: per-axis union of intervals (chosen with probability
// proportional to length), in units of the half-width B unless absolute.
// Edge placement picks one of the four sides uniformly and a uniform point on it.
struct SpawnRule {
  bool edge = false;
  bool absolute = false;
  std::vector<Interval> x;
  std::vector<Interval> y;
};

// Integer uniform on [lo, hi]; a fixed count has lo == hi.
struct CountRange {
  int lo = 0;
  int hi = 0;
  friend bool operator==(CountRange, CountRange) = default;
};

struct TypeDomain {
  CountRange init;
  CountRange intra;
};

// Entity-count domain: per-type initial and intra-trajectory counts.
struct DomainSpec {
  std::vector<TypeDomain> types;

  // Count bounds along a trajectory: lower = fewest initial entities,
  // upper = most initial plus most arrivals.
  std::vector<int> lower_bounds() const;
  std::vector<int> upper_bounds() const;
  void validate(std::size_t type_count) const;
};

enum class DomainMode { InDomain, Ood1, Ood2 };

std::string_view domain_mode_name(DomainMode m);
DomainMode parse_domain_mode(std::string_view name);

struct Physics {
  double dt = 0.1;
  double damping = 0.25;
  double mass = 1.0;
  double force = 5.0;
  // Heuristic speeds as fractions of the agent terminal speed force*dt/(mass*damping).
  double chase_speed = 0.9;
  double flee_speed = 0.7;
  double wander_speed = 0.7;
  double seek_speed = 0.9;
  int wander_period = 50;
  // Arrival ticks are uniform integers in [lo*t_max, hi*t_max].
  Interval arrival_window{0.1, 0.9};

  double agent_speed() const { return force * dt / (mass * damping); }
};

struct EntityType {
  std::string name;
  Behavior behavior = Behavior::Static;
  double radius = 0.05;
  SpawnRule init_spawn;
  SpawnRule intra_spawn;
};

struct Scenario {
  EnvId env = EnvId::Spread;
  double bound = 1.0;
  int t_max = 100;
  std::vector<EntityType> types;
  Physics physics;
  // Offset c in the boundary penalty 5^(|x| - c); unset means c = bound.
  std::optional<double> boundary_offset;
  DomainSpec in_domain;
  DomainSpec ood1;
  DomainSpec ood2;

  std::size_t type_count() const { return types.size(); }
  int agent_type() const;
  int type_index(std::string_view name) const;  // -1 if absent
  const DomainSpec& domain(DomainMode mode) const;
  double penalty_offset() const { return boundary_offset.value_or(bound); }
  // Observation row width: type one-hot, position, velocity.
  std::size_t feature_width() const { return types.size() + 4; }
  void validate() const;
};

}  // namespace flicker
