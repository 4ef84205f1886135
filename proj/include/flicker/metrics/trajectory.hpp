#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "flicker/envs/world.hpp"
#include "flicker/training/rollout.hpp"

namespace flicker {

inline constexpr const char* kTrajectorySchema = "flickersim.trajectory";
inline constexpr int kTrajectoryVersion = 1;

struct TrajectoryHeader {
  std::string env;
  std::string domain_mode;
  std::uint64_t seed = 0;  // Env::reset(seed) recreates the episode
  std::string backbone;
  std::string method;
  bool domain_aware = true;
  std::vector<std::string> types;
  std::vector<int> n_train;
  bool attention = false;
};

struct TrajectoryEntity {
  std::int64_t id = 0;
  int kind = 0;
  double x = 0, y = 0, vx = 0, vy = 0;
};

struct TrajectoryAgent {
  std::int64_t id = 0;
  int action = 0;
  std::vector<std::int64_t> kept;  // entity ids the agent observed after dropout
  std::vector<double> attention;   // weights over `kept`, attention backbone only
};

struct TrajectoryStep {
  int t = 0;
  std::vector<TrajectoryEntity> entities;  // state before the actions
  std::vector<TrajectoryAgent> agents;
  double reward = 0.0;
  bool done = false;
};

struct Trajectory {
  TrajectoryHeader header;
  std::vector<TrajectoryStep> steps;
};

// Converts a rollout. Attention weights are included iff the header says so;
// throws if the episode carries attention for some steps but not all.
Trajectory make_trajectory(const TrajectoryHeader& header, const EpisodeResult& episode, std::size_t type_count);

// JSON lines: the header object first, then one object per step.
void write_trajectory(std::ostream& os, const Trajectory& traj);
Trajectory read_trajectory(std::istream& is);
void export_trajectory(const Trajectory& traj, const std::filesystem::path& path);
Trajectory load_trajectory(const std::filesystem::path& path);

struct ReplayReport {
  std::size_t steps = 0;
  std::size_t mismatches = 0;  // steps whose state or reward differ from the dump
  double max_reward_error = 0.0;
  // Steps whose replayed reward differs from the independent reward oracle.
  std::size_t oracle_mismatches = 0;
  std::string first_mismatch;
};

// Resets env with the dump's seed, plays the recorded actions and compares
// every entity state and reward exactly; each replayed reward is also checked
// against the independent reward oracle.
ReplayReport replay_trajectory(const Env& env, const Trajectory& traj);

}  // namespace flicker
