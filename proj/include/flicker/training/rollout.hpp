#pragma once

#include <cstdint>
#include <vector>

#include "flicker/agents/qnet.hpp"
#include "flicker/envs/world.hpp"
#include "flicker/training/config.hpp"
#include "flicker/training/episode.hpp"

namespace flicker {

enum class RolloutMode { Train, Eval };

struct RolloutOptions {
  RolloutMode mode = RolloutMode::Eval;
  Method method = Method::Flicker;
  bool domain_aware = true;
  std::vector<int> n_train;
  // Train mode with the flicker method: the in-domain spec whose intra counts
  // bound the arrivals of each sampled composition.
  const DomainSpec* train_domain = nullptr;
  double epsilon = 0.0;
  // Ignore the network and act uniformly at random.
  bool random_policy = false;
  bool record_attention = false;
};

struct EpisodeResult {
  EpisodeRecord record;
  // [step][agent][kept position]: attention of the agent's query over its
  // kept rows (attention backbone, when requested).
  std::vector<std::vector<std::vector<double>>> attention;
};

// Composition for a flicker training episode: per type, N^ ~ U(1, N^train)
// entities in total, of which min(intra draw, N^ - 1) arrive mid-episode.
EpisodePlan flicker_plan(std::span<const int> n_train, const DomainSpec& train_domain, Rng& rng);

// Plays one episode. Every random choice comes from streams derived from
// `seed`, so (env, network, options, seed) fixes the result.
EpisodeResult run_episode(const Env& env, const QNet& net, const ParameterSet& params, std::uint64_t seed,
                          const RolloutOptions& options);

// Index of the largest value, the first on ties.
int greedy_action(std::span<const double> q);

}  // namespace flicker
