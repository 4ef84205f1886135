#pragma once

#include <cstdint>
#include <string_view>

namespace flicker {

// Backbone trains and evaluates on full observations; Flicker adds the
// per-step entity dropout schedule in training and DAED at inference.
enum class Method { Backbone, Flicker };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

struct TrainConfig {
  std::int64_t test_interval = 20000;
  int test_episodes = 15;
  double epsilon_start = 1.0;
  double epsilon_finish = 0.05;
  std::int64_t epsilon_anneal_steps = 500000;
  int parallel_envs = 8;
  int batch_size = 32;
  int buffer_size = 5000;
  std::int64_t max_timesteps = 3000000;
  double lr = 3e-4;
  double gamma = 0.99;
  int target_update_interval = 200;
  // Env steps between learner updates; 0 means one update per parallel rollout batch.
  std::int64_t learn_every = 0;
  double grad_clip = 10.0;
  bool double_q = true;
  // Env steps between checkpoints written during training; 0 writes only at the end.
  std::int64_t checkpoint_interval = 0;

  // Linear from start to finish over the anneal steps, then constant.
  double epsilon(std::int64_t t) const;
  void validate() const;
};

}  // namespace flicker
