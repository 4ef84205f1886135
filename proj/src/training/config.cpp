#include "flicker/training/config.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace flicker {

std::string_view method_name(Method m) { return m == Method::Flicker ? "flicker" : "backbone"; }

Method parse_method(std::string_view name) {
  if (name == "flicker") return Method::Flicker;
  if (name == "backbone" || name == "qmix") return Method::Backbone;
  throw std::invalid_argument("unknown method '" + std::string(name) + "' (expected backbone or flicker)");
}

double TrainConfig::epsilon(std::int64_t t) const {
  if (t < 0) throw std::invalid_argument("epsilon: negative step");
  if (t >= epsilon_anneal_steps) return epsilon_finish;
  const double frac = static_cast<double>(t) / static_cast<double>(epsilon_anneal_steps);
  return epsilon_start + frac * (epsilon_finish - epsilon_start);
}

void TrainConfig::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("train config: ") + what); };
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) || !(epsilon_finish >= 0.0)) fail("epsilon must lie in [0, 1]");
  if (epsilon_finish > epsilon_start) fail("epsilon_finish must not exceed epsilon_start");
  if (epsilon_anneal_steps <= 0) fail("epsilon_anneal_steps must be positive");
  if (test_interval <= 0) fail("test_interval must be positive");
  if (test_episodes < 0) fail("test_episodes must be non-negative");
  if (parallel_envs < 1) fail("parallel_envs must be at least 1");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (buffer_size < batch_size) fail("buffer_size must be at least batch_size");
  if (max_timesteps < 0) fail("max_timesteps must be non-negative");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must lie in [0, 1)");
  if (target_update_interval < 1) fail("target_update_interval must be at least 1");
  if (learn_every < 0) fail("learn_every must be non-negative");
  if (!(grad_clip > 0.0)) fail("grad_clip must be positive");
  if (checkpoint_interval < 0) fail("checkpoint_interval must be non-negative");
}

}  // namespace flicker
