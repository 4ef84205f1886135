#pragma once

#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <vector>

#include "flicker/agents/qnet.hpp"
#include "flicker/tensor/adam.hpp"
#include "flicker/training/config.hpp"
#include "flicker/training/episode.hpp"

namespace flicker {

using EpisodeBatch = std::vector<std::shared_ptr<const EpisodeRecord>>;

struct TdResult {
  double loss = 0.0;
  std::size_t samples = 0;  // (episode, step) pairs in the loss
  // Q_tot of the online net per episode and step, and the TD targets.
  std::vector<std::vector<double>> q_tot;
  std::vector<std::vector<double>> targets;
};

// Masked mean over every (episode, step) of (Q_tot - y)^2 with
// y = r + gamma * (1 - done) * Q_tot_target(next state, u'), where u' is each
// agent's online argmax (double_q) or the target argmax. The whole episode is
// unrolled through the recurrent cell. When `backward` is set the gradient is
// accumulated into online's parameter grads (target grads are never touched).
TdResult td_loss(const QNet& net, ParameterSet& online, const ParameterSet& target, const EpisodeBatch& batch,
                 double gamma, bool double_q, bool backward);

// Builds the same loss inside g (the target network is evaluated on a
// private graph) and returns the 1x1 loss node.
Var td_loss_graph(Graph& g, const QNet& net, ParameterSet& online, const ParameterSet& target,
                  const EpisodeBatch& batch, double gamma, bool double_q, TdResult* result = nullptr);

// Owns the online and target parameters and the optimizer.
class Learner {
 public:
  Learner(QNet net, ParameterSet params, const TrainConfig& config);

  const QNet& net() const { return net_; }
  ParameterSet& online() { return online_; }
  const ParameterSet& online() const { return online_; }
  const ParameterSet& target() const { return target_; }
  std::int64_t updates() const { return updates_; }

  struct Stats {
    double loss = 0.0;
    double grad_norm = 0.0;
  };
  // One gradient step; copies online into target every target_update_interval updates.
  Stats update(const EpisodeBatch& batch);

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  QNet net_;
  ParameterSet online_;
  ParameterSet target_;
  TrainConfig config_;
  Adam adam_;
  std::int64_t updates_ = 0;
};

}  // namespace flicker
