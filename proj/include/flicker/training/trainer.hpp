#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "flicker/agents/qnet.hpp"
#include "flicker/envs/world.hpp"
#include "flicker/training/config.hpp"
#include "flicker/training/episode.hpp"
#include "flicker/training/learner.hpp"
#include "flicker/training/rollout.hpp"

namespace flicker {

// Everything a training run needs besides the seed.
struct TrainSetup {
  std::shared_ptr<const Scenario> scenario;
  DomainMode eval_mode = DomainMode::Ood1;
  Method method = Method::Flicker;
  bool domain_aware = true;
  std::vector<int> n_train;
  TrainConfig train;
  ModelConfig model;
};

// One row of the metric log.
struct EvalRow {
  std::int64_t step = 0;
  double mean_reward = 0.0;
  std::vector<double> rewards;
  double epsilon = 0.0;
  double loss_ema = 0.0;
  std::int64_t updates = 0;
  std::int64_t episodes = 0;
};

// Worker threads for parallel rollouts: FLICKERSIM_THREADS when set, else the
// hardware concurrency, never more than `jobs`.
std::size_t worker_count(std::size_t jobs);

// Runs fn(i) for i in [0, n) on up to worker_count(n) threads. Exceptions
// are rethrown on the caller, the lowest index first.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Greedy evaluation episodes: DAED for the flicker method (plain ED when not
// domain aware), full observations for the backbone.
std::vector<EpisodeResult> evaluate(const Env& env, const QNet& net, const ParameterSet& params,
                                    const TrainSetup& setup, const std::vector<std::uint64_t>& seeds,
                                    bool record_attention = false);

// Evaluation seeds of a run: fixed per run seed so every eval row sees the
// same episodes.
std::vector<std::uint64_t> eval_seeds(std::uint64_t run_seed, int count);

// The training loop of one seed. Writes into `out_dir`:
//   metrics.jsonl      one JSON object per evaluation, appended
//   model.ckpt         latest parameters
//   trainer_state.bin  everything needed to resume bit-exactly
class Trainer {
 public:
  Trainer(TrainSetup setup, std::uint64_t seed, std::filesystem::path out_dir);

  // Reopens a run from out_dir/trainer_state.bin. Throws when the stored
  // model differs from setup's.
  static Trainer resume(TrainSetup setup, std::filesystem::path out_dir);

  // Trains until at least max_timesteps env steps (the config's value when
  // negative). Evaluates at step 0 on a fresh run, then whenever
  // test_interval steps have passed since the last evaluation.
  void run(std::int64_t max_timesteps = -1);

  std::int64_t t_env() const { return t_env_; }
  std::int64_t episodes() const { return episodes_; }
  const std::vector<EvalRow>& rows() const { return rows_; }
  const Learner& learner() const { return learner_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const TrainSetup& setup() const { return setup_; }

  void save_state() const;

  // Called after every evaluation row is logged.
  std::function<void(const EvalRow&)> on_eval;

 private:
  Trainer(TrainSetup setup, std::uint64_t seed, std::filesystem::path out_dir, bool fresh);
  void collect();
  void learn(std::int64_t new_steps);
  void run_eval();
  void append_row(const EvalRow& row) const;

  TrainSetup setup_;
  std::uint64_t seed_;
  std::filesystem::path out_dir_;
  Env train_env_;
  Env eval_env_;
  Learner learner_;
  ReplayBuffer buffer_;
  Rng sample_rng_;
  std::int64_t t_env_ = 0;
  std::int64_t episodes_ = 0;
  std::int64_t pending_steps_ = 0;
  std::int64_t last_test_ = -1;
  std::int64_t last_checkpoint_ = 0;
  double loss_ema_ = 0.0;
  bool has_loss_ = false;
  std::vector<EvalRow> rows_;
};

std::vector<EvalRow> read_metric_log(const std::filesystem::path& path);

}  // namespace flicker
