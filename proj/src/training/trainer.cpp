#include "flicker/training/trainer.hpp"

#include <cstdlib>
#include <exception>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>

#include <json.hpp>

#include "flicker/agents/checkpoint.hpp"
#include "flicker/common/binary_io.hpp"

namespace flicker {

namespace {

constexpr char kStateMagic[] = "FLKSTATE";
constexpr std::uint64_t kStateVersion = 1;
constexpr std::uint64_t kInitStream = 100;
constexpr std::uint64_t kEpisodeStream = 1;
constexpr std::uint64_t kEvalStream = 2;
constexpr std::uint64_t kSampleStream = 3;
constexpr double kLossSmoothing = 0.05;

Learner make_learner(const TrainSetup& setup, std::uint64_t seed) {
  ParameterSet params;
  Rng rng = Rng::derive(seed, {kInitStream});
  QNet net = QNet::build(setup.model, params, rng);
  return Learner(std::move(net), std::move(params), setup.train);
}

nlohmann::json row_json(const EvalRow& r) {
  return {{"step", r.step},         {"mean_reward", r.mean_reward}, {"rewards", r.rewards},
          {"epsilon", r.epsilon},   {"loss_ema", r.loss_ema},       {"updates", r.updates},
          {"episodes", r.episodes}};
}

}  // namespace

std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("FLICKERSIM_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) n = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("FLICKERSIM_THREADS must be a positive integer, got '") + env + "'");
    }
  }
  if (n == 0) n = 1;
  return std::max<std::size_t>(1, std::min(n, jobs));
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = worker_count(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<std::uint64_t> eval_seeds(std::uint64_t run_seed, int count) {
  std::vector<std::uint64_t> out;
  for (int k = 0; k < count; ++k) out.push_back(Rng::derive_seed(run_seed, {kEvalStream, static_cast<std::uint64_t>(k)}));
  return out;
}

std::vector<EpisodeResult> evaluate(const Env& env, const QNet& net, const ParameterSet& params,
                                    const TrainSetup& setup, const std::vector<std::uint64_t>& seeds,
                                    bool record_attention) {
  RolloutOptions opt;
  opt.mode = RolloutMode::Eval;
  opt.method = setup.method;
  opt.domain_aware = setup.domain_aware;
  opt.n_train = setup.n_train;
  opt.record_attention = record_attention;
  std::vector<EpisodeResult> out(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) { out[i] = run_episode(env, net, params, seeds[i], opt); });
  return out;
}

Trainer::Trainer(TrainSetup setup, std::uint64_t seed, std::filesystem::path out_dir)
    : Trainer(std::move(setup), seed, std::move(out_dir), true) {}

Trainer::Trainer(TrainSetup setup, std::uint64_t seed, std::filesystem::path out_dir, bool fresh)
    : setup_(std::move(setup)),
      seed_(seed),
      out_dir_(std::move(out_dir)),
      train_env_(setup_.scenario, setup_.scenario->in_domain),
      eval_env_(setup_.scenario, setup_.scenario->domain(setup_.eval_mode)),
      learner_(make_learner(setup_, seed)),
      buffer_(static_cast<std::size_t>(setup_.train.buffer_size)),
      sample_rng_(Rng::derive(seed, {kSampleStream})) {
  setup_.train.validate();
  if (setup_.n_train.size() != setup_.scenario->type_count()) {
    throw std::invalid_argument("trainer: n_train needs one entry per entity type");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir_, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out_dir_.string() + ": " + ec.message());
  if (fresh) {
    std::ofstream truncate(out_dir_ / "metrics.jsonl", std::ios::trunc);
    if (!truncate) throw std::runtime_error("cannot write " + (out_dir_ / "metrics.jsonl").string());
  }
}

Trainer Trainer::resume(TrainSetup setup, std::filesystem::path out_dir) {
  const auto path = out_dir / "trainer_state.bin";
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != kStateMagic) throw std::runtime_error(path.string() + ": not a trainer state file");
  if (io::read_u64(is) != kStateVersion) throw std::runtime_error(path.string() + ": unsupported state version");
  const std::uint64_t seed = io::read_u64(is);
  const ModelConfig stored = read_model_config(is);
  {
    std::ostringstream a, b;
    write_model_config(a, stored);
    write_model_config(b, setup.model);
    if (a.str() != b.str()) throw CheckpointMismatch(path.string() + ": stored model differs from the preset's");
  }
  Trainer t(std::move(setup), seed, out_dir, false);
  t.t_env_ = io::read_i64(is);
  t.episodes_ = io::read_i64(is);
  t.pending_steps_ = io::read_i64(is);
  t.last_test_ = io::read_i64(is);
  t.last_checkpoint_ = io::read_i64(is);
  t.loss_ema_ = io::read_f64(is);
  t.has_loss_ = io::read_u64(is) != 0;
  t.sample_rng_ = Rng::deserialize(io::read_string(is));
  t.learner_.load(is);
  t.buffer_.load(is);
  if (!is) throw std::runtime_error(path.string() + ": truncated trainer state");
  t.rows_ = read_metric_log(out_dir / "metrics.jsonl");
  return t;
}

void Trainer::save_state() const {
  save_checkpoint(out_dir_ / "model.ckpt", setup_.model, learner_.online());
  const auto path = out_dir_ / "trainer_state.bin";
  const auto tmp = out_dir_ / "trainer_state.bin.tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os.write(kStateMagic, 8);
    io::write_u64(os, kStateVersion);
    io::write_u64(os, seed_);
    write_model_config(os, setup_.model);
    io::write_i64(os, t_env_);
    io::write_i64(os, episodes_);
    io::write_i64(os, pending_steps_);
    io::write_i64(os, last_test_);
    io::write_i64(os, last_checkpoint_);
    io::write_f64(os, loss_ema_);
    io::write_u64(os, has_loss_ ? 1 : 0);
    io::write_string(os, sample_rng_.serialize());
    learner_.save(os);
    buffer_.save(os);
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void Trainer::run(std::int64_t max_timesteps) {
  const std::int64_t limit = max_timesteps < 0 ? setup_.train.max_timesteps : max_timesteps;
  if (last_test_ < 0) {
    run_eval();
    save_state();
  }
  while (t_env_ < limit) {
    collect();
    if (t_env_ - last_test_ >= setup_.train.test_interval) run_eval();
    if (setup_.train.checkpoint_interval > 0 && t_env_ - last_checkpoint_ >= setup_.train.checkpoint_interval) {
      last_checkpoint_ = t_env_;
      save_state();
    }
  }
  save_state();
}

void Trainer::collect() {
  const auto n = static_cast<std::size_t>(setup_.train.parallel_envs);
  RolloutOptions opt;
  opt.mode = RolloutMode::Train;
  opt.method = setup_.method;
  opt.domain_aware = setup_.domain_aware;
  opt.n_train = setup_.n_train;
  opt.train_domain = &setup_.scenario->in_domain;
  opt.epsilon = setup_.train.epsilon(t_env_);
  std::vector<EpisodeResult> results(n);
  parallel_for(n, [&](std::size_t i) {
    const auto seed = Rng::derive_seed(seed_, {kEpisodeStream, static_cast<std::uint64_t>(episodes_) + i});
    results[i] = run_episode(train_env_, learner_.net(), learner_.online(), seed, opt);
  });
  std::int64_t steps = 0;
  for (auto& r : results) {
    steps += static_cast<std::int64_t>(r.record.steps.size());
    buffer_.add(std::make_shared<const EpisodeRecord>(std::move(r.record)));
  }
  episodes_ += static_cast<std::int64_t>(n);
  t_env_ += steps;
  learn(steps);
}

void Trainer::learn(std::int64_t new_steps) {
  std::int64_t updates = 1;
  if (setup_.train.learn_every > 0) {
    pending_steps_ += new_steps;
    updates = pending_steps_ / setup_.train.learn_every;
    pending_steps_ %= setup_.train.learn_every;
  }
  const auto batch = static_cast<std::size_t>(setup_.train.batch_size);
  for (std::int64_t u = 0; u < updates; ++u) {
    if (buffer_.size() < batch) return;
    const auto stats = learner_.update(buffer_.sample(batch, sample_rng_));
    loss_ema_ = has_loss_ ? (1.0 - kLossSmoothing) * loss_ema_ + kLossSmoothing * stats.loss : stats.loss;
    has_loss_ = true;
  }
}

void Trainer::run_eval() {
  const auto seeds = eval_seeds(seed_, setup_.train.test_episodes);
  const auto results = evaluate(eval_env_, learner_.net(), learner_.online(), setup_, seeds);
  EvalRow row;
  row.step = t_env_;
  for (const auto& r : results) row.rewards.push_back(r.record.total_reward());
  double sum = 0.0;
  for (double v : row.rewards) sum += v;
  row.mean_reward = row.rewards.empty() ? 0.0 : sum / static_cast<double>(row.rewards.size());
  row.epsilon = setup_.train.epsilon(t_env_);
  row.loss_ema = loss_ema_;
  row.updates = learner_.updates();
  row.episodes = episodes_;
  last_test_ = t_env_;
  append_row(row);
  rows_.push_back(std::move(row));
  if (on_eval) on_eval(rows_.back());
}

void Trainer::append_row(const EvalRow& row) const {
  const auto path = out_dir_ / "metrics.jsonl";
  std::ofstream os(path, std::ios::app);
  if (!os) throw std::runtime_error("cannot append to " + path.string());
  os << row_json(row).dump() << '\n';
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<EvalRow> read_metric_log(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<EvalRow> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EvalRow r;
      r.step = j.at("step").get<std::int64_t>();
      r.mean_reward = j.at("mean_reward").get<double>();
      r.rewards = j.at("rewards").get<std::vector<double>>();
      r.epsilon = j.at("epsilon").get<double>();
      r.loss_ema = j.at("loss_ema").get<double>();
      r.updates = j.at("updates").get<std::int64_t>();
      r.episodes = j.at("episodes").get<std::int64_t>();
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace flicker
