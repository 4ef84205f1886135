#pragma once

#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <vector>

#include "flicker/common/rng.hpp"
#include "flicker/tensor/graph.hpp"
#include "flicker/tensor/tensor.hpp"

namespace flicker {

// One environment step. Every agent's post-dropout observation is a list of
// rows of the shared entity table, so the full state is stored once.
struct StepRecord {
  Tensor entities;  // all active entities: type one-hot, pos, vel
  std::vector<std::int64_t> ids;
  std::vector<int> kinds;
  std::vector<int> counts;  // active entities per type

  // Per agent, in action order.
  std::vector<std::int64_t> agent_ids;
  std::vector<std::uint32_t> self_rows;
  std::vector<int> last_actions;  // -1 before the agent's first action
  std::vector<int> actions;
  std::vector<std::uint8_t> hidden_reset;  // agent seen for the first time
  Segments kept;                           // kept rows of agent i: kept_rows[kept.begin(i)..kept.end(i))
  std::vector<std::uint32_t> kept_rows;

  double reward = 0.0;
  bool done = false;

  std::size_t agent_count() const { return agent_ids.size(); }
};

struct EpisodeRecord {
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;

  double total_reward() const;
  // Throws std::invalid_argument when per-step sequences disagree in length
  // or a reward is not finite.
  void validate() const;
};

void write_episode(std::ostream& os, const EpisodeRecord& ep);
EpisodeRecord read_episode(std::istream& is);

// FIFO ring of whole episodes.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  void add(std::shared_ptr<const EpisodeRecord> ep);
  const EpisodeRecord& at(std::size_t i) const;  // 0 = oldest

  // `count` distinct episodes chosen uniformly.
  std::vector<std::shared_ptr<const EpisodeRecord>> sample(std::size_t count, Rng& rng) const;

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // slot of the oldest episode once full
  std::vector<std::shared_ptr<const EpisodeRecord>> items_;
};

}  // namespace flicker
