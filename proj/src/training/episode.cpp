#include "flicker/training/episode.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "flicker/common/binary_io.hpp"

namespace flicker {

double EpisodeRecord::total_reward() const {
  double s = 0.0;
  for (const auto& st : steps) s += st.reward;
  return s;
}

void EpisodeRecord::validate() const {
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const StepRecord& s = steps[t];
    auto fail = [&](const std::string& what) {
      throw std::invalid_argument("episode " + std::to_string(seed) + " step " + std::to_string(t) + ": " + what);
    };
    const std::size_t n = s.agent_count();
    if (s.entities.rows() != s.ids.size() || s.kinds.size() != s.ids.size()) fail("entity table lengths differ");
    if (s.self_rows.size() != n || s.last_actions.size() != n || s.actions.size() != n ||
        s.hidden_reset.size() != n || s.kept.count() != n || s.kept.total() != s.kept_rows.size()) {
      fail("per-agent sequences differ in length");
    }
    for (auto r : s.kept_rows) {
      if (r >= s.ids.size()) fail("kept row out of range");
    }
    for (auto r : s.self_rows) {
      if (r >= s.ids.size()) fail("self row out of range");
    }
    if (!std::isfinite(s.reward)) fail("non-finite reward");
    if (s.done != (t + 1 == steps.size())) fail("done flag must mark exactly the last step");
  }
}

namespace {

void write_u32s(std::ostream& os, const std::vector<std::uint32_t>& v) {
  io::write_u64(os, v.size());
  for (auto x : v) io::write_u64(os, x);
}

std::vector<std::uint32_t> read_u32s(std::istream& is) {
  std::vector<std::uint32_t> v(io::read_u64(is));
  for (auto& x : v) x = static_cast<std::uint32_t>(io::read_u64(is));
  return v;
}

template <class T>
void write_ints(std::ostream& os, const std::vector<T>& v) {
  io::write_u64(os, v.size());
  for (auto x : v) io::write_i64(os, static_cast<std::int64_t>(x));
}

template <class T>
std::vector<T> read_ints(std::istream& is) {
  const auto n = io::read_u64(is);
  if (n > (1ull << 32)) throw std::runtime_error("episode record: implausible length");
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(io::read_i64(is));
  return v;
}

}  // namespace

void write_episode(std::ostream& os, const EpisodeRecord& ep) {
  io::write_u64(os, ep.seed);
  io::write_u64(os, ep.steps.size());
  for (const auto& s : ep.steps) {
    io::write_tensor(os, s.entities);
    io::write_i64s(os, s.ids);
    write_ints(os, s.kinds);
    write_ints(os, s.counts);
    io::write_i64s(os, s.agent_ids);
    write_u32s(os, s.self_rows);
    write_ints(os, s.last_actions);
    write_ints(os, s.actions);
    write_ints(os, s.hidden_reset);
    write_ints(os, s.kept.offsets);
    write_u32s(os, s.kept_rows);
    io::write_f64(os, s.reward);
    io::write_u64(os, s.done ? 1 : 0);
  }
}

EpisodeRecord read_episode(std::istream& is) {
  EpisodeRecord ep;
  ep.seed = io::read_u64(is);
  const auto n = io::read_u64(is);
  if (n > (1ull << 24)) throw std::runtime_error("episode record: implausible step count");
  ep.steps.resize(n);
  for (auto& s : ep.steps) {
    s.entities = io::read_tensor(is);
    s.ids = io::read_i64s(is);
    s.kinds = read_ints<int>(is);
    s.counts = read_ints<int>(is);
    s.agent_ids = io::read_i64s(is);
    s.self_rows = read_u32s(is);
    s.last_actions = read_ints<int>(is);
    s.actions = read_ints<int>(is);
    s.hidden_reset = read_ints<std::uint8_t>(is);
    s.kept.offsets = read_ints<std::size_t>(is);
    s.kept_rows = read_u32s(is);
    s.reward = io::read_f64(is);
    s.done = io::read_u64(is) != 0;
  }
  ep.validate();
  return ep;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer: capacity must be positive");
}

void ReplayBuffer::add(std::shared_ptr<const EpisodeRecord> ep) {
  if (!ep) throw std::invalid_argument("replay buffer: null episode");
  if (items_.size() < capacity_) {
    items_.push_back(std::move(ep));
    return;
  }
  items_[head_] = std::move(ep);
  head_ = (head_ + 1) % capacity_;
}

const EpisodeRecord& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("replay buffer: index out of range");
  return *items_[(head_ + i) % items_.size()];
}

std::vector<std::shared_ptr<const EpisodeRecord>> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  if (count > items_.size()) {
    throw std::invalid_argument("replay buffer: cannot sample " + std::to_string(count) + " of " +
                                std::to_string(items_.size()) + " episodes");
  }
  std::vector<std::size_t> idx(items_.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::shared_ptr<const EpisodeRecord>> out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                            static_cast<std::int64_t>(idx.size()) - 1));
    std::swap(idx[i], idx[j]);
    out.push_back(items_[(head_ + idx[i]) % items_.size()]);
  }
  return out;
}

void ReplayBuffer::save(std::ostream& os) const {
  io::write_u64(os, capacity_);
  io::write_u64(os, items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) write_episode(os, at(i));
}

void ReplayBuffer::load(std::istream& is) {
  const auto cap = io::read_u64(is);
  if (cap != capacity_) {
    throw std::runtime_error("replay buffer: stored capacity " + std::to_string(cap) + " differs from " +
                             std::to_string(capacity_));
  }
  const auto n = io::read_u64(is);
  if (n > capacity_) throw std::runtime_error("replay buffer: stored size exceeds capacity");
  items_.clear();
  head_ = 0;
  for (std::size_t i = 0; i < n; ++i) items_.push_back(std::make_shared<EpisodeRecord>(read_episode(is)));
}

}  // namespace flicker
