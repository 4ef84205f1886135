#include "flicker/dropout/dropout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace flicker {

TokenMatrix agent_view(const Observation& obs, std::size_t agent, std::size_t type_count) {
  if (agent >= obs.agent_rows.size()) throw std::out_of_range("agent_view: agent index out of range");
  TokenMatrix x;
  x.rows = obs.features;
  x.ids = obs.ids;
  x.kinds = obs.kinds;
  x.source.resize(obs.ids.size());
  std::iota(x.source.begin(), x.source.end(), 0u);
  x.self = obs.agent_rows[agent];
  x.type_counts.assign(type_count, 0);
  for (int k : obs.kinds) ++x.type_counts.at(static_cast<std::size_t>(k));
  return x;
}

TokenMatrix ed(const TokenMatrix& x, std::span<const int> delta, Rng& rng) {
  if (delta.size() != x.type_counts.size()) {
    throw std::invalid_argument("ed: delta has " + std::to_string(delta.size()) + " types, view has " +
                                std::to_string(x.type_counts.size()));
  }
  std::vector<char> drop(x.size(), 0);
  std::vector<std::size_t> pool;
  for (std::size_t l = 0; l < delta.size(); ++l) {
    if (delta[l] == 0) continue;
    pool.clear();
    for (std::size_t r = 0; r < x.size(); ++r) {
      if (static_cast<std::size_t>(x.kinds[r]) == l && r != x.self) pool.push_back(r);
    }
    if (delta[l] < 0 || static_cast<std::size_t>(delta[l]) > pool.size()) {
      throw std::invalid_argument("ed: cannot drop " + std::to_string(delta[l]) + " rows of type " +
                                  std::to_string(l) + ", only " + std::to_string(pool.size()) + " droppable");
    }
    // Partial Fisher-Yates: the first delta[l] slots become the dropped set.
    for (std::size_t i = 0; i < static_cast<std::size_t>(delta[l]); ++i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                              static_cast<std::int64_t>(pool.size()) - 1));
      std::swap(pool[i], pool[j]);
      drop[pool[i]] = 1;
    }
  }

  TokenMatrix out;
  const std::size_t kept = x.size() - static_cast<std::size_t>(std::count(drop.begin(), drop.end(), 1));
  out.rows = Tensor::matrix(kept, x.rows.cols());
  out.type_counts.assign(x.type_counts.size(), 0);
  std::size_t w = 0;
  for (std::size_t r = 0; r < x.size(); ++r) {
    if (drop[r]) continue;
    auto src = x.rows.row_span(r);
    std::copy(src.begin(), src.end(), out.rows.row_span(w).begin());
    out.ids.push_back(x.ids[r]);
    out.kinds.push_back(x.kinds[r]);
    out.source.push_back(x.source[r]);
    if (r == x.self) out.self = w;
    ++out.type_counts[static_cast<std::size_t>(x.kinds[r])];
    ++w;
  }
  return out;
}

std::vector<int> daed_delta(std::span<const int> observed, std::span<const int> n_train) {
  if (observed.size() != n_train.size()) throw std::invalid_argument("daed_delta: type count mismatch");
  std::vector<int> out(observed.size());
  for (std::size_t l = 0; l < observed.size(); ++l) out[l] = std::max(0, observed[l] - n_train[l]);
  return out;
}

std::vector<int> cap_delta(std::span<const int> delta, std::span<const int> observed, int own_type) {
  std::vector<int> out(delta.size());
  for (std::size_t l = 0; l < delta.size(); ++l) {
    const int limit = static_cast<int>(l) == own_type ? std::max(0, observed[l] - 1) : observed[l];
    out[l] = std::clamp(delta[l], 0, limit);
  }
  return out;
}

FlickerSchedule::FlickerSchedule(std::span<const int> n_train, Rng& rng) {
  for (int n : n_train) {
    if (n < 1) throw std::invalid_argument("flicker schedule: every N^train entry must be at least 1");
    counts_.push_back(static_cast<int>(rng.uniform_int(1, n)));
  }
}

std::vector<int> FlickerSchedule::sample_delta(Rng& rng) const {
  std::vector<int> out;
  for (int n : counts_) out.push_back(static_cast<int>(rng.uniform_int(0, n)));
  return out;
}

TokenMatrix flicker_infer_step(const Observation& obs, std::size_t agent, std::span<const int> n_train,
                               bool domain_aware, std::size_t type_count, int agent_type, Rng& rng) {
  TokenMatrix full = agent_view(obs, agent, type_count);
  std::vector<int> delta;
  if (domain_aware) {
    delta = daed_delta(full.type_counts, n_train);
  } else {
    for (int n : full.type_counts) delta.push_back(static_cast<int>(rng.uniform_int(0, n)));
  }
  return ed(full, cap_delta(delta, full.type_counts, agent_type), rng);
}

Prop1Estimate prop1_verify(int n_agents, int n_entities, int delta, std::size_t samples, Rng& rng) {
  if (n_agents < 1 || n_entities < 1 || delta < 0 || delta > n_entities || samples < 2) {
    throw std::invalid_argument("prop1_verify: need N_A >= 1, N >= 1, 0 <= Delta <= N and at least 2 samples");
  }
  const double target = static_cast<double>(delta) / n_entities;
  std::vector<int> order(static_cast<std::size_t>(n_entities));
  std::vector<int> dropped(static_cast<std::size_t>(n_entities));
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    std::fill(dropped.begin(), dropped.end(), 0);
    for (int a = 0; a < n_agents; ++a) {
      std::iota(order.begin(), order.end(), 0);
      for (int i = 0; i < delta; ++i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(i, n_entities - 1));
        std::swap(order[static_cast<std::size_t>(i)], order[j]);
        ++dropped[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
      }
    }
    double dev = 0.0;
    for (int d : dropped) dev += std::fabs(static_cast<double>(d) / n_agents - target);
    sum += dev;
    sum_sq += dev * dev;
  }
  const double n = static_cast<double>(samples);
  Prop1Estimate est;
  est.mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0));
  est.standard_error = std::sqrt(var / n);
  est.bound = std::sqrt(static_cast<double>(delta) * (n_entities - delta) / n_agents);
  return est;
}

}  // namespace flicker
