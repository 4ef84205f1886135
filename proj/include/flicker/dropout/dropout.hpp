#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flicker/common/rng.hpp"
#include "flicker/envs/world.hpp"
#include "flicker/tensor/tensor.hpp"

namespace flicker {

// One agent's view: a row per visible entity, in entity-id order.
struct TokenMatrix {
  Tensor rows;
  std::vector<std::int64_t> ids;
  std::vector<int> kinds;
  // Row of each entry in the source observation table.
  std::vector<std::uint32_t> source;
  std::size_t self = 0;  // row holding the viewing agent
  std::vector<int> type_counts;

  std::size_t size() const { return ids.size(); }
};

// Full (undropped) view of agent number `agent` (action order).
TokenMatrix agent_view(const Observation& obs, std::size_t agent, std::size_t type_count);

// Removes exactly delta[l] rows of each type l, uniformly without replacement,
// never the viewer's own row. Row order is preserved.
TokenMatrix ed(const TokenMatrix& x, std::span<const int> delta, Rng& rng);

// max(0, observed - n_train) per type.
std::vector<int> daed_delta(std::span<const int> observed, std::span<const int> n_train);

// Clamps a drop vector so the viewer keeps its own row: delta[own] <= count - 1,
// delta[l] <= count otherwise.
std::vector<int> cap_delta(std::span<const int> delta, std::span<const int> observed, int own_type);

// Training-time flicker: per-episode counts N^ ~ U(1, N^train) per type and
// per-step drop counts Delta_t ~ U(0, N^) per type.
class FlickerSchedule {
 public:
  FlickerSchedule(std::span<const int> n_train, Rng& rng);

  const std::vector<int>& episode_counts() const { return counts_; }
  std::vector<int> sample_delta(Rng& rng) const;

 private:
  std::vector<int> counts_;
};

// Inference-time step for one agent: full view, then DAED (or plain ED with
// Delta ~ U(0, N^inf) when domain_aware is off), re-drawn on every call.
TokenMatrix flicker_infer_step(const Observation& obs, std::size_t agent, std::span<const int> n_train,
                               bool domain_aware, std::size_t type_count, int agent_type, Rng& rng);

struct Prop1Estimate {
  double mean = 0.0;
  double bound = 0.0;
  double standard_error = 0.0;
};

// Monte Carlo estimate of E[sum_i |d(i)/N_A - Delta/N|] where each of N_A
// agents independently drops a uniform Delta-subset of N entities and d(i)
// counts the agents that dropped entity i; the bound is sqrt(Delta(N-Delta)/N_A).
Prop1Estimate prop1_verify(int n_agents, int n_entities, int delta, std::size_t samples, Rng& rng);

}  // namespace flicker
