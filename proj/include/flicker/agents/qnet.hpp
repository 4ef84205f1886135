#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flicker/dropout/dropout.hpp"
#include "flicker/tensor/graph.hpp"
#include "flicker/tensor/layers.hpp"
#include "flicker/tensor/parameters.hpp"

namespace flicker {

enum class Backbone { Mlp, Attention };
enum class HyperActivation { Abs, Softmax };

std::string_view backbone_name(Backbone b);
Backbone parse_backbone(std::string_view name);
std::string_view hyper_activation_name(HyperActivation a);
HyperActivation parse_hyper_activation(std::string_view name);

struct ModelConfig {
  Backbone backbone = Backbone::Attention;
  std::size_t feature_width = 6;
  std::size_t type_count = 2;
  int agent_type = 0;
  // MLP backbone: slot capacity per entity type (the in-domain maxima).
  std::vector<int> slots;
  std::size_t token_dim = 64;
  std::size_t attention_heads = 1;
  std::size_t rnn_input_dim = 64;
  std::size_t rnn_hidden_dim = 64;
  std::size_t mixing_embed_dim = 32;
  std::size_t hypernet_embed_dim = 64;
  HyperActivation hyper_activation = HyperActivation::Abs;

  std::size_t slot_count() const;
  std::size_t slot_width() const { return slot_count() * feature_width; }
  void validate() const;
};

// One decision step for a group of agents sharing an entity table. Agent i
// sees rows visible_rows[visible.begin(i) .. visible.end(i)) of `entities`.
struct AgentStepInput {
  Tensor entities;
  std::vector<int> kinds;
  std::vector<std::int64_t> self;
  Segments visible;
  std::vector<std::int64_t> visible_rows;
  Tensor last_actions;  // agents x 5

  std::size_t agent_count() const { return self.size(); }
  // Appends one agent whose view is `view`; entity rows of the view are
  // `view.source` shifted by `row_offset`.
  void add_agent(const TokenMatrix& view, std::size_t row_offset, int last_action);
};

// Which agents and entity rows belong to which episode, for the mixer.
struct MixerIndex {
  Segments entity_groups;
  Segments agent_groups;
  std::vector<std::int64_t> agent_group;  // episode of each agent
  std::vector<std::int64_t> agent_rows;   // entity row of each agent
};

struct AgentOutput {
  Var q;          // agents x 5
  Var hidden;     // agents x rnn_hidden_dim
  Var attention;  // attention node (attention backbone only)
};

// Architecture description. Parameters live in a separate ParameterSet so the
// same QNet drives both the online and the target parameters.
class QNet {
 public:
  QNet() = default;
  static QNet build(const ModelConfig& config, ParameterSet& params, Rng& rng);

  const ModelConfig& config() const { return config_; }

  // Shared entity tokenizer T(f (+) phi) = relu(row W + b), one token per row.
  Var tokenize(Graph& g, ParameterSet& params, Var entities) const;

  // MLP slot layout: the viewer's own row first in its type block, the rest of
  // each type in id order, absent slots zero, rows beyond capacity ignored.
  Tensor slot_matrix(const AgentStepInput& in) const;

  // tokens must be tokenize(in.entities) for the attention backbone (ignored otherwise).
  AgentOutput agents(Graph& g, ParameterSet& params, const AgentStepInput& in, Var tokens, Var hidden) const;

  // Monotonic mixing of the chosen per-agent values (agents x 1) into one
  // Q_tot per episode, conditioned on the pooled entity tokens.
  Var mix(Graph& g, ParameterSet& params, Var tokens, const MixerIndex& index, Var chosen) const;

 private:
  ModelConfig config_;
  Linear tokenizer_;
  Linear query_;
  Linear key_;
  Linear value_;
  Linear encoder_;
  GruCell rnn_;
  Linear head_;
  Mlp2 hyper_w1_;
  Linear hyper_b1_;
  Mlp2 hyper_w2_;
  Mlp2 value_fn_;
};

// Per-agent recurrent state keyed by entity id.
struct HiddenState {
  std::vector<std::int64_t> ids;
  Tensor h;

  // Row of each id in the current state, -1 for agents seen for the first time.
  std::vector<std::int64_t> lookup(const std::vector<std::int64_t>& agent_ids) const;
};

}  // namespace flicker
