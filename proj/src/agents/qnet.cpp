#include "flicker/agents/qnet.hpp"

#include <stdexcept>
#include <string>

#include "flicker/envs/world.hpp"

namespace flicker {

std::string_view backbone_name(Backbone b) { return b == Backbone::Mlp ? "mlp" : "attention"; }

Backbone parse_backbone(std::string_view name) {
  if (name == "mlp") return Backbone::Mlp;
  if (name == "attention" || name == "attn") return Backbone::Attention;
  throw std::invalid_argument("unknown backbone '" + std::string(name) + "' (expected mlp or attention)");
}

std::string_view hyper_activation_name(HyperActivation a) { return a == HyperActivation::Abs ? "abs" : "softmax"; }

HyperActivation parse_hyper_activation(std::string_view name) {
  if (name == "abs") return HyperActivation::Abs;
  if (name == "softmax") return HyperActivation::Softmax;
  throw std::invalid_argument("unknown hypernet activation '" + std::string(name) + "' (expected abs or softmax)");
}

std::size_t ModelConfig::slot_count() const {
  std::size_t n = 0;
  for (int s : slots) n += static_cast<std::size_t>(s);
  return n;
}

void ModelConfig::validate() const {
  if (feature_width != type_count + 4) {
    throw std::invalid_argument("model: feature width " + std::to_string(feature_width) + " does not match " +
                                std::to_string(type_count) + " entity types");
  }
  if (agent_type < 0 || static_cast<std::size_t>(agent_type) >= type_count) {
    throw std::invalid_argument("model: agent type out of range");
  }
  if (token_dim == 0 || rnn_input_dim == 0 || rnn_hidden_dim == 0 || mixing_embed_dim == 0 ||
      hypernet_embed_dim == 0) {
    throw std::invalid_argument("model: layer widths must be positive");
  }
  if (backbone == Backbone::Attention && (attention_heads == 0 || token_dim % attention_heads != 0)) {
    throw std::invalid_argument("model: attention heads must divide token_dim");
  }
  if (backbone == Backbone::Mlp) {
    if (slots.size() != type_count) throw std::invalid_argument("model: MLP backbone needs one slot count per type");
    if (slots[static_cast<std::size_t>(agent_type)] < 1) {
      throw std::invalid_argument("model: MLP backbone needs at least one agent slot");
    }
  }
}

void AgentStepInput::add_agent(const TokenMatrix& view, std::size_t row_offset, int last_action) {
  if (last_actions.empty()) last_actions = Tensor::matrix(0, kActionCount);
  self.push_back(static_cast<std::int64_t>(row_offset + view.source.at(view.self)));
  for (auto s : view.source) visible_rows.push_back(static_cast<std::int64_t>(row_offset + s));
  visible.offsets.push_back(visible_rows.size());
  auto& data = last_actions.storage();
  const std::size_t base = data.size();
  data.resize(base + kActionCount, 0.0);
  if (last_action >= 0) data[base + static_cast<std::size_t>(last_action)] = 1.0;
  last_actions = Tensor({self.size(), static_cast<std::size_t>(kActionCount)}, std::move(data));
}

QNet QNet::build(const ModelConfig& config, ParameterSet& params, Rng& rng) {
  config.validate();
  QNet net;
  net.config_ = config;
  const std::size_t d = config.token_dim;
  const std::size_t m = config.mixing_embed_dim;
  const std::size_t he = config.hypernet_embed_dim;
  net.tokenizer_ = Linear::create(params, "tokenizer", config.feature_width, d, rng);
  if (config.backbone == Backbone::Attention) {
    net.query_ = Linear::create(params, "attention.query", d, d, rng, false);
    net.key_ = Linear::create(params, "attention.key", d, d, rng, false);
    net.value_ = Linear::create(params, "attention.value", d, d, rng, false);
    net.encoder_ = Linear::create(params, "encoder", 2 * d + kActionCount, config.rnn_input_dim, rng);
  } else {
    net.encoder_ = Linear::create(params, "encoder", config.slot_width() + kActionCount, config.rnn_input_dim, rng);
  }
  net.rnn_ = GruCell::create(params, "rnn", config.rnn_input_dim, config.rnn_hidden_dim, rng);
  net.head_ = Linear::create(params, "q_head", config.rnn_hidden_dim, kActionCount, rng);
  net.hyper_w1_ = Mlp2::create(params, "mixer.hyper_w1", 2 * d, he, m, rng);
  net.hyper_b1_ = Linear::create(params, "mixer.hyper_b1", d, m, rng);
  net.hyper_w2_ = Mlp2::create(params, "mixer.hyper_w2", d, he, m, rng);
  net.value_fn_ = Mlp2::create(params, "mixer.value", d, m, 1, rng);
  return net;
}

Var QNet::tokenize(Graph& g, ParameterSet& params, Var entities) const {
  if (g.value(entities).cols() != config_.feature_width) {
    throw std::invalid_argument("tokenize: rows have width " + std::to_string(g.value(entities).cols()) +
                                ", expected " + std::to_string(config_.feature_width));
  }
  return g.relu(tokenizer_(g, params, entities));
}

Tensor QNet::slot_matrix(const AgentStepInput& in) const {
  const std::size_t fw = config_.feature_width;
  std::vector<std::size_t> block(config_.type_count, 0);
  for (std::size_t l = 1; l < block.size(); ++l) block[l] = block[l - 1] + static_cast<std::size_t>(config_.slots[l - 1]);
  Tensor out = Tensor::matrix(in.agent_count(), config_.slot_width());
  std::vector<std::size_t> used(config_.type_count);
  for (std::size_t i = 0; i < in.agent_count(); ++i) {
    std::fill(used.begin(), used.end(), 0);
    auto place = [&](std::int64_t row) {
      const auto kind = static_cast<std::size_t>(in.kinds.at(static_cast<std::size_t>(row)));
      if (used[kind] >= static_cast<std::size_t>(config_.slots[kind])) return;
      const std::size_t slot = block[kind] + used[kind]++;
      auto src = in.entities.row_span(static_cast<std::size_t>(row));
      std::copy(src.begin(), src.end(), out.row_span(i).begin() + static_cast<std::ptrdiff_t>(slot * fw));
    };
    place(in.self[i]);
    for (std::size_t p = in.visible.begin(i); p < in.visible.end(i); ++p) {
      if (in.visible_rows[p] != in.self[i]) place(in.visible_rows[p]);
    }
  }
  return out;
}

AgentOutput QNet::agents(Graph& g, ParameterSet& params, const AgentStepInput& in, Var tokens, Var hidden) const {
  const std::size_t n = in.agent_count();
  if (n == 0) throw std::invalid_argument("q_values: no agents");
  if (in.visible.count() != n || in.last_actions.rows() != n) {
    throw std::invalid_argument("q_values: inconsistent agent step input");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (in.visible.size(i) == 0) throw std::invalid_argument("q_values: empty observation");
  }
  if (g.value(hidden).rows() != n || g.value(hidden).cols() != config_.rnn_hidden_dim) {
    throw std::invalid_argument("q_values: hidden state " + g.value(hidden).shape_string() + " does not match " +
                                std::to_string(n) + " agents x " + std::to_string(config_.rnn_hidden_dim));
  }
  AgentOutput out;
  Var x;
  if (config_.backbone == Backbone::Attention) {
    Var self_tok = g.gather_rows(tokens, in.self);
    Var q = query_(g, params, self_tok);
    Var k = key_(g, params, tokens);
    Var v = value_(g, params, tokens);
    out.attention = g.attention(q, k, v, in.visible, config_.attention_heads, in.visible_rows);
    x = g.concat({out.attention, self_tok, g.constant(in.last_actions)});
  } else {
    Tensor slots = slot_matrix(in);
    Tensor joined = Tensor::matrix(n, slots.cols() + kActionCount);
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = joined.row_span(i);
      std::copy(slots.row_span(i).begin(), slots.row_span(i).end(), dst.begin());
      std::copy(in.last_actions.row_span(i).begin(), in.last_actions.row_span(i).end(),
                dst.begin() + static_cast<std::ptrdiff_t>(slots.cols()));
    }
    x = g.constant(std::move(joined));
  }
  Var z = g.relu(encoder_(g, params, x));
  out.hidden = rnn_(g, params, z, hidden);
  out.q = head_(g, params, out.hidden);
  return out;
}

Var QNet::mix(Graph& g, ParameterSet& params, Var tokens, const MixerIndex& index, Var chosen) const {
  const std::size_t agents = g.value(chosen).rows();
  if (agents == 0) throw std::invalid_argument("mix: no agent values");
  if (g.value(chosen).cols() != 1 || index.agent_groups.total() != agents || index.agent_group.size() != agents ||
      index.agent_rows.size() != agents || index.agent_groups.count() != index.entity_groups.count()) {
    throw std::invalid_argument("mix: agent values " + g.value(chosen).shape_string() +
                                " do not match the mixer index");
  }
  Var s = g.mean_pool(tokens, index.entity_groups);
  Var hyper_in = g.concat({g.gather_rows(s, index.agent_group), g.gather_rows(tokens, index.agent_rows)});
  Var w1 = hyper_w1_(g, params, hyper_in);
  w1 = config_.hyper_activation == HyperActivation::Abs ? g.abs(w1) : g.segment_softmax(w1, index.agent_groups);
  Var hidden = g.elu(g.add(g.segment_sum(g.mul(w1, chosen), index.agent_groups), hyper_b1_(g, params, s)));
  Var w2 = hyper_w2_(g, params, s);
  w2 = config_.hyper_activation == HyperActivation::Abs ? g.abs(w2) : g.softmax(w2);
  return g.add(g.row_sum(g.mul(hidden, w2)), value_fn_(g, params, s));
}

std::vector<std::int64_t> HiddenState::lookup(const std::vector<std::int64_t>& agent_ids) const {
  std::vector<std::int64_t> out;
  out.reserve(agent_ids.size());
  for (auto id : agent_ids) {
    std::int64_t row = -1;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == id) {
        row = static_cast<std::int64_t>(i);
        break;
      }
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace flicker
