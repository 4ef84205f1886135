#include "flicker/training/learner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "flicker/agents/checkpoint.hpp"
#include "flicker/common/binary_io.hpp"
#include "flicker/training/rollout.hpp"

namespace flicker {

namespace {

// Everything one network pass needs at step t for the episodes still running.
struct StepBatch {
  std::vector<std::size_t> episodes;  // batch index of each active episode
  AgentStepInput input;
  MixerIndex mixer;
  std::vector<std::int64_t> actions;
  std::vector<std::int64_t> prev_rows;  // hidden row of each agent at t-1, -1 to reset
  std::vector<std::size_t> agent_offset;
};

StepBatch build_step(const EpisodeBatch& batch, std::size_t t, const StepBatch* prev, std::size_t feature_width) {
  StepBatch sb;
  std::vector<std::size_t> entity_sizes, agent_sizes;
  std::vector<double> rows;
  std::size_t row_offset = 0;
  sb.input.last_actions = Tensor::matrix(0, kActionCount);
  std::vector<double> last;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const auto& steps = batch[e]->steps;
    if (t >= steps.size()) continue;
    const StepRecord& s = steps[t];
    if (s.entities.cols() != feature_width) {
      throw std::invalid_argument("td_loss: stored rows have width " + std::to_string(s.entities.cols()) +
                                  ", network expects " + std::to_string(feature_width));
    }
    const std::size_t local = sb.episodes.size();
    sb.episodes.push_back(e);
    sb.agent_offset.push_back(sb.input.self.size());
    rows.insert(rows.end(), s.entities.storage().begin(), s.entities.storage().end());
    sb.input.kinds.insert(sb.input.kinds.end(), s.kinds.begin(), s.kinds.end());

    // Hidden rows of the same agents one step earlier.
    std::size_t prev_local = 0;
    const StepRecord* before = t > 0 ? &steps[t - 1] : nullptr;
    if (before) {
      while (prev_local < prev->episodes.size() && prev->episodes[prev_local] != e) ++prev_local;
      if (prev_local == prev->episodes.size()) throw std::logic_error("td_loss: episode missing at previous step");
    }
    for (std::size_t i = 0; i < s.agent_count(); ++i) {
      sb.input.self.push_back(static_cast<std::int64_t>(row_offset + s.self_rows[i]));
      for (std::size_t p = s.kept.begin(i); p < s.kept.end(i); ++p) {
        sb.input.visible_rows.push_back(static_cast<std::int64_t>(row_offset + s.kept_rows[p]));
      }
      sb.input.visible.offsets.push_back(sb.input.visible_rows.size());
      for (int u = 0; u < kActionCount; ++u) last.push_back(u == s.last_actions[i] ? 1.0 : 0.0);
      sb.actions.push_back(s.actions[i]);
      sb.mixer.agent_group.push_back(static_cast<std::int64_t>(local));
      sb.mixer.agent_rows.push_back(static_cast<std::int64_t>(row_offset + s.self_rows[i]));

      std::int64_t h = -1;
      if (before && !s.hidden_reset[i]) {
        for (std::size_t j = 0; j < before->agent_count(); ++j) {
          if (before->agent_ids[j] == s.agent_ids[i]) {
            h = static_cast<std::int64_t>(prev->agent_offset[prev_local] + j);
            break;
          }
        }
      }
      sb.prev_rows.push_back(h);
    }
    entity_sizes.push_back(s.ids.size());
    agent_sizes.push_back(s.agent_count());
    row_offset += s.ids.size();
  }
  sb.input.entities = Tensor({row_offset, feature_width}, std::move(rows));
  sb.input.last_actions = Tensor({sb.input.self.size(), static_cast<std::size_t>(kActionCount)}, std::move(last));
  sb.mixer.entity_groups = Segments::from_sizes(entity_sizes);
  sb.mixer.agent_groups = Segments::from_sizes(agent_sizes);
  return sb;
}

}  // namespace

Var td_loss_graph(Graph& g, const QNet& net, ParameterSet& online, const ParameterSet& target,
                  const EpisodeBatch& batch, double gamma, bool double_q, TdResult* res_out) {
  if (batch.empty()) throw std::invalid_argument("td_loss: empty batch");
  std::size_t horizon = 0;
  for (const auto& ep : batch) {
    if (!ep || ep->steps.empty()) throw std::invalid_argument("td_loss: empty episode in batch");
    horizon = std::max(horizon, ep->steps.size());
  }
  const std::size_t fw = net.config().feature_width;
  const std::size_t hd = net.config().rnn_hidden_dim;
  ParameterSet& tgt = const_cast<ParameterSet&>(target);  // read only: no backward on this graph

  std::vector<StepBatch> steps;
  steps.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) steps.push_back(build_step(batch, t, t ? &steps[t - 1] : nullptr, fw));

  Graph gt;  // target, values only
  std::vector<Var> q_tot(horizon);
  std::vector<Tensor> online_q(horizon);
  std::vector<std::vector<double>> target_tot(horizon);
  Var h_prev = g.constant(Tensor::matrix(0, hd));
  Var ht_prev = gt.constant(Tensor::matrix(0, hd));
  for (std::size_t t = 0; t < horizon; ++t) {
    const StepBatch& sb = steps[t];
    Var ent = g.constant(sb.input.entities);
    Var tokens = net.tokenize(g, online, ent);
    AgentOutput out = net.agents(g, online, sb.input, tokens, g.gather_rows(h_prev, sb.prev_rows));
    q_tot[t] = net.mix(g, online, tokens, sb.mixer, g.pick(out.q, sb.actions));
    online_q[t] = g.value(out.q);
    h_prev = out.hidden;

    Var tt = net.tokenize(gt, tgt, gt.constant(sb.input.entities));
    AgentOutput tout = net.agents(gt, tgt, sb.input, tt, gt.gather_rows(ht_prev, sb.prev_rows));
    ht_prev = tout.hidden;
    if (t == 0) continue;  // the first state is never a successor
    const Tensor& tq = gt.value(tout.q);
    std::vector<std::int64_t> pick;
    for (std::size_t i = 0; i < tq.rows(); ++i) {
      pick.push_back(greedy_action(double_q ? online_q[t].row_span(i) : tq.row_span(i)));
    }
    const Tensor next = gt.value(net.mix(gt, tgt, tt, sb.mixer, gt.pick(tout.q, pick)));
    target_tot[t].assign(next.storage().begin(), next.storage().end());
  }

  TdResult local;
  TdResult& res = res_out ? *res_out : local;
  res = TdResult{};
  res.q_tot.resize(batch.size());
  res.targets.resize(batch.size());
  Var total;
  for (std::size_t t = 0; t < horizon; ++t) {
    const StepBatch& sb = steps[t];
    Tensor y = Tensor::matrix(sb.episodes.size(), 1);
    for (std::size_t k = 0; k < sb.episodes.size(); ++k) {
      const std::size_t e = sb.episodes[k];
      const StepRecord& s = batch[e]->steps[t];
      double next = 0.0;
      if (!s.done) {
        if (t + 1 >= batch[e]->steps.size()) throw std::invalid_argument("td_loss: episode ends without done flag");
        const auto& ns = steps[t + 1].episodes;
        const auto pos = static_cast<std::size_t>(std::find(ns.begin(), ns.end(), e) - ns.begin());
        next = target_tot[t + 1][pos];
      }
      y(k, 0) = s.reward + gamma * next;
      res.q_tot[e].push_back(g.value(q_tot[t])(k, 0));
      res.targets[e].push_back(y(k, 0));
    }
    Var err = g.sum(g.square(g.sub(q_tot[t], g.constant(std::move(y)))));
    total = total.valid() ? g.add(total, err) : err;
    res.samples += sb.episodes.size();
  }
  Var loss = g.scale(total, 1.0 / static_cast<double>(res.samples));
  res.loss = g.value(loss)(0, 0);
  return loss;
}

TdResult td_loss(const QNet& net, ParameterSet& online, const ParameterSet& target, const EpisodeBatch& batch,
                 double gamma, bool double_q, bool backward) {
  Graph g;
  TdResult res;
  Var loss = td_loss_graph(g, net, online, target, batch, gamma, double_q, &res);
  if (!std::isfinite(res.loss)) {
    std::string seeds;
    for (const auto& ep : batch) seeds += (seeds.empty() ? "" : ",") + std::to_string(ep->seed);
    throw std::runtime_error("td_loss: non-finite loss over " + std::to_string(res.samples) +
                             " samples (episode seeds " + seeds + ")");
  }
  if (backward) g.backward(loss);
  return res;
}

Learner::Learner(QNet net, ParameterSet params, const TrainConfig& config)
    : net_(std::move(net)),
      online_(std::move(params)),
      target_(online_),
      config_(config),
      adam_(online_, AdamConfig{config.lr, 0.9, 0.999, 1e-8}) {}

Learner::Stats Learner::update(const EpisodeBatch& batch) {
  online_.zero_grad();
  TdResult r = td_loss(net_, online_, target_, batch, config_.gamma, config_.double_q, true);
  Stats s;
  s.loss = r.loss;
  s.grad_norm = online_.clip_grad_norm(config_.grad_clip);
  adam_.step(online_);
  ++updates_;
  if (updates_ % config_.target_update_interval == 0) target_.copy_values_from(online_);
  return s;
}

void Learner::save(std::ostream& os) const {
  io::write_i64(os, updates_);
  write_parameters(os, online_);
  write_parameters(os, target_);
  adam_.save(os);
}

void Learner::load(std::istream& is) {
  updates_ = io::read_i64(is);
  read_parameters(is, online_);
  read_parameters(is, target_);
  adam_.load(is, online_);
}

}  // namespace flicker
