#include "flicker/training/rollout.hpp"

#include <algorithm>
#include <stdexcept>

#include "flicker/dropout/dropout.hpp"

namespace flicker {

namespace {

enum StreamTag : std::uint64_t { kPlanStream = 101, kDeltaStream = 102, kDropStream = 103, kExploreStream = 104 };

}  // namespace

int greedy_action(std::span<const double> q) {
  return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

EpisodePlan flicker_plan(std::span<const int> n_train, const DomainSpec& train_domain, Rng& rng) {
  if (train_domain.types.size() != n_train.size()) throw std::invalid_argument("flicker plan: type count mismatch");
  FlickerSchedule schedule(n_train, rng);
  EpisodePlan plan;
  for (std::size_t l = 0; l < n_train.size(); ++l) {
    const int total = schedule.episode_counts()[l];
    const auto& intra = train_domain.types[l].intra;
    const int arrivals = std::min(static_cast<int>(rng.uniform_int(intra.lo, intra.hi)), total - 1);
    plan.init.push_back(total - arrivals);
    plan.intra.push_back(arrivals);
  }
  return plan;
}

EpisodeResult run_episode(const Env& env, const QNet& net, const ParameterSet& params, std::uint64_t seed,
                          const RolloutOptions& opt) {
  const Scenario& sc = env.scenario();
  const std::size_t L = sc.type_count();
  const int agent_type = sc.agent_type();
  const bool flicker = opt.method == Method::Flicker;
  const bool train = opt.mode == RolloutMode::Train;
  if (flicker && opt.n_train.size() != L) throw std::invalid_argument("rollout: n_train needs one entry per type");

  WorldState state;
  if (train && flicker) {
    if (!opt.train_domain) throw std::invalid_argument("rollout: flicker training needs the in-domain spec");
    Rng plan_rng = Rng::derive(seed, {kPlanStream});
    state = env.reset(seed, flicker_plan(opt.n_train, *opt.train_domain, plan_rng));
  } else {
    state = env.reset(seed);
  }

  // Train-time drop counts: one draw per step from U(0, N^), where N^ is the
  // episode's composition.
  std::vector<int> n_hat;
  if (train && flicker) {
    n_hat.assign(L, 0);
    for (const auto& e : state.entities) ++n_hat[static_cast<std::size_t>(e.kind)];
    for (const auto& p : state.pending) ++n_hat[static_cast<std::size_t>(p.entity.kind)];
  }
  Rng delta_rng = Rng::derive(seed, {kDeltaStream});
  Rng explore = Rng::derive(seed, {kExploreStream});
  const bool want_attention = opt.record_attention && net.config().backbone == Backbone::Attention;

  EpisodeResult result;
  result.record.seed = seed;
  HiddenState hidden;
  hidden.h = Tensor::matrix(0, net.config().rnn_hidden_dim);
  // ParameterSet is only read here; Graph::param needs a mutable reference for
  // gradient accumulation, which never happens during a rollout.
  ParameterSet& ps = const_cast<ParameterSet&>(params);

  bool done = false;
  while (!done) {
    const Observation obs = env.observe(state);
    StepRecord rec;
    rec.entities = obs.features;
    rec.ids = obs.ids;
    rec.kinds = obs.kinds;
    rec.counts = state.counts(L);
    const std::size_t n = obs.agent_rows.size();
    if (n == 0) throw std::runtime_error("rollout: no active agents at tick " + std::to_string(state.tick));

    std::vector<int> step_delta;
    if (train && flicker) {
      std::vector<int> draw;
      for (int k : n_hat) draw.push_back(static_cast<int>(delta_rng.uniform_int(0, k)));
      step_delta = std::move(draw);
    }

    AgentStepInput in;
    in.entities = obs.features;
    in.kinds = obs.kinds;
    for (std::size_t i = 0; i < n; ++i) {
      const std::int64_t id = obs.ids[obs.agent_rows[i]];
      Rng drop = Rng::derive(seed, {kDropStream, static_cast<std::uint64_t>(state.tick), static_cast<std::uint64_t>(id)});
      TokenMatrix full = agent_view(obs, i, L);
      TokenMatrix view;
      if (!flicker) {
        view = std::move(full);
      } else if (train) {
        view = ed(full, cap_delta(step_delta, full.type_counts, agent_type), drop);
      } else {
        view = flicker_infer_step(obs, i, opt.n_train, opt.domain_aware, L, agent_type, drop);
      }
      const Entity* e = state.find(id);
      const int last = e ? e->last_action : -1;
      in.add_agent(view, 0, last);
      rec.agent_ids.push_back(id);
      rec.self_rows.push_back(static_cast<std::uint32_t>(obs.agent_rows[i]));
      rec.last_actions.push_back(last);
      for (auto s : view.source) rec.kept_rows.push_back(s);
      rec.kept.offsets.push_back(rec.kept_rows.size());
    }

    const auto prev_rows = hidden.lookup(rec.agent_ids);
    for (auto r : prev_rows) rec.hidden_reset.push_back(r < 0 ? 1 : 0);

    std::vector<int> actions(n, 0);
    std::vector<std::vector<double>> attention;
    if (opt.random_policy) {
      for (auto& a : actions) a = static_cast<int>(explore.uniform_int(0, kActionCount - 1));
    } else {
      Graph g;
      Var tokens = net.tokenize(g, ps, g.constant(in.entities));
      AgentOutput out = net.agents(g, ps, in, tokens, g.gather_rows(g.constant(hidden.h), prev_rows));
      const Tensor& q = g.value(out.q);
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = q.row_span(i);
        actions[i] = greedy_action(row);
        if (train && opt.epsilon > 0.0 && explore.uniform() < opt.epsilon) {
          actions[i] = static_cast<int>(explore.uniform_int(0, kActionCount - 1));
        }
        if (want_attention) {
          auto w = g.attention_weights(out.attention, i, 0);
          attention.emplace_back(w.begin(), w.end());
        }
      }
      hidden.ids = rec.agent_ids;
      hidden.h = g.value(out.hidden);
    }
    if (want_attention) result.attention.push_back(std::move(attention));
    rec.actions = actions;

    StepResult r = env.step(state, actions);
    rec.reward = r.reward;
    rec.done = r.done;
    done = r.done;
    result.record.steps.push_back(std::move(rec));
  }
  return result;
}

}  // namespace flicker
