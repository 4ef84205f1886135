#include "flicker/verify/suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "flicker/cli/preset.hpp"
#include "flicker/dropout/dropout.hpp"
#include "flicker/envs/world.hpp"
#include "flicker/tensor/gradcheck.hpp"
#include "flicker/training/learner.hpp"
#include "flicker/verify/reward_oracle.hpp"

namespace flicker {

namespace {

constexpr std::size_t kMaxFailureMessages = 20;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int pick(Rng& rng, int lo, int hi) { return static_cast<int>(rng.uniform_int(lo, hi)); }

// A random episode for a network with `types` entity types, agents being
// type 0. Agents may arrive at any step and views drop random non-self rows.
EpisodeRecord random_episode(Rng& rng, std::size_t types, std::uint64_t seed) {
  EpisodeRecord ep;
  ep.seed = seed;
  const int len = pick(rng, 1, 3);
  std::vector<std::int64_t> agents{0};
  std::vector<std::int64_t> others;
  std::vector<int> other_kind;
  std::int64_t next_id = 1;
  const int n_other = pick(rng, 1, 3);
  for (int i = 0; i < n_other; ++i) {
    others.push_back(next_id++);
    other_kind.push_back(pick(rng, 1, static_cast<int>(types) - 1));
  }
  std::vector<int> last_action{-1};
  for (int t = 0; t < len; ++t) {
    if (t > 0 && rng.bernoulli(0.5)) {
      agents.push_back(next_id++);
      last_action.push_back(-1);
    }
    StepRecord s;
    // Rows in id order: agents and others interleaved by id.
    std::vector<std::pair<std::int64_t, int>> rows;
    for (auto id : agents) rows.push_back({id, 0});
    for (std::size_t i = 0; i < others.size(); ++i) rows.push_back({others[i], other_kind[i]});
    std::sort(rows.begin(), rows.end());
    s.entities = Tensor::matrix(rows.size(), types + 4);
    s.counts.assign(types, 0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      s.ids.push_back(rows[r].first);
      s.kinds.push_back(rows[r].second);
      ++s.counts[static_cast<std::size_t>(rows[r].second)];
      s.entities(r, static_cast<std::size_t>(rows[r].second)) = 1.0;
      for (std::size_t c = types; c < types + 4; ++c) s.entities(r, c) = rng.uniform(-1.0, 1.0);
    }
    for (std::size_t a = 0; a < agents.size(); ++a) {
      std::uint32_t self = 0;
      while (s.ids[self] != agents[a]) ++self;
      s.agent_ids.push_back(agents[a]);
      s.self_rows.push_back(self);
      s.last_actions.push_back(last_action[a]);
      s.hidden_reset.push_back(last_action[a] < 0 ? 1 : 0);
      for (std::uint32_t r = 0; r < s.ids.size(); ++r) {
        if (r == self || rng.bernoulli(0.7)) s.kept_rows.push_back(r);
      }
      s.kept.offsets.push_back(s.kept_rows.size());
      const int u = pick(rng, 0, kActionCount - 1);
      s.actions.push_back(u);
      last_action[a] = u;
    }
    s.reward = rng.uniform(-2.0, 2.0);
    s.done = t + 1 == len;
    ep.steps.push_back(std::move(s));
  }
  return ep;
}

ModelConfig random_model(Rng& rng, Backbone backbone) {
  ModelConfig m;
  m.backbone = backbone;
  m.type_count = static_cast<std::size_t>(pick(rng, 2, 3));
  m.feature_width = m.type_count + 4;
  m.agent_type = 0;
  m.attention_heads = static_cast<std::size_t>(pick(rng, 1, 2));
  m.token_dim = m.attention_heads * static_cast<std::size_t>(pick(rng, 2, 5));
  m.rnn_input_dim = static_cast<std::size_t>(pick(rng, 3, 6));
  m.rnn_hidden_dim = static_cast<std::size_t>(pick(rng, 3, 6));
  m.mixing_embed_dim = static_cast<std::size_t>(pick(rng, 2, 4));
  m.hypernet_embed_dim = static_cast<std::size_t>(pick(rng, 3, 6));
  m.hyper_activation = rng.bernoulli(0.5) ? HyperActivation::Abs : HyperActivation::Softmax;
  m.slots.assign(m.type_count, 0);
  for (auto& s : m.slots) s = pick(rng, 1, 3);
  return m;
}

std::string fmt_g(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

std::string cell_name(int na, int n, int d) {
  return "N_A=" + std::to_string(na) + " N=" + std::to_string(n) + " Delta=" + std::to_string(d);
}

}  // namespace

void SuiteReport::fail(std::string message) {
  ++violations;
  if (failures.size() < kMaxFailureMessages) failures.push_back(std::move(message));
}

std::string SuiteReport::json() const {
  nlohmann::json j = {{"suite", suite},     {"passed", passed()},  {"cases", cases},
                      {"violations", violations}, {"seconds", seconds}, {"metrics", metrics},
                      {"failures", failures}};
  return j.dump();
}

SuiteReport verify_prop1(const Prop1Grid& grid, std::uint64_t seed, std::vector<Prop1Row>* rows) {
  Stopwatch clock;
  SuiteReport rep;
  rep.suite = "prop1";
  double worst_margin = -std::numeric_limits<double>::infinity();
  for (int na : grid.n_agents) {
    for (int n = grid.n_min; n <= grid.n_max; ++n) {
      for (int d = 0; d <= n; ++d) {
        Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(na), static_cast<std::uint64_t>(n),
                                     static_cast<std::uint64_t>(d)});
        const Prop1Estimate est = prop1_verify(na, n, d, grid.samples, rng);
        Prop1Row row{na, n, d, est.mean, est.bound, est.standard_error, true};
        ++rep.cases;
        if (d == 0 || d == n) {
          row.pass = est.mean == 0.0;
          if (!row.pass) rep.fail(cell_name(na, n, d) + ": boundary cell estimate " + std::to_string(est.mean));
        } else {
          const double limit = est.bound + grid.se_multiplier * est.standard_error;
          worst_margin = std::max(worst_margin, est.mean - limit);
          row.pass = est.mean <= limit;
          if (!row.pass) {
            rep.fail(cell_name(na, n, d) + ": estimate " + std::to_string(est.mean) + " exceeds " +
                     std::to_string(limit));
          }
        }
        if (rows) rows->push_back(row);
      }
    }
  }
  rep.metrics["samples_per_cell"] = static_cast<double>(grid.samples);
  rep.metrics["worst_margin"] = worst_margin;
  rep.seconds = clock.seconds();
  return rep;
}

SuiteReport verify_gradients(const GradientSuiteOptions& options, std::uint64_t seed) {
  Stopwatch clock;
  SuiteReport rep;
  rep.suite = "gradients";
  double worst = 0.0;
  std::size_t checked = 0, kinks = 0;
  const std::size_t total = options.attention_instances + options.mlp_instances;
  for (std::size_t i = 0; i < total; ++i) {
    const Backbone bb = i < options.attention_instances ? Backbone::Attention : Backbone::Mlp;
    Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(i)});
    const ModelConfig m = random_model(rng, bb);
    ParameterSet online;
    const QNet net = QNet::build(m, online, rng);
    ParameterSet target = online;
    for (auto& p : target) {
      for (double& v : p.value.storage()) v += rng.uniform(-0.2, 0.2);
    }
    std::vector<EpisodeRecord> episodes;
    const int n_episodes = pick(rng, 1, 3);
    for (int e = 0; e < n_episodes; ++e) episodes.push_back(random_episode(rng, m.type_count, rng.engine()()));
    // Plain-max targets depend on the target network only, so the loss is a
    // smooth function of the online parameters away from relu/abs kinks.
    const double gamma = rng.uniform(0.5, 0.99);
    // Rewards are set so every TD residual is drawn from U(-0.1, 0.1), as in a
    // nearly fitted batch; rounding noise in the probes scales with the
    // residual.
    {
      EpisodeBatch draft;
      for (const auto& ep : episodes) draft.push_back(std::make_shared<const EpisodeRecord>(ep));
      const TdResult pass = td_loss(net, online, target, draft, gamma, false, false);
      for (std::size_t e = 0; e < episodes.size(); ++e) {
        for (std::size_t t = 0; t < episodes[e].steps.size(); ++t) {
          StepRecord& st = episodes[e].steps[t];
          const double bootstrap = pass.targets[e][t] - st.reward;
          st.reward = pass.q_tot[e][t] - bootstrap - rng.uniform(-0.1, 0.1);
        }
      }
    }
    EpisodeBatch batch;
    for (auto& ep : episodes) batch.push_back(std::make_shared<const EpisodeRecord>(std::move(ep)));
    const GradCheckReport r = gradient_check(
        online, [&](Graph& g) { return td_loss_graph(g, net, online, target, batch, gamma, false); },
        options.eps);
    ++rep.cases;
    checked += r.checked;
    kinks += r.kinks;
    worst = std::max(worst, r.max_rel_error);
    if (!(r.max_rel_error <= options.tolerance)) {
      rep.fail("instance " + std::to_string(i) + " (" + std::string(backbone_name(bb)) + "): relative error " +
               std::to_string(r.max_rel_error) + " at " + r.worst + " (analytic " + fmt_g(r.worst_analytic) +
               ", numeric " + fmt_g(r.worst_numeric) + ")");
    }
  }
  rep.metrics["max_rel_error"] = worst;
  rep.metrics["coordinates_checked"] = static_cast<double>(checked);
  rep.metrics["kink_coordinates_skipped"] = static_cast<double>(kinks);
  rep.seconds = clock.seconds();
  return rep;
}

std::vector<std::shared_ptr<const Scenario>> shipped_scenarios() {
  std::vector<std::shared_ptr<const Scenario>> out;
  for (const char* env : {"tag", "spread", "guard", "repel", "adversary", "hunt"}) {
    out.push_back(load_preset(std::string(env) + "_flicker_mlp").scenario);
  }
  return out;
}

SuiteReport verify_reward_oracle(std::size_t states_per_env, std::uint64_t seed) {
  Stopwatch clock;
  SuiteReport rep;
  rep.suite = "reward-oracle";
  double worst = 0.0;
  for (const auto& sc : shipped_scenarios()) {
    Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(sc->env)});
    for (std::size_t i = 0; i < states_per_env; ++i) {
      std::vector<Entity> es;
      std::int64_t id = 0;
      for (std::size_t k = 0; k < sc->type_count(); ++k) {
        const int n = pick(rng, 1, 8);
        // Clustered states produce collisions; spread ones cross the boundary.
        const double spread = rng.bernoulli(0.3) ? 0.2 : 1.5;
        for (int j = 0; j < n; ++j) {
          Entity e;
          e.id = id++;
          e.kind = static_cast<int>(k);
          e.pos = {rng.uniform(-spread, spread) * sc->bound, rng.uniform(-spread, spread) * sc->bound};
          e.vel = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
          e.radius = sc->types[k].radius;
          e.active = j == 0 || rng.bernoulli(0.85);
          es.push_back(e);
        }
      }
      const double prod = compute_reward(*sc, es);
      const double ref = oracle_reward(*sc, es);
      ++rep.cases;
      worst = std::max(worst, std::fabs(prod - ref));
      if (!(prod == ref)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << env_name(sc->env) << " state " << i << ": production " << prod << ", oracle " << ref;
        rep.fail(msg.str());
      }
    }
  }
  rep.metrics["max_abs_difference"] = worst;
  rep.seconds = clock.seconds();
  return rep;
}

SuiteReport verify_daed(std::size_t compositions, double overload, std::uint64_t seed) {
  Stopwatch clock;
  SuiteReport rep;
  rep.suite = "dropout";
  const auto scenarios = shipped_scenarios();
  Rng rng(seed);
  std::size_t rows_dropped = 0;
  for (std::size_t c = 0; c < compositions; ++c) {
    const Scenario& sc = *scenarios[c % scenarios.size()];
    const std::size_t L = sc.type_count();
    const std::vector<int> n_train = sc.in_domain.upper_bounds();
    std::vector<int> observed(L);
    for (std::size_t l = 0; l < L; ++l) {
      const int cap = std::max(1, static_cast<int>(std::floor(overload * n_train[l])));
      observed[l] = pick(rng, static_cast<int>(l) == sc.agent_type() ? 1 : 0, cap);
    }
    // Observation with entities of all types interleaved in id order.
    std::vector<int> kinds;
    for (std::size_t l = 0; l < L; ++l) kinds.insert(kinds.end(), static_cast<std::size_t>(observed[l]), static_cast<int>(l));
    std::shuffle(kinds.begin(), kinds.end(), rng.engine());
    Observation obs;
    obs.features = Tensor::matrix(kinds.size(), sc.feature_width());
    for (std::size_t r = 0; r < kinds.size(); ++r) {
      obs.features(r, static_cast<std::size_t>(kinds[r])) = 1.0;
      obs.features(r, L) = static_cast<double>(r);
      obs.ids.push_back(static_cast<std::int64_t>(3 * r + 1));
      obs.kinds.push_back(kinds[r]);
      if (kinds[r] == sc.agent_type()) {
        obs.agent_rows.push_back(r);
        obs.last_actions.push_back({});
      }
    }
    const auto agent = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(obs.agent_rows.size()) - 1));
    Rng drop = Rng::derive(seed, {c, 1});
    const TokenMatrix view = flicker_infer_step(obs, agent, n_train, true, L, sc.agent_type(), drop);
    ++rep.cases;
    const std::string where = std::string(env_name(sc.env)) + " composition " + std::to_string(c);
    std::vector<int> kept(L, 0);
    for (int k : view.kinds) ++kept[static_cast<std::size_t>(k)];
    for (std::size_t l = 0; l < L; ++l) {
      const int want = std::min(observed[l], n_train[l]);
      if (kept[l] != want || view.type_counts[l] != want) {
        rep.fail(where + ": type " + sc.types[l].name + " kept " + std::to_string(kept[l]) + ", expected " +
                 std::to_string(want));
      }
    }
    const std::int64_t self_id = obs.ids[obs.agent_rows[agent]];
    if (view.self >= view.ids.size() || view.ids[view.self] != self_id) rep.fail(where + ": viewer row dropped");
    for (std::size_t p = 0; p < view.size(); ++p) {
      const auto src = view.source[p];
      if (src >= obs.ids.size() || obs.ids[src] != view.ids[p] || (p > 0 && view.source[p - 1] >= src)) {
        rep.fail(where + ": kept rows are not an ordered subset of the observation");
        break;
      }
      for (std::size_t col = 0; col < sc.feature_width(); ++col) {
        if (view.rows(p, col) != obs.features(src, col)) {
          rep.fail(where + ": kept row content differs from the observation");
          break;
        }
      }
    }
    rows_dropped += kinds.size() - view.size();
  }
  rep.metrics["rows_dropped"] = static_cast<double>(rows_dropped);
  rep.metrics["overload"] = overload;
  rep.seconds = clock.seconds();
  return rep;
}

}  // namespace flicker
