// Acceptance run: one PASS/FAIL line per criterion. `--only name` runs a
// single criterion, `--list` prints the names.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "flicker/agents/qnet.hpp"
#include "flicker/cli/preset.hpp"
#include "flicker/envs/world.hpp"
#include "flicker/metrics/stats.hpp"
#include "flicker/training/rollout.hpp"
#include "flicker/training/trainer.hpp"
#include "flicker/verify/suites.hpp"

using namespace flicker;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Warn };

struct Outcome {
  Verdict verdict = Verdict::Fail;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

std::string num(double v, int precision = 4) {
  std::ostringstream ss;
  ss.precision(precision);
  ss << v;
  return ss.str();
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Outcome from_suite(const SuiteReport& rep, double budget_s, const std::string& headline) {
  std::string detail = std::to_string(rep.cases) + " cases, " + std::to_string(rep.violations) + " violations";
  if (!headline.empty()) detail += ", " + headline;
  detail += ", " + num(rep.seconds, 3) + " s (budget " + num(budget_s) + " s)";
  for (const auto& f : rep.failures) detail += "\n    " + f;
  const bool ok = rep.passed() && rep.seconds <= budget_s;
  return {ok ? Verdict::Pass : Verdict::Fail, detail};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("flicker_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Property suites

Outcome gradients() {
  const SuiteReport rep = verify_gradients(GradientSuiteOptions{}, 1);
  return from_suite(rep, 120.0, "max relative error " + num(rep.metrics.at("max_rel_error")) + " (tolerance 1e-4)");
}

Outcome prop1() {
  const SuiteReport rep = verify_prop1(Prop1Grid{}, 1);
  return from_suite(rep, 300.0, "");
}

Outcome reward_oracle() {
  const SuiteReport rep = verify_reward_oracle(1000, 1);
  const bool six_by_thousand = rep.cases == 6000;
  Outcome o = from_suite(rep, 60.0, "");
  if (!six_by_thousand) o.verdict = Verdict::Fail;
  return o;
}

Outcome daed() {
  const SuiteReport rep = verify_daed(10000, 3.0, 1);
  return from_suite(rep, 60.0, "observed counts up to 3x the training bounds");
}

// ---------------------------------------------------------------------------
// Mixer monotonicity: central differences of Q_tot in each chosen value.

Outcome mixer_monotonicity() {
  std::string detail;
  bool ok = true;
  for (HyperActivation act : {HyperActivation::Abs, HyperActivation::Softmax}) {
    Rng rng(act == HyperActivation::Abs ? 71 : 72);
    double worst = std::numeric_limits<double>::infinity();
    for (int draw = 0; draw < 1000; ++draw) {
      ModelConfig cfg;
      cfg.backbone = Backbone::Attention;
      cfg.type_count = static_cast<std::size_t>(rng.uniform_int(2, 4));
      cfg.feature_width = cfg.type_count + 4;
      cfg.attention_heads = 1;
      cfg.token_dim = static_cast<std::size_t>(rng.uniform_int(4, 16));
      cfg.rnn_input_dim = 4;
      cfg.rnn_hidden_dim = 4;
      cfg.mixing_embed_dim = static_cast<std::size_t>(rng.uniform_int(2, 16));
      cfg.hypernet_embed_dim = static_cast<std::size_t>(rng.uniform_int(2, 32));
      cfg.hyper_activation = act;
      ParameterSet ps;
      const QNet net = QNet::build(cfg, ps, rng);

      // One to three episodes packed together, as in a training batch.
      const auto episodes = static_cast<std::size_t>(rng.uniform_int(1, 3));
      std::vector<std::size_t> entity_sizes, agent_sizes;
      std::vector<std::int64_t> agent_rows, agent_group;
      std::vector<std::vector<double>> rows;
      for (std::size_t e = 0; e < episodes; ++e) {
        const auto n_agents = static_cast<std::size_t>(rng.uniform_int(1, 6));
        const auto n_other = static_cast<std::size_t>(rng.uniform_int(0, 6));
        for (std::size_t r = 0; r < n_agents + n_other; ++r) {
          std::vector<double> row(cfg.feature_width, 0.0);
          const std::size_t kind =
              r < n_agents ? 0 : static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(cfg.type_count) - 1));
          row[kind] = 1.0;
          for (std::size_t c = cfg.type_count; c < cfg.feature_width; ++c) row[c] = rng.uniform(-3, 3);
          if (r < n_agents) {
            agent_rows.push_back(static_cast<std::int64_t>(rows.size()));
            agent_group.push_back(static_cast<std::int64_t>(e));
          }
          rows.push_back(std::move(row));
        }
        entity_sizes.push_back(n_agents + n_other);
        agent_sizes.push_back(n_agents);
      }
      Tensor table = Tensor::matrix(rows.size(), cfg.feature_width);
      for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), table.row_span(r).begin());
      MixerIndex idx;
      idx.entity_groups = Segments::from_sizes(entity_sizes);
      idx.agent_groups = Segments::from_sizes(agent_sizes);
      idx.agent_group = agent_group;
      idx.agent_rows = agent_rows;
      Tensor chosen = Tensor::matrix(agent_rows.size(), 1);
      for (double& v : chosen.storage()) v = rng.uniform(-10, 10);

      auto q_tot = [&](const Tensor& values) {
        Graph g;
        Var tokens = net.tokenize(g, ps, g.constant(table));
        return g.value(net.mix(g, ps, tokens, idx, g.constant(values)));
      };
      const double h = 1e-5;
      for (std::size_t a = 0; a < agent_rows.size(); ++a) {
        Tensor up = chosen, down = chosen;
        up(a, 0) += h;
        down(a, 0) -= h;
        const auto e = static_cast<std::size_t>(agent_group[a]);
        const double d = (q_tot(up)(e, 0) - q_tot(down)(e, 0)) / (2 * h);
        worst = std::min(worst, d);
      }
    }
    ok = ok && worst >= -1e-8;
    detail += std::string(detail.empty() ? "" : ", ") + std::string(hyper_activation_name(act)) +
              " min dQtot/dQa " + num(worst);
  }
  return {ok ? Verdict::Pass : Verdict::Fail, detail + " over 1000 draws each (threshold -1e-8)"};
}

// ---------------------------------------------------------------------------
// Scenario fidelity against the environment tables.

struct Range {
  int lo, hi;
};

struct SpawnBox {
  // Union of x intervals times union of y intervals.
  std::vector<std::pair<double, double>> x, y;
};

struct EnvTable {
  std::string name;
  double bound;
  int t_max;
  // Per domain (in, ood1, ood2), per type: init and intra count ranges.
  std::vector<std::vector<Range>> init, intra;
  std::vector<SpawnBox> spawn;
  std::vector<bool> edge_arrival;
};

std::vector<EnvTable> env_tables() {
  const Range U13{1, 3}, U12{1, 2}, one{1, 1}, zero{0, 0}, five{5, 5}, four{4, 4};
  auto box = [](double x0, double x1, double y0, double y1) { return SpawnBox{{{x0, x1}}, {{y0, y1}}}; };
  auto full = [&](double b) { return box(-b, b, -b, b); };
  std::vector<EnvTable> t;
  t.push_back({"tag", 2.0, 200,
               {{U13, U13}, {five, five}, {five, five}},
               {{one, one}, {U12, zero}, {zero, U12}},
               {box(-0.5, 0.5, -0.5, 0.5), box(-2.0, -1.2, 1.2, 2.0)},
               {true, true}});
  t.push_back({"spread", 1.0, 100,
               {{U13, U13}, {five, five}, {five, five}},
               {{one, one}, {U12, zero}, {zero, U12}},
               {full(1.0), full(1.0)},
               {true, true}});
  t.push_back({"guard", 2.0, 200,
               {{U13, U12}, {five, four}, {five, four}},
               {{one, one}, {U13, zero}, {zero, U12}},
               {full(2.0), full(1.0)},
               {true, true}});
  t.push_back({"repel", 2.5, 150,
               {{U13, U13}, {five, five}, {five, five}},
               {{one, one}, {U12, zero}, {zero, U12}},
               {full(2.5), box(-0.2, 0.2, -0.2, 0.2)},
               {true, true}});
  t.push_back({"adversary", 1.3, 150,
               {{U13, U13, U12, U12}, {five, five, U12, U12}, {five, five, U12, U12}},
               {{one, one, one, one}, {U12, zero, one, one}, {zero, U12, one, one}},
               {full(1.3), full(1.3), full(1.3), full(1.3)},
               {true, true, false, false}});
  const SpawnBox corners{{{-2.0, -0.5}, {0.5, 2.0}}, {{-2.0, -0.5}, {0.5, 2.0}}};
  t.push_back({"hunt", 2.0, 200,
               {{U13, U13}, {five, five}, {five, five}},
               {{one, one}, {U12, zero}, {zero, U12}},
               {corners, box(-0.5, 0.5, -0.5, 0.5)},
               {true, true}});
  return t;
}

// Upper 1% point of the chi-square distribution.
double chi2_critical_01(std::size_t dof) {
  static const std::map<std::size_t, double> table{{1, 6.635},  {2, 9.210},   {3, 11.345}, {4, 13.277},
                                                   {5, 15.086}, {7, 18.475},  {8, 20.090}, {11, 24.725},
                                                   {15, 30.578}, {17, 33.409}, {35, 57.342}, {71, 101.621}};
  return table.at(dof);
}

bool in_union(double v, const std::vector<std::pair<double, double>>& ivs) {
  for (const auto& [lo, hi] : ivs) {
    if (v >= lo && v <= hi) return true;
  }
  return false;
}

Outcome scenario_fidelity() {
  std::vector<std::string> problems;
  std::size_t checks = 0, chi2_tests = 0;
  const DomainMode modes[] = {DomainMode::InDomain, DomainMode::Ood1, DomainMode::Ood2};
  for (const EnvTable& tab : env_tables()) {
    const auto sc = load_preset(tab.name + "_flicker_mlp").scenario;
    const std::size_t types = sc->type_count();
    if (types != tab.spawn.size()) {
      problems.push_back(tab.name + ": type count " + std::to_string(types));
      continue;
    }

    // Episode length under no-op actions.
    {
      const Env env(sc, sc->domain(DomainMode::InDomain));
      WorldState s = env.reset(5);
      int steps = 0;
      StepResult r;
      do {
        r = env.step(s, std::vector<int>(s.of_type(0).size(), kNoAction));
        ++steps;
      } while (!r.done && steps < 10000);
      ++checks;
      if (steps != tab.t_max) {
        problems.push_back(tab.name + ": episode length " + std::to_string(steps) + ", expected " +
                           std::to_string(tab.t_max));
      }
    }

    for (std::size_t m = 0; m < 3; ++m) {
      const Env env(sc, sc->domain(modes[m]));
      const std::string where = tab.name + "/" + std::string(domain_mode_name(modes[m]));

      // Counts and spawn containment over many resets.
      for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const WorldState s = env.reset(seed);
        const auto counts = s.counts(types);
        std::vector<int> intra(types, 0);
        for (const auto& p : s.pending) ++intra[static_cast<std::size_t>(p.entity.kind)];
        for (std::size_t k = 0; k < types; ++k) {
          ++checks;
          if (counts[k] < tab.init[m][k].lo || counts[k] > tab.init[m][k].hi ||
              intra[k] < tab.intra[m][k].lo || intra[k] > tab.intra[m][k].hi) {
            problems.push_back(where + ": type " + std::to_string(k) + " starts with " + std::to_string(counts[k]) +
                               " and adds " + std::to_string(intra[k]));
          }
        }
        for (const auto& e : s.entities) {
          const SpawnBox& b = tab.spawn[static_cast<std::size_t>(e.kind)];
          ++checks;
          if (!in_union(e.pos.x, b.x) || !in_union(e.pos.y, b.y)) {
            problems.push_back(where + ": initial position (" + num(e.pos.x) + ", " + num(e.pos.y) +
                               ") of type " + std::to_string(e.kind) + " outside its spawn region");
          }
        }
        for (const auto& p : s.pending) {
          const auto kind = static_cast<std::size_t>(p.entity.kind);
          const double x = p.entity.pos.x, y = p.entity.pos.y, bnd = tab.bound;
          ++checks;
          const bool inside = std::fabs(x) <= bnd && std::fabs(y) <= bnd;
          const bool on_edge = std::fabs(x) == bnd || std::fabs(y) == bnd;
          if (!inside || (tab.edge_arrival[kind] && !on_edge)) {
            problems.push_back(where + ": arrival at (" + num(x) + ", " + num(y) + ") of type " +
                               std::to_string(kind) + " violates its spawn rule");
          }
        }
        if (modes[m] == DomainMode::Ood1 && (tab.name == "tag" || tab.name == "spread" || tab.name == "repel" ||
                                             tab.name == "hunt")) {
          ++checks;
          if (counts[0] != 5 || counts[1] != 5) problems.push_back(where + ": OOD1 does not start with 5+5");
        }
      }

      // Chi-square uniformity of the sampled composition (init and intra
      // counts jointly) over the product of the table's ranges.
      std::size_t cells = 1;
      for (std::size_t k = 0; k < types; ++k) {
        cells *= static_cast<std::size_t>(tab.init[m][k].hi - tab.init[m][k].lo + 1);
        cells *= static_cast<std::size_t>(tab.intra[m][k].hi - tab.intra[m][k].lo + 1);
      }
      if (cells < 2) continue;
      const std::size_t n = 500 * cells;
      std::map<std::vector<int>, std::size_t> freq;
      for (std::size_t i = 0; i < n; ++i) {
        Rng rng = Rng::derive(2024, {static_cast<std::uint64_t>(m), i});
        const EpisodePlan plan = env.sample_plan(rng);
        std::vector<int> key = plan.init;
        key.insert(key.end(), plan.intra.begin(), plan.intra.end());
        ++freq[key];
      }
      ++chi2_tests;
      if (freq.size() != cells) {
        problems.push_back(where + ": " + std::to_string(freq.size()) + " compositions seen, expected " +
                           std::to_string(cells));
        continue;
      }
      const double expected = static_cast<double>(n) / static_cast<double>(cells);
      double chi2 = 0.0;
      for (const auto& [key, count] : freq) chi2 += std::pow(static_cast<double>(count) - expected, 2) / expected;
      const double crit = chi2_critical_01(cells - 1);
      if (chi2 > crit) {
        problems.push_back(where + ": chi-square " + num(chi2) + " exceeds " + num(crit) + " (" +
                           std::to_string(cells - 1) + " dof, alpha 0.01)");
      }
    }
  }
  std::string detail = std::to_string(checks) + " count/length/spawn checks, " + std::to_string(chi2_tests) +
                       " chi-square tests, " + std::to_string(problems.size()) + " problems";
  for (std::size_t i = 0; i < std::min<std::size_t>(problems.size(), 10); ++i) detail += "\n    " + problems[i];
  return {problems.empty() ? Verdict::Pass : Verdict::Fail, detail};
}

// ---------------------------------------------------------------------------
// Micro-scale training

struct TrainedRun {
  TrainSetup setup;
  std::shared_ptr<const Scenario> scenario;
  std::unique_ptr<Trainer> trainer;
  double seconds = 0.0;
};

TrainedRun train_micro(const std::string& preset, std::uint64_t seed, const fs::path& dir) {
  TrainedRun r;
  const Preset p = load_preset(preset);
  r.setup = p.train_setup();
  r.scenario = p.scenario;
  const Stopwatch clock;
  r.trainer = std::make_unique<Trainer>(r.setup, seed, dir);
  r.trainer->run(r.setup.train.max_timesteps);
  r.seconds = clock.seconds();
  return r;
}

double mean_return(const std::vector<EpisodeResult>& episodes) {
  double s = 0.0;
  for (const auto& e : episodes) s += e.record.total_reward();
  return s / static_cast<double>(episodes.size());
}

Outcome micro_smoke() {
  constexpr std::uint64_t kSeed = 0;
  const std::string preset = "micro_spread_mlp_backbone";
  const fs::path dir_a = scratch("smoke_a"), dir_b = scratch("smoke_b");
  TrainedRun run = train_micro(preset, kSeed, dir_a);
  const auto& sc = run.scenario;
  const DomainSpec& in = sc->domain(DomainMode::InDomain);
  std::string problems;
  if (sc->t_max != 50) problems += " horizon is " + std::to_string(sc->t_max) + ";";
  for (const auto& t : in.types) {
    if (t.init.lo != 2 || t.init.hi != 2 || t.intra.hi != 0) problems += " in-domain counts are not fixed at 2+2;";
  }
  if (run.setup.model.backbone != Backbone::Mlp || run.setup.method != Method::Backbone) {
    problems += " not the plain MLP backbone;";
  }
  if (run.setup.train.max_timesteps != 100000 || run.trainer->t_env() < 100000) problems += " not a 100k-step run;";

  const Env env(sc, in);
  const auto seeds = eval_seeds(kSeed, 50);
  const Learner& learner = run.trainer->learner();
  const double trained = mean_return(evaluate(env, learner.net(), learner.online(), run.setup, seeds, false));
  RolloutOptions random;
  random.mode = RolloutMode::Eval;
  random.method = run.setup.method;
  random.n_train = run.setup.n_train;
  random.random_policy = true;
  std::vector<EpisodeResult> random_eps;
  for (auto s : seeds) random_eps.push_back(run_episode(env, learner.net(), learner.online(), s, random));
  const double baseline = mean_return(random_eps);
  // Rewards are negative, so "1.3x the random mean" is read as a 30%
  // improvement over it.
  const double threshold = baseline + 0.3 * std::fabs(baseline);

  TrainedRun again = train_micro(preset, kSeed, dir_b);
  const bool same = slurp(dir_a / "metrics.jsonl") == slurp(dir_b / "metrics.jsonl") &&
                    slurp(dir_a / "model.ckpt") == slurp(dir_b / "model.ckpt");

  const bool ok = problems.empty() && trained >= threshold && same && run.seconds <= 900.0;
  std::string detail = "greedy " + num(trained) + " vs random " + num(baseline) + " over 50 episodes (needs >= " +
                       num(threshold) + "), training " + num(run.seconds, 3) + " s (budget 900 s), rerun " +
                       (same ? "identical" : "DIFFERS");
  if (!problems.empty()) detail += ";" + problems;
  return {ok ? Verdict::Pass : Verdict::Fail, detail};
}

Outcome flicker_directional() {
  double sum_flicker = 0.0, sum_backbone = 0.0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (const std::string preset : {"micro_spread_mlp_flicker", "micro_spread_mlp_backbone"}) {
      TrainedRun run = train_micro(preset, seed, scratch("directional"));
      const auto& sc = run.scenario;
      const Env env(sc, sc->domain(DomainMode::Ood1));
      const Learner& learner = run.trainer->learner();
      const double r = mean_return(evaluate(env, learner.net(), learner.online(), run.setup, eval_seeds(seed, 50), false));
      (run.setup.method == Method::Flicker ? sum_flicker : sum_backbone) += r;
      detail += std::string(detail.empty() ? "" : ", ") + (run.setup.method == Method::Flicker ? "flicker" : "backbone") +
                "[" + std::to_string(seed) + "] " + num(r);
    }
  }
  const double f = sum_flicker / 3.0, b = sum_backbone / 3.0;
  detail = "OOD mean flicker " + num(f) + " vs backbone " + num(b) + " (" + detail + ")";
  if (f >= b) return {Verdict::Pass, detail};
  return {Verdict::Warn, detail + "; advisory only"};
}

Outcome determinism_resume() {
  TrainSetup setup = load_preset("micro_spread_mlp_flicker").train_setup();
  setup.train.test_interval = 2500;
  setup.train.test_episodes = 4;
  constexpr std::int64_t kSteps = 10000;
  const fs::path a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  {
    Trainer t(setup, 11, a);
    t.run(kSteps);
  }
  {
    Trainer t(setup, 11, b);
    t.run(kSteps);
  }
  {
    Trainer t(setup, 11, c);
    t.run(kSteps / 2);
  }
  std::int64_t resumed_at = 0;
  {
    Trainer t = Trainer::resume(setup, c);
    resumed_at = t.t_env();
    t.run(kSteps);
  }
  auto same = [](const fs::path& x, const fs::path& y, const char* file) { return slurp(x / file) == slurp(y / file); };
  const bool repeat = same(a, b, "metrics.jsonl") && same(a, b, "model.ckpt");
  const bool resume = same(a, c, "metrics.jsonl") && same(a, c, "model.ckpt") && same(a, c, "trainer_state.bin");
  std::size_t rows = 0;
  for (char ch : slurp(a / "metrics.jsonl")) rows += ch == '\n';
  const std::string detail = std::to_string(kSteps) + "-step runs, " + std::to_string(rows) +
                             " metric rows; repeat " + (repeat ? "bit-identical" : "DIFFERS") + "; resume from step " +
                             std::to_string(resumed_at) + " " + (resume ? "bit-identical" : "DIFFERS");
  return {repeat && resume && rows >= 2 ? Verdict::Pass : Verdict::Fail, detail};
}

Outcome iqm_fixture() {
  const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  const Summary s = summarize(v);
  // Sort-based oracle.
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / 4.0;
  double ss = 0.0;
  for (double x : sorted) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / 3.0);
  auto q = [&](double p) {
    const double pos = p * 3.0;
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min<std::size_t>(lo + 1, 3);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double iqm = (sorted[1] + sorted[2]) / 2.0;
  const bool ok = s.iqm == 2.5 && iqm == 2.5 && std::fabs(s.std - sd) <= 1e-12 && std::fabs(s.q1 - q(0.25)) <= 1e-12 &&
                  std::fabs(s.median - q(0.5)) <= 1e-12 && std::fabs(s.q3 - q(0.75)) <= 1e-12 && s.min == 1.0 &&
                  s.max == 4.0 && s.mean == 2.5;
  return {ok ? Verdict::Pass : Verdict::Fail, "IQM " + num(s.iqm, 17) + ", std " + num(s.std, 17) + " (oracle " +
                                                  num(sd, 17) + "), q1 " + num(s.q1) + ", median " + num(s.median) +
                                                  ", q3 " + num(s.q3)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {"gradients", gradients},
      {"prop1", prop1},
      {"reward_oracle", reward_oracle},
      {"daed", daed},
      {"mixer_monotonicity", mixer_monotonicity},
      {"scenario_fidelity", scenario_fidelity},
      {"micro_smoke", micro_smoke},
      {"flicker_directional", flicker_directional},
      {"determinism_resume", determinism_resume},
      {"iqm_fixture", iqm_fixture},
  };

  CLI::App app{"Acceptance criteria"};
  std::vector<std::string> only;
  bool list = false;
  app.add_option("--only", only, "Run only these criteria");
  app.add_flag("--list", list, "Print criterion names");
  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const auto& c : all) std::cout << c.name << '\n';
    return 0;
  }
  for (const auto& name : only) {
    if (std::none_of(all.begin(), all.end(), [&](const Criterion& c) { return c.name == name; })) {
      std::cerr << "unknown criterion " << name << '\n';
      return 2;
    }
  }

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    const Stopwatch clock;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Verdict::Fail, std::string("threw: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Warn ? "WARN" : "FAIL";
    std::cout << tag << "  " << c.name << "  [" << num(clock.seconds(), 3) << " s]  " << o.detail << std::endl;
    if (o.verdict == Verdict::Fail) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
