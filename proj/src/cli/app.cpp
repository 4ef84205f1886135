#include "flicker/cli/app.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <fstream>
#include <optional>
#include <sstream>

#include "flicker/agents/checkpoint.hpp"
#include "flicker/cli/preset.hpp"
#include "flicker/metrics/run_result.hpp"
#include "flicker/metrics/trajectory.hpp"
#include "flicker/training/trainer.hpp"
#include "flicker/verify/suites.hpp"

namespace flicker {

namespace {

// Failure before any work starts: bad flags, preset or checkpoint.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunFlags {
  std::string preset;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> steps;
  std::string out;
  std::optional<std::string> mode;
  std::optional<int> episodes;
  std::string dump_trajectory;
  std::optional<bool> domain_aware;
  std::optional<std::string> backbone;
  std::optional<int> parallel_envs;
  std::string checkpoint;
  bool resume = false;
};

Preset configured_preset(const RunFlags& f) {
  Preset p;
  try {
    p = load_preset(f.preset);
    if (f.steps) p.train.max_timesteps = *f.steps;
    if (f.mode) p.domain_mode = parse_domain_mode(*f.mode);
    if (f.domain_aware) p.domain_aware = *f.domain_aware;
    if (f.backbone) p.model.backbone = parse_backbone(*f.backbone);
    if (f.parallel_envs) p.train.parallel_envs = *f.parallel_envs;
    if (f.episodes) p.train.test_episodes = *f.episodes;
    p.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  } catch (const std::exception& e) {
    throw UsageError(f.preset + ": " + e.what());
  }
  return p;
}

std::string method_tag(const Preset& p) {
  std::string tag(method_name(p.method));
  if (p.method == Method::Flicker && !p.domain_aware) tag += "-ed";
  return tag + "-" + std::string(backbone_name(p.model.backbone));
}

RunResult make_run_result(const Preset& p, std::uint64_t seed) {
  RunResult r;
  r.seed = seed;
  r.env = std::string(env_name(p.scenario->env));
  r.domain_mode = std::string(domain_mode_name(p.domain_mode));
  r.method = method_tag(p);
  return r;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

int cmd_train(const RunFlags& f, std::ostream& out, std::ostream& err) {
  const Preset p = configured_preset(f);
  const std::filesystem::path dir =
      f.out.empty() ? std::filesystem::path("runs") / p.name / ("seed" + std::to_string(f.seed)) : std::filesystem::path(f.out);
  Trainer trainer = [&] {
    if (!f.resume) return Trainer(p.train_setup(), f.seed, dir);
    try {
      return Trainer::resume(p.train_setup(), dir);
    } catch (const CheckpointMismatch& e) {
      throw UsageError(e.what());
    }
  }();
  trainer.on_eval = [&](const EvalRow& row) {
    out << "step " << row.step << "  mean_reward " << fmt(row.mean_reward) << "  epsilon " << fmt(row.epsilon)
        << "  loss " << fmt(row.loss_ema) << "  updates " << row.updates << std::endl;
  };
  err << "training " << p.name << " (" << method_tag(p) << ", seed " << f.seed << ") into " << dir.string() << '\n';
  trainer.run(p.train.max_timesteps);

  RunResult rr = make_run_result(p, f.seed);
  for (const auto& row : trainer.rows()) rr.curve.push_back({row.step, row.mean_reward, row.rewards});
  write_run_result(dir / "run_result.json", rr);
  export_curve(rr, dir / "curve.csv");
  out << "done: " << trainer.t_env() << " env steps, " << trainer.learner().updates() << " updates, final reward "
      << fmt(rr.final_reward()) << '\n';
  return kExitOk;
}

int cmd_eval(const RunFlags& f, std::ostream& out, std::ostream& err) {
  const Preset p = configured_preset(f);
  const TrainSetup setup = p.train_setup();
  std::filesystem::path ckpt = f.checkpoint;
  if (std::filesystem::is_directory(ckpt)) ckpt /= "model.ckpt";
  ParameterSet params;
  Rng init(0);
  const QNet net = QNet::build(setup.model, params, init);
  try {
    load_checkpoint(ckpt, setup.model, params);
  } catch (const CheckpointMismatch& e) {
    throw UsageError(e.what());
  }
  const Env env(p.scenario, p.scenario->domain(p.domain_mode));
  const bool attention = setup.model.backbone == Backbone::Attention;
  const auto results =
      evaluate(env, net, params, setup, eval_seeds(f.seed, p.train.test_episodes), attention && !f.dump_trajectory.empty());

  RunResult rr = make_run_result(p, f.seed);
  CurvePoint point;
  for (const auto& r : results) point.rewards.push_back(r.record.total_reward());
  double sum = 0.0;
  for (double v : point.rewards) sum += v;
  point.mean_reward = sum / static_cast<double>(point.rewards.size());
  rr.curve.push_back(point);
  if (f.out.empty()) {
    out << run_result_json(rr) << '\n';
  } else {
    write_run_result(f.out, rr);
  }
  if (!f.dump_trajectory.empty()) {
    TrajectoryHeader h;
    h.env = rr.env;
    h.domain_mode = rr.domain_mode;
    h.seed = results.front().record.seed;
    h.backbone = std::string(backbone_name(setup.model.backbone));
    h.method = std::string(method_name(p.method));
    h.domain_aware = p.domain_aware;
    for (const auto& t : p.scenario->types) h.types.push_back(t.name);
    h.n_train = setup.n_train;
    h.attention = attention;
    export_trajectory(make_trajectory(h, results.front(), p.scenario->type_count()), f.dump_trajectory);
  }
  err << p.name << " " << rr.domain_mode << ": mean reward " << fmt(point.mean_reward) << " over "
      << point.rewards.size() << " episodes\n";
  return kExitOk;
}

int report_suite(const SuiteReport& rep, const std::string& out_path, std::ostream& out, std::ostream& err) {
  if (out_path.empty()) {
    out << rep.json() << '\n';
  } else {
    std::ofstream os(out_path, std::ios::app);
    if (!os) throw std::runtime_error("cannot write " + out_path);
    os << rep.json() << '\n';
  }
  err << rep.suite << ": " << (rep.passed() ? "PASS" : "FAIL") << " (" << rep.cases << " cases, " << rep.violations
      << " violations, " << fmt(rep.seconds) << " s)\n";
  for (const auto& m : rep.failures) err << "  " << m << '\n';
  return rep.passed() ? kExitOk : kExitRuntime;
}

int cmd_verify(const std::string& what, std::uint64_t seed, std::optional<std::size_t> samples,
               const std::string& out_path, std::ostream& out, std::ostream& err) {
  int code = kExitOk;
  auto run = [&](const std::string& name) {
    SuiteReport rep;
    if (name == "prop1") {
      Prop1Grid grid;
      if (samples) grid.samples = *samples;
      rep = verify_prop1(grid, seed);
    } else if (name == "gradients") {
      GradientSuiteOptions opt;
      if (samples) opt.attention_instances = *samples;
      rep = verify_gradients(opt, seed);
    } else if (name == "reward-oracle") {
      rep = verify_reward_oracle(samples.value_or(1000), seed);
    } else {
      rep = verify_daed(samples.value_or(10000), 3.0, seed);
    }
    code = std::max(code, report_suite(rep, out_path, out, err));
  };
  if (what == "all") {
    for (const char* s : {"reward-oracle", "dropout", "gradients", "prop1"}) run(s);
  } else {
    run(what);
  }
  return code;
}

int cmd_verify_prop1(std::uint64_t seed, std::optional<std::size_t> samples, const std::string& out_path,
                     std::ostream& out, std::ostream& err) {
  Prop1Grid grid;
  if (samples) grid.samples = *samples;
  std::vector<Prop1Row> rows;
  const SuiteReport rep = verify_prop1(grid, seed, &rows);
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write " + out_path);
  }
  std::ostream& os = out_path.empty() ? out : file;
  os << "n_agents,n_entities,delta,empirical,bound,se,pass\n";
  os.precision(10);
  for (const auto& r : rows) {
    os << r.n_agents << ',' << r.n_entities << ',' << r.delta << ',' << r.empirical << ',' << r.bound << ','
       << r.standard_error << ',' << (r.pass ? 1 : 0) << '\n';
  }
  err << "prop1: " << rows.size() << " cells, " << rep.violations << " above bound + 3 SE\n";
  return rep.passed() ? kExitOk : kExitRuntime;
}

int cmd_oracle_check(const std::string& preset, const std::string& path, std::ostream& out, std::ostream& err) {
  Preset p;
  Trajectory traj;
  try {
    p = load_preset(preset);
    traj = load_trajectory(path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const Env env(p.scenario, p.scenario->domain(parse_domain_mode(traj.header.domain_mode)));
  const ReplayReport rep = replay_trajectory(env, traj);
  nlohmann::json j = {{"steps", rep.steps},
                      {"mismatches", rep.mismatches},
                      {"oracle_mismatches", rep.oracle_mismatches},
                      {"max_reward_error", rep.max_reward_error},
                      {"first_mismatch", rep.first_mismatch}};
  out << j.dump() << '\n';
  const bool ok = rep.mismatches == 0 && rep.oracle_mismatches == 0;
  err << "oracle-check: " << (ok ? "PASS" : "FAIL") << " over " << rep.steps << " steps\n";
  return ok ? kExitOk : kExitRuntime;
}

int cmd_aggregate(const std::vector<std::string>& files, std::ostream& out) {
  std::vector<RunResult> runs;
  for (const auto& f : files) runs.push_back(read_run_result(f));
  const Summary s = aggregate(runs);
  std::vector<double> finals;
  for (const auto& r : runs) finals.push_back(r.final_reward());
  nlohmann::json j = {{"count", s.count}, {"mean", s.mean}, {"std", s.std},     {"iqm", s.iqm},
                      {"min", s.min},     {"q1", s.q1},     {"median", s.median}, {"q3", s.q3},
                      {"max", s.max},     {"final_rewards", finals}};
  out << j.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"flickersim: multi-agent entity-dropout training and evaluation", "flickersim"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  RunFlags f;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--preset", f.preset, "Preset name or path to a preset file")->required();
    sub->add_option("--seed", f.seed, "Run seed")->capture_default_str();
    sub->add_option("--mode", f.mode, "Evaluation domain: in, ood1 or ood2")
        ->check(CLI::IsMember({"in", "ood1", "ood2"}));
    sub->add_option("--domain-aware", f.domain_aware, "Use domain-aware dropout at inference (true/false)");
    sub->add_option("--backbone", f.backbone, "Override the backbone: mlp or attention")
        ->check(CLI::IsMember({"mlp", "attention"}));
    sub->add_option("--episodes", f.episodes, "Evaluation episodes")->check(CLI::PositiveNumber);
  };

  auto* train = app.add_subcommand("train", "Train one seed of a preset");
  add_common(train);
  train->add_option("--steps", f.steps, "Environment steps (overrides max_timesteps)")->check(CLI::NonNegativeNumber);
  train->add_option("--out", f.out, "Output directory (default runs/<preset>/seed<seed>)");
  train->add_option("--parallel-envs", f.parallel_envs, "Episodes collected per rollout batch")
      ->check(CLI::PositiveNumber);
  train->add_flag("--resume", f.resume, "Continue the run stored in the output directory");

  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", f.checkpoint, "model.ckpt or a run directory")->required();
  eval->add_option("--out", f.out, "RunResult JSON path (default stdout)");
  eval->add_option("--dump-trajectory", f.dump_trajectory, "Write the first episode as a JSON-lines trajectory");

  std::string what;
  std::optional<std::size_t> samples;
  std::string report_path;
  std::uint64_t verify_seed = 1;
  auto* verify = app.add_subcommand("verify", "Run a property suite");
  verify->add_option("what", what, "prop1, gradients, reward-oracle, dropout or all")
      ->required()
      ->check(CLI::IsMember({"prop1", "gradients", "reward-oracle", "dropout", "all"}));
  verify->add_option("--seed", verify_seed, "Suite seed")->capture_default_str();
  verify->add_option("--samples", samples,
                     "prop1: samples per cell; gradients: instances; reward-oracle: states per env; dropout: "
                     "compositions")
      ->check(CLI::PositiveNumber);
  verify->add_option("--out", report_path, "Append the JSON report to this file instead of stdout");

  auto* vprop = app.add_subcommand("verify-prop1", "Dispersion grid as CSV");
  vprop->add_option("--seed", verify_seed, "Suite seed")->capture_default_str();
  vprop->add_option("--samples", samples, "Samples per cell")->check(CLI::PositiveNumber);
  vprop->add_option("--out", report_path, "CSV path (default stdout)");

  std::string traj_path;
  auto* oracle = app.add_subcommand("oracle-check", "Replay a trajectory dump against the simulator and reward oracle");
  oracle->add_option("--preset", f.preset, "Preset the dump was made with")->required();
  oracle->add_option("--trajectory", traj_path, "Trajectory JSON-lines file")->required()->check(CLI::ExistingFile);

  std::vector<std::string> files;
  auto* agg = app.add_subcommand("aggregate", "Mean, std, IQM and quartiles over RunResult files");
  agg->add_option("files", files, "RunResult JSON files")->required()->check(CLI::ExistingFile);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\nrun with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(f, out, err);
    if (*eval) return cmd_eval(f, out, err);
    if (*verify) return cmd_verify(what, verify_seed, samples, report_path, out, err);
    if (*vprop) return cmd_verify_prop1(verify_seed, samples, report_path, out, err);
    if (*oracle) return cmd_oracle_check(f.preset, traj_path, out, err);
    if (*agg) return cmd_aggregate(files, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace flicker
