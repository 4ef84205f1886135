#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "flicker/cli/app.hpp"
#include "flicker/metrics/run_result.hpp"
#include "flicker/metrics/trajectory.hpp"

using namespace flicker;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("flicker_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

const std::string kMicro = "micro_spread_mlp_backbone";

}  // namespace

TEST_CASE("help lists every flag of each subcommand") {
  const std::map<std::string, std::vector<std::string>> flags = {
      {"train",
       {"--preset", "--seed", "--mode", "--domain-aware", "--backbone", "--episodes", "--steps", "--out",
        "--parallel-envs", "--resume"}},
      {"eval", {"--preset", "--seed", "--mode", "--domain-aware", "--backbone", "--episodes", "--checkpoint", "--out",
                "--dump-trajectory"}},
      {"verify", {"--seed", "--samples", "--out"}},
      {"verify-prop1", {"--seed", "--samples", "--out"}},
      {"oracle-check", {"--preset", "--trajectory"}},
  };
  for (const auto& [sub, names] : flags) {
    const Outcome o = cli({sub, "--help"});
    CAPTURE(sub);
    CHECK(o.code == kExitOk);
    for (const auto& n : names) {
      CAPTURE(n);
      CHECK(o.out.find(n) != std::string::npos);
    }
  }
  const Outcome top = cli({"--help"});
  CHECK(top.code == kExitOk);
  for (const char* sub : {"train", "eval", "verify", "verify-prop1", "oracle-check", "aggregate"}) {
    CHECK(top.out.find(sub) != std::string::npos);
  }
}

TEST_CASE("usage errors exit 2") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"train", "--preset", kMicro, "--bogus"}).code == kExitUsage);
  CHECK(cli({"verify", "prop1", "--steps", "5"}).code == kExitUsage);
  CHECK(cli({"train", "--preset", "no_such_preset", "--steps", "0"}).code == kExitUsage);
  CHECK(cli({"train", "--preset", kMicro, "--mode", "sideways"}).code == kExitUsage);
  CHECK(cli({"verify", "everything"}).code == kExitUsage);

  const fs::path dir = scratch("badkey");
  fs::create_directories(dir);
  const fs::path base = fs::path(FLICKERSIM_PRESET_DIR) / "micro" / "micro_spread.yaml";
  std::ofstream(dir / "bad.yaml") << "include: [" << base.string() << "]\nbackbone: mlp\nmethod: flicker\n"
                                  << "train:\n  learning_rat: 0.1\n";
  const Outcome o = cli({"train", "--preset", (dir / "bad.yaml").string(), "--steps", "0", "--out",
                         (dir / "run").string()});
  CHECK(o.code == kExitUsage);
  CHECK(o.err.find("learning_rat") != std::string::npos);
  CHECK(o.err.find(":5") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "run"));
}

TEST_CASE("train writes eval rows and is deterministic") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  for (const auto& dir : {a, b}) {
    const Outcome o = cli({"train", "--preset", kMicro, "--seed", "3", "--steps", "1200", "--episodes", "2",
                           "--out", dir.string()});
    REQUIRE(o.code == kExitOk);
  }
  const std::string log = slurp(a / "metrics.jsonl");
  CHECK(line_count(log) >= 1);
  CHECK(log == slurp(b / "metrics.jsonl"));
  CHECK(slurp(a / "model.ckpt") == slurp(b / "model.ckpt"));
  const RunResult rr = read_run_result(a / "run_result.json");
  CHECK(rr.seed == 3);
  CHECK(rr.env == "spread");
  CHECK(rr.method == "backbone-mlp");
  REQUIRE_FALSE(rr.curve.empty());
  CHECK(rr.curve.front().rewards.size() == 2);
  CHECK(fs::exists(a / "curve.csv"));
}

TEST_CASE("full preset train smoke") {
  const fs::path dir = scratch("spread_attn");
  const Outcome o = cli({"train", "--preset", "spread_flicker_attn", "--seed", "0", "--steps", "10000", "--episodes",
                         "2", "--out", dir.string()});
  REQUIRE(o.code == kExitOk);
  const std::string log = slurp(dir / "metrics.jsonl");
  REQUIRE(line_count(log) >= 1);
  std::istringstream lines(log);
  std::string first;
  std::getline(lines, first);
  const auto row = nlohmann::json::parse(first);
  CHECK(row.at("step").get<std::int64_t>() == 0);
  CHECK(std::isfinite(row.at("mean_reward").get<double>()));
}

TEST_CASE("eval of an untrained net") {
  const fs::path run = scratch("eval_run");
  REQUIRE(cli({"train", "--preset", "tag_flicker_mlp", "--seed", "1", "--steps", "0", "--episodes", "1", "--out",
               run.string()})
              .code == kExitOk);

  SUBCASE("in-domain rewards are finite") {
    const fs::path out = run / "eval_in.json";
    const Outcome o = cli({"eval", "--preset", "tag_flicker_mlp", "--checkpoint", run.string(), "--mode", "in",
                           "--episodes", "3", "--out", out.string()});
    REQUIRE(o.code == kExitOk);
    const RunResult rr = read_run_result(out);
    REQUIRE(rr.curve.size() == 1);
    CHECK(rr.curve[0].rewards.size() == 3);
    for (double r : rr.curve[0].rewards) CHECK(std::isfinite(r));
    CHECK(rr.domain_mode == "in");
  }

  SUBCASE("Tag OOD1 starts 5+5 and gains one or two agents; the dump replays") {
    const fs::path traj_path = run / "ood1.jsonl";
    const Outcome o = cli({"eval", "--preset", "tag_flicker_mlp", "--checkpoint", (run / "model.ckpt").string(),
                           "--mode", "ood1", "--episodes", "1", "--dump-trajectory", traj_path.string()});
    REQUIRE(o.code == kExitOk);
    const Trajectory traj = load_trajectory(traj_path);
    REQUIRE(traj.steps.size() == 200);
    int agents = 0, adversaries = 0;
    for (const auto& e : traj.steps.front().entities) (e.kind == 0 ? agents : adversaries)++;
    CHECK(agents == 5);
    CHECK(adversaries == 5);
    std::set<std::int64_t> agent_ids;
    for (const auto& s : traj.steps) {
      for (const auto& e : s.entities) {
        if (e.kind == 0) agent_ids.insert(e.id);
      }
    }
    CHECK(agent_ids.size() >= 6);
    CHECK(agent_ids.size() <= 7);

    const Outcome check = cli({"oracle-check", "--preset", "tag_flicker_mlp", "--trajectory", traj_path.string()});
    CHECK(check.code == kExitOk);
    const auto rep = nlohmann::json::parse(check.out);
    CHECK(rep.at("steps").get<int>() == 200);
    CHECK(rep.at("mismatches").get<int>() == 0);
    CHECK(rep.at("oracle_mismatches").get<int>() == 0);
  }

  SUBCASE("a checkpoint for another backbone is rejected") {
    const Outcome o = cli({"eval", "--preset", "tag_flicker_attn", "--checkpoint", run.string(), "--episodes", "1"});
    CHECK(o.code == kExitUsage);
  }
}

TEST_CASE("a tampered trajectory fails the oracle check") {
  const fs::path run = scratch("tamper");
  REQUIRE(cli({"train", "--preset", "spread_flicker_attn", "--steps", "0", "--episodes", "1", "--out", run.string()})
              .code == kExitOk);
  const fs::path traj = run / "t.jsonl";
  REQUIRE(cli({"eval", "--preset", "spread_flicker_attn", "--checkpoint", run.string(), "--episodes", "1",
               "--dump-trajectory", traj.string()})
              .code == kExitOk);
  Trajectory t = load_trajectory(traj);
  REQUIRE(t.header.attention);
  t.steps[10].reward += 1e-9;
  export_trajectory(t, traj);
  CHECK(cli({"oracle-check", "--preset", "spread_flicker_attn", "--trajectory", traj.string()}).code == kExitRuntime);
}

TEST_CASE("verify subcommands report JSON and exit codes") {
  const fs::path report = scratch("verify.jsonl");
  CHECK(cli({"verify", "reward-oracle", "--samples", "20", "--out", report.string()}).code == kExitOk);
  CHECK(cli({"verify", "dropout", "--samples", "200", "--out", report.string()}).code == kExitOk);
  const std::string text = slurp(report);
  REQUIRE(line_count(text) == 2);
  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);
  auto j = nlohmann::json::parse(line);
  CHECK(j.at("suite") == "reward-oracle");
  CHECK(j.at("passed") == true);
  CHECK(j.at("cases").get<int>() == 120);
  std::getline(lines, line);
  CHECK(nlohmann::json::parse(line).at("suite") == "dropout");

  const Outcome g = cli({"verify", "gradients", "--samples", "2"});
  CHECK(g.code == kExitOk);
  CHECK(nlohmann::json::parse(g.out).at("violations").get<int>() == 0);
}

TEST_CASE("verify-prop1 emits the grid as CSV") {
  const Outcome o = cli({"verify-prop1", "--samples", "2000", "--seed", "5"});
  CHECK(o.code == kExitOk);
  std::istringstream lines(o.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "n_agents,n_entities,delta,empirical,bound,se,pass");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
  }
  CHECK(rows == 5 * (3 + 4 + 5 + 6 + 7 + 8 + 9 + 10 + 11));
}

TEST_CASE("aggregate summarizes run results") {
  const fs::path dir = scratch("agg");
  fs::create_directories(dir);
  std::vector<std::string> args = {"aggregate"};
  for (int s = 0; s < 4; ++s) {
    RunResult r;
    r.seed = static_cast<std::uint64_t>(s);
    r.env = "spread";
    r.domain_mode = "in";
    r.method = "flicker-mlp";
    r.curve.push_back({0, -10.0, {-10.0}});
    r.curve.push_back({100, static_cast<double>(s + 1), {static_cast<double>(s + 1)}});
    const auto p = dir / ("r" + std::to_string(s) + ".json");
    write_run_result(p, r);
    args.push_back(p.string());
  }
  const Outcome o = cli(args);
  REQUIRE(o.code == kExitOk);
  const auto j = nlohmann::json::parse(o.out);
  CHECK(j.at("iqm").get<double>() == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(j.at("q1").get<double>() == doctest::Approx(1.75));
  CHECK(j.at("q3").get<double>() == doctest::Approx(3.25));
  CHECK(j.at("count").get<int>() == 4);
}
