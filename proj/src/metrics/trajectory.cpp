#include "flicker/metrics/trajectory.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "flicker/verify/reward_oracle.hpp"

namespace flicker {

using nlohmann::json;

Trajectory make_trajectory(const TrajectoryHeader& header, const EpisodeResult& episode, std::size_t type_count) {
  const auto& steps = episode.record.steps;
  if (header.attention && episode.attention.size() != steps.size()) {
    throw std::invalid_argument("trajectory: attention requested but the episode has weights for " +
                                std::to_string(episode.attention.size()) + " of " + std::to_string(steps.size()) +
                                " steps");
  }
  Trajectory traj;
  traj.header = header;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const StepRecord& s = steps[t];
    TrajectoryStep out;
    out.t = static_cast<int>(t);
    for (std::size_t r = 0; r < s.ids.size(); ++r) {
      const auto row = s.entities.row_span(r);
      out.entities.push_back({s.ids[r], s.kinds[r], row[type_count], row[type_count + 1], row[type_count + 2],
                              row[type_count + 3]});
    }
    for (std::size_t i = 0; i < s.agent_count(); ++i) {
      TrajectoryAgent a;
      a.id = s.agent_ids[i];
      a.action = s.actions[i];
      for (std::size_t p = s.kept.begin(i); p < s.kept.end(i); ++p) a.kept.push_back(s.ids[s.kept_rows[p]]);
      if (header.attention) a.attention = episode.attention[t].at(i);
      out.agents.push_back(std::move(a));
    }
    out.reward = s.reward;
    out.done = s.done;
    traj.steps.push_back(std::move(out));
  }
  return traj;
}

void write_trajectory(std::ostream& os, const Trajectory& traj) {
  const auto& h = traj.header;
  json head = {{"schema", kTrajectorySchema}, {"version", kTrajectoryVersion},
               {"env", h.env},                {"domain_mode", h.domain_mode},
               {"seed", h.seed},              {"backbone", h.backbone},
               {"method", h.method},          {"domain_aware", h.domain_aware},
               {"types", h.types},            {"n_train", h.n_train},
               {"attention", h.attention},    {"entity_fields", {"id", "kind", "x", "y", "vx", "vy"}}};
  os << head.dump() << '\n';
  for (const auto& s : traj.steps) {
    json ents = json::array();
    for (const auto& e : s.entities) ents.push_back({e.id, e.kind, e.x, e.y, e.vx, e.vy});
    json agents = json::array();
    for (const auto& a : s.agents) {
      json ja = {{"id", a.id}, {"action", a.action}, {"kept", a.kept}};
      if (h.attention) ja["attention"] = a.attention;
      agents.push_back(std::move(ja));
    }
    os << json{{"t", s.t}, {"entities", ents}, {"agents", agents}, {"reward", s.reward}, {"done", s.done}}.dump()
       << '\n';
  }
}

Trajectory read_trajectory(std::istream& is) {
  Trajectory traj;
  std::string line;
  std::size_t n = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      if (!have_header) {
        if (j.at("schema").get<std::string>() != kTrajectorySchema) throw std::runtime_error("not a trajectory dump");
        if (j.at("version").get<int>() != kTrajectoryVersion) throw std::runtime_error("unsupported version");
        auto& h = traj.header;
        h.env = j.at("env").get<std::string>();
        h.domain_mode = j.at("domain_mode").get<std::string>();
        h.seed = j.at("seed").get<std::uint64_t>();
        h.backbone = j.at("backbone").get<std::string>();
        h.method = j.at("method").get<std::string>();
        h.domain_aware = j.at("domain_aware").get<bool>();
        h.types = j.at("types").get<std::vector<std::string>>();
        h.n_train = j.at("n_train").get<std::vector<int>>();
        h.attention = j.at("attention").get<bool>();
        have_header = true;
        continue;
      }
      TrajectoryStep s;
      s.t = j.at("t").get<int>();
      for (const auto& e : j.at("entities")) {
        s.entities.push_back({e.at(0).get<std::int64_t>(), e.at(1).get<int>(), e.at(2).get<double>(),
                              e.at(3).get<double>(), e.at(4).get<double>(), e.at(5).get<double>()});
      }
      for (const auto& a : j.at("agents")) {
        TrajectoryAgent ta;
        ta.id = a.at("id").get<std::int64_t>();
        ta.action = a.at("action").get<int>();
        ta.kept = a.at("kept").get<std::vector<std::int64_t>>();
        if (a.contains("attention")) ta.attention = a.at("attention").get<std::vector<double>>();
        s.agents.push_back(std::move(ta));
      }
      s.reward = j.at("reward").get<double>();
      s.done = j.at("done").get<bool>();
      traj.steps.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw std::runtime_error("trajectory line " + std::to_string(n) + ": " + e.what());
    }
  }
  if (!have_header) throw std::runtime_error("trajectory: missing header line");
  return traj;
}

void export_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_trajectory(os, traj);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_trajectory(is);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

ReplayReport replay_trajectory(const Env& env, const Trajectory& traj) {
  if (traj.header.env != env_name(env.scenario().env)) {
    throw std::invalid_argument("replay: dump is for '" + traj.header.env + "', env is '" +
                                std::string(env_name(env.scenario().env)) + "'");
  }
  ReplayReport rep;
  WorldState state = env.reset(traj.header.seed);
  auto mismatch = [&](const TrajectoryStep& s, const std::string& what) {
    if (rep.mismatches++ == 0) rep.first_mismatch = "step " + std::to_string(s.t) + ": " + what;
  };
  for (const auto& s : traj.steps) {
    ++rep.steps;
    std::size_t k = 0;
    bool same = true;
    for (const auto& e : state.entities) {
      if (!e.active) continue;
      if (k >= s.entities.size()) {
        same = false;
        break;
      }
      const auto& d = s.entities[k++];
      same = same && d.id == e.id && d.kind == e.kind && d.x == e.pos.x && d.y == e.pos.y && d.vx == e.vel.x &&
             d.vy == e.vel.y;
    }
    if (!same || k != s.entities.size()) {
      mismatch(s, "entity states differ");
    }
    std::vector<int> actions;
    for (const auto& a : s.agents) actions.push_back(a.action);
    if (state.tick != s.t) mismatch(s, "tick " + std::to_string(state.tick) + " in replay");
    const StepResult r = env.step(state, actions);
    rep.max_reward_error = std::max(rep.max_reward_error, std::abs(r.reward - s.reward));
    if (r.reward != s.reward) mismatch(s, "reward differs");
    if (oracle_reward(env.scenario(), state.entities) != r.reward) ++rep.oracle_mismatches;
    if (r.done != s.done) mismatch(s, "done flag differs");
    if (r.done) break;
  }
  if (rep.steps != traj.steps.size()) {
    rep.mismatches += traj.steps.size() - rep.steps;
    if (rep.first_mismatch.empty()) rep.first_mismatch = "replay ended early";
  }
  return rep;
}

}  // namespace flicker
