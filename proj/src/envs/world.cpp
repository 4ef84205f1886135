#include "flicker/envs/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace flicker {

std::vector<std::size_t> WorldState::of_type(int kind) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (entities[i].active && entities[i].kind == kind) out.push_back(i);
  }
  return out;
}

std::vector<int> WorldState::counts(std::size_t type_count) const {
  std::vector<int> out(type_count, 0);
  for (const auto& e : entities) {
    if (e.active) ++out.at(static_cast<std::size_t>(e.kind));
  }
  return out;
}

const Entity* WorldState::find(std::int64_t id) const {
  for (const auto& e : entities) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

Env::Env(std::shared_ptr<const Scenario> scenario, DomainSpec domain)
    : scenario_(std::move(scenario)), domain_(std::move(domain)) {
  if (!scenario_) throw std::invalid_argument("env: null scenario");
  scenario_->validate();
  domain_.validate(scenario_->type_count());
}

EpisodePlan Env::sample_plan(Rng& rng) const {
  EpisodePlan plan;
  for (const auto& t : domain_.types) {
    plan.init.push_back(static_cast<int>(rng.uniform_int(t.init.lo, t.init.hi)));
    plan.intra.push_back(static_cast<int>(rng.uniform_int(t.intra.lo, t.intra.hi)));
  }
  return plan;
}

WorldState Env::reset(std::uint64_t seed) const {
  Rng rng = Rng::derive(seed, {0});
  return reset(seed, sample_plan(rng));
}

namespace {

double sample_axis(const std::vector<Interval>& intervals, Rng& rng) {
  double total = 0.0;
  for (const auto& iv : intervals) total += iv.hi - iv.lo;
  if (intervals.size() == 1 || total <= 0.0) return rng.uniform(intervals.front().lo, intervals.front().hi);
  double pick = rng.uniform(0.0, total);
  for (const auto& iv : intervals) {
    const double len = iv.hi - iv.lo;
    if (pick < len) return iv.lo + pick;
    pick -= len;
  }
  return intervals.back().hi;
}

Vec2 random_heading(Rng& rng) {
  const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return {std::cos(a), std::sin(a)};
}

double clamp_abs(double v, double b) { return std::clamp(v, -b, b); }

}  // namespace

Entity Env::spawn(int kind, const SpawnRule& rule, Rng& rng) const {
  const Scenario& sc = *scenario_;
  const EntityType& type = sc.types[static_cast<std::size_t>(kind)];
  Entity e;
  e.kind = kind;
  e.radius = type.radius;
  const double b = sc.bound;
  if (rule.edge) {
    const auto side = rng.uniform_int(0, 3);
    const double u = rng.uniform(-1.0, 1.0);
    const double d0 = side == 0, d1 = side == 1, d2 = side == 2, d3 = side == 3;
    e.pos.x = b * (u * (d0 + d2) + d1 - d3);
    e.pos.y = b * (u * (d1 + d3) + d0 - d2);
  } else {
    const double scale = rule.absolute ? 1.0 : b;
    e.pos.x = scale * sample_axis(rule.x, rng);
    e.pos.y = scale * sample_axis(rule.y, rng);
  }
  if (type.behavior == Behavior::Wander) e.heading = random_heading(rng);
  return e;
}

void Env::activate(WorldState& state, Entity e) const {
  e.id = state.next_id++;
  e.active = true;
  state.entities.push_back(e);
}

WorldState Env::reset(std::uint64_t seed, const EpisodePlan& plan) const {
  const Scenario& sc = *scenario_;
  if (plan.init.size() != sc.type_count() || plan.intra.size() != sc.type_count()) {
    throw std::invalid_argument("env: episode plan does not match the scenario's entity types");
  }
  WorldState state;
  state.seed = seed;
  Rng spawn_rng = Rng::derive(seed, {1});
  for (std::size_t k = 0; k < sc.type_count(); ++k) {
    if (plan.init[k] < 0 || plan.intra[k] < 0) throw std::invalid_argument("env: negative entity count in plan");
    for (int i = 0; i < plan.init[k]; ++i) {
      activate(state, spawn(static_cast<int>(k), sc.types[k].init_spawn, spawn_rng));
    }
  }
  const int first = static_cast<int>(std::ceil(sc.physics.arrival_window.lo * sc.t_max));
  const int last = std::min(sc.t_max - 1, static_cast<int>(std::floor(sc.physics.arrival_window.hi * sc.t_max)));
  for (std::size_t k = 0; k < sc.type_count(); ++k) {
    for (int i = 0; i < plan.intra[k]; ++i) {
      PendingArrival p;
      p.tick = static_cast<int>(spawn_rng.uniform_int(std::min(first, last), last));
      p.entity = spawn(static_cast<int>(k), sc.types[k].intra_spawn, spawn_rng);
      state.pending.push_back(p);
    }
  }
  std::stable_sort(state.pending.begin(), state.pending.end(),
                   [](const PendingArrival& a, const PendingArrival& b) { return a.tick < b.tick; });
  state.rng = Rng::derive(seed, {2});
  return state;
}

std::vector<Vec2> Env::heuristic_policy(WorldState& state) const {
  const Scenario& sc = *scenario_;
  const Physics& ph = sc.physics;
  const double vmax = ph.agent_speed();
  std::vector<Vec2> vel(state.entities.size());
  const auto agents = state.of_type(sc.agent_type());

  auto nearest_agent = [&](const Entity& e) -> const Entity* {
    const Entity* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (auto i : agents) {
      const double d = distance(e, state.entities[i]);
      if (d < best_d) {
        best_d = d;
        best = &state.entities[i];
      }
    }
    return best;
  };
  auto unit = [](Vec2 v) {
    const double n = v.norm();
    return n > 0.0 ? v * (1.0 / n) : Vec2{};
  };

  // The landmark closest to any agent is shared by every seeking entity.
  const Entity* lure = nullptr;
  {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : state.entities) {
      if (!e.active || sc.types[static_cast<std::size_t>(e.kind)].behavior != Behavior::Static) continue;
      for (auto i : agents) {
        const double d = distance(state.entities[i], e);
        if (d < best) {
          best = d;
          lure = &e;
        }
      }
    }
  }

  const bool redraw = state.tick > 0 && state.tick % ph.wander_period == 0;
  for (std::size_t i = 0; i < state.entities.size(); ++i) {
    Entity& e = state.entities[i];
    if (!e.active) continue;
    switch (sc.types[static_cast<std::size_t>(e.kind)].behavior) {
      case Behavior::Agent:
      case Behavior::Static:
        break;
      case Behavior::Chase:
        if (const Entity* a = nearest_agent(e)) vel[i] = unit(a->pos - e.pos) * (ph.chase_speed * vmax);
        break;
      case Behavior::Flee:
        if (const Entity* a = nearest_agent(e)) vel[i] = unit(e.pos - a->pos) * (ph.flee_speed * vmax);
        break;
      case Behavior::Wander:
        if (redraw) e.heading = random_heading(state.rng);
        vel[i] = e.heading * (ph.wander_speed * vmax);
        break;
      case Behavior::SeekLandmark:
        if (lure != nullptr) {
          const Vec2 gap = lure->pos - e.pos;
          const double speed = std::min(ph.seek_speed * vmax, gap.norm() / ph.dt);
          vel[i] = unit(gap) * speed;
        }
        break;
    }
  }
  return vel;
}

StepResult Env::step(WorldState& state, std::span<const int> actions) const {
  const Scenario& sc = *scenario_;
  const Physics& ph = sc.physics;
  if (state.tick >= sc.t_max) throw std::logic_error("env: step called on a finished episode");
  const auto agents = state.of_type(sc.agent_type());
  if (actions.size() != agents.size()) {
    throw std::invalid_argument("env: got " + std::to_string(actions.size()) + " actions for " +
                                std::to_string(agents.size()) + " active agents");
  }
  for (int a : actions) {
    if (a < 0 || a >= kActionCount) throw std::invalid_argument("env: action " + std::to_string(a) + " out of range");
  }

  const auto vel = heuristic_policy(state);
  for (std::size_t i = 0; i < state.entities.size(); ++i) {
    Entity& e = state.entities[i];
    const Behavior b = sc.types[static_cast<std::size_t>(e.kind)].behavior;
    if (!e.active || b == Behavior::Agent || b == Behavior::Static) continue;
    Vec2 next = e.pos + vel[i] * ph.dt;
    if (b == Behavior::Flee || b == Behavior::Wander) {
      next = {clamp_abs(next.x, sc.bound), clamp_abs(next.y, sc.bound)};
    }
    e.vel = (next - e.pos) * (1.0 / ph.dt);
    e.pos = next;
  }

  for (std::size_t k = 0; k < agents.size(); ++k) {
    Entity& e = state.entities[agents[k]];
    Vec2 f;
    switch (actions[k]) {
      case kLeft: f.x = -ph.force; break;
      case kRight: f.x = ph.force; break;
      case kDown: f.y = -ph.force; break;
      case kUp: f.y = ph.force; break;
      default: break;
    }
    e.vel = e.vel * (1.0 - ph.damping) + f * (ph.dt / ph.mass);
    e.pos = e.pos + e.vel * ph.dt;
    e.last_action = actions[k];
  }

  StepResult result;
  std::size_t n = 0;
  while (n < state.pending.size() && state.pending[n].tick == state.tick) {
    activate(state, state.pending[n].entity);
    result.arrivals.push_back(state.entities.back().id);
    ++n;
  }
  state.pending.erase(state.pending.begin(), state.pending.begin() + static_cast<std::ptrdiff_t>(n));

  result.reward = reward(state);
  ++state.tick;
  result.done = state.tick == sc.t_max;
  return result;
}

Observation Env::observe(const WorldState& state) const {
  const Scenario& sc = *scenario_;
  const std::size_t L = sc.type_count();
  Observation obs;
  std::size_t n = 0;
  for (const auto& e : state.entities) n += e.active ? 1 : 0;
  obs.features = Tensor::matrix(n, sc.feature_width());
  std::size_t r = 0;
  for (const auto& e : state.entities) {
    if (!e.active) continue;
    auto row = obs.features.row_span(r);
    row[static_cast<std::size_t>(e.kind)] = 1.0;
    row[L] = e.pos.x;
    row[L + 1] = e.pos.y;
    row[L + 2] = e.vel.x;
    row[L + 3] = e.vel.y;
    obs.ids.push_back(e.id);
    obs.kinds.push_back(e.kind);
    if (e.kind == sc.agent_type()) {
      obs.agent_rows.push_back(r);
      std::array<double, kActionCount> last{};
      if (e.last_action >= 0) last[static_cast<std::size_t>(e.last_action)] = 1.0;
      obs.last_actions.push_back(last);
    }
    ++r;
  }
  return obs;
}

double Env::reward(const WorldState& state) const { return compute_reward(*scenario_, state.entities); }

double boundary_penalty(double x, double y, double bound, double offset) {
  const bool outside = std::fabs(x) > bound || std::fabs(y) > bound;
  if (!outside) return 0.0;
  return std::max(-25.0, std::min(-std::pow(5.0, std::fabs(x) - offset), -std::pow(5.0, std::fabs(y) - offset)));
}

namespace {

struct Groups {
  std::vector<const Entity*> agents;
  std::vector<const Entity*> adversaries;
  std::vector<const Entity*> targets;
};

Groups group(const Scenario& sc, std::span<const Entity> entities) {
  const int agent = sc.type_index("agent");
  const int adversary = sc.type_index("adversary");
  const int target = sc.type_index("target");
  Groups g;
  for (const auto& e : entities) {
    if (!e.active) continue;
    if (e.kind == agent) g.agents.push_back(&e);
    else if (e.kind == adversary) g.adversaries.push_back(&e);
    else if (e.kind == target) g.targets.push_back(&e);
  }
  return g;
}

// min over e in `to` of d(e, from), argument order as written in the reward equations.
double min_distance(const Entity& from, const std::vector<const Entity*>& to) {
  double best = std::numeric_limits<double>::infinity();
  for (const Entity* e : to) best = std::min(best, distance(*e, from));
  return best;
}

void require(bool ok, const Scenario& sc, const char* what) {
  if (!ok) throw std::invalid_argument(std::string(env_name(sc.env)) + " reward: no active " + what);
}

}  // namespace

double compute_reward(const Scenario& sc, std::span<const Entity> entities) {
  const Groups g = group(sc, entities);
  require(!g.agents.empty(), sc, "agents");
  const double b = sc.bound;
  const double c = sc.penalty_offset();
  switch (sc.env) {
    case EnvId::Tag: {
      double r = 0.0;
      for (const Entity* a : g.agents) {
        double hits = 0.0;
        for (const Entity* adv : g.adversaries) hits += collides(*a, *adv) ? 1.0 : 0.0;
        r += boundary_penalty(a->pos.x, a->pos.y, b, c) - 2.0 * hits;
      }
      return r;
    }
    case EnvId::Spread: {
      double s = 0.0;
      for (const Entity* t : g.targets) s += min_distance(*t, g.agents);
      return -s;
    }
    case EnvId::Guard: {
      require(!g.targets.empty(), sc, "targets");
      const std::size_t i = (g.agents.size() + g.targets.size() - 1) / g.targets.size();
      double s = 0.0;
      std::vector<double> d(g.agents.size());
      for (const Entity* t : g.targets) {
        double hits = 0.0;
        for (std::size_t k = 0; k < g.agents.size(); ++k) {
          d[k] = distance(*g.agents[k], *t);
          hits += d[k] < 0.0 ? 1.0 : 0.0;
        }
        std::sort(d.begin(), d.end());
        double closest = 0.0;
        for (std::size_t k = 0; k < i; ++k) closest += d[k];
        s += closest + 5.0 * hits;
      }
      return -s;
    }
    case EnvId::Repel: {
      require(!g.adversaries.empty(), sc, "adversaries");
      double bnd = 0.0;
      for (const Entity* a : g.agents) bnd += boundary_penalty(a->pos.x, a->pos.y, b, c);
      double far = 0.0;
      for (const Entity* adv : g.adversaries) far += min_distance(*adv, g.agents);
      return bnd + far;
    }
    case EnvId::Adversary: {
      require(!g.adversaries.empty(), sc, "adversaries");
      double ours = 0.0;
      for (const Entity* t : g.targets) ours += min_distance(*t, g.agents);
      double theirs = 0.0;
      for (const Entity* t : g.targets) theirs += min_distance(*t, g.adversaries);
      return -ours + theirs;
    }
    case EnvId::Hunt: {
      require(!g.adversaries.empty(), sc, "adversaries");
      double chase = 0.0;
      for (const Entity* adv : g.adversaries) chase += min_distance(*adv, g.agents);
      double cover = 0.0;
      for (const Entity* a : g.agents) {
        double best = std::numeric_limits<double>::infinity();
        for (const Entity* adv : g.adversaries) best = std::min(best, distance(*a, *adv));
        cover += best;
      }
      return -(chase / static_cast<double>(g.adversaries.size()) + cover / static_cast<double>(g.agents.size()));
    }
  }
  return 0.0;
}

}  // namespace flicker
