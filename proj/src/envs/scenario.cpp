#include "flicker/envs/scenario.hpp"

#include <stdexcept>
#include <string>

namespace flicker {

namespace {

constexpr std::string_view kEnvNames[] = {"tag", "spread", "guard", "repel", "adversary", "hunt"};
constexpr std::string_view kBehaviorNames[] = {"agent", "static", "chase", "flee", "wander", "seek_landmark"};
constexpr std::string_view kModeNames[] = {"in", "ood1", "ood2"};

std::vector<std::string_view> required_types(EnvId env) {
  switch (env) {
    case EnvId::Tag:
    case EnvId::Repel:
    case EnvId::Hunt: return {"agent", "adversary"};
    case EnvId::Spread:
    case EnvId::Guard: return {"agent", "target"};
    case EnvId::Adversary: return {"agent", "adversary", "target", "decoy"};
  }
  return {};
}

}  // namespace

std::string_view env_name(EnvId id) { return kEnvNames[static_cast<int>(id)]; }

EnvId parse_env(std::string_view name) {
  for (int i = 0; i < 6; ++i) {
    if (kEnvNames[i] == name) return static_cast<EnvId>(i);
  }
  throw std::invalid_argument("unknown environment '" + std::string(name) +
                              "' (expected tag, spread, guard, repel, adversary or hunt)");
}

std::string_view behavior_name(Behavior b) { return kBehaviorNames[static_cast<int>(b)]; }

Behavior parse_behavior(std::string_view name) {
  for (int i = 0; i < 6; ++i) {
    if (kBehaviorNames[i] == name) return static_cast<Behavior>(i);
  }
  throw std::invalid_argument("unknown behavior '" + std::string(name) + "'");
}

std::string_view domain_mode_name(DomainMode m) { return kModeNames[static_cast<int>(m)]; }

DomainMode parse_domain_mode(std::string_view name) {
  if (name == "in" || name == "in-domain" || name == "in_domain") return DomainMode::InDomain;
  if (name == "ood1") return DomainMode::Ood1;
  if (name == "ood2") return DomainMode::Ood2;
  throw std::invalid_argument("unknown domain mode '" + std::string(name) + "' (expected in, ood1 or ood2)");
}

std::vector<int> DomainSpec::lower_bounds() const {
  std::vector<int> out;
  for (const auto& t : types) out.push_back(t.init.lo);
  return out;
}

std::vector<int> DomainSpec::upper_bounds() const {
  std::vector<int> out;
  for (const auto& t : types) out.push_back(t.init.hi + t.intra.hi);
  return out;
}

void DomainSpec::validate(std::size_t type_count) const {
  if (types.size() != type_count) {
    throw std::invalid_argument("domain lists " + std::to_string(types.size()) + " entity types, scenario has " +
                                std::to_string(type_count));
  }
  for (const auto& t : types) {
    for (const CountRange& r : {t.init, t.intra}) {
      if (r.lo < 0 || r.hi < r.lo) {
        throw std::invalid_argument("domain count range [" + std::to_string(r.lo) + ", " + std::to_string(r.hi) +
                                    "] is invalid");
      }
    }
  }
}

int Scenario::agent_type() const {
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (types[i].behavior == Behavior::Agent) return static_cast<int>(i);
  }
  return -1;
}

int Scenario::type_index(std::string_view name) const {
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (types[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

const DomainSpec& Scenario::domain(DomainMode mode) const {
  switch (mode) {
    case DomainMode::InDomain: return in_domain;
    case DomainMode::Ood1: return ood1;
    case DomainMode::Ood2: return ood2;
  }
  return in_domain;
}

void Scenario::validate() const {
  const std::string label(env_name(env));
  if (!(bound > 0.0)) throw std::invalid_argument(label + ": bound must be positive");
  if (t_max <= 0) throw std::invalid_argument(label + ": t_max must be positive");
  for (auto name : required_types(env)) {
    if (type_index(name) < 0) throw std::invalid_argument(label + ": missing entity type '" + std::string(name) + "'");
  }
  int agents = 0;
  for (const auto& t : types) {
    if (t.behavior == Behavior::Agent) ++agents;
    if (t.radius < 0.0) throw std::invalid_argument(label + ": negative radius for '" + t.name + "'");
    for (const SpawnRule* r : {&t.init_spawn, &t.intra_spawn}) {
      if (r->edge) continue;
      if (r->x.empty() || r->y.empty()) {
        throw std::invalid_argument(label + ": spawn rule for '" + t.name + "' needs x and y intervals");
      }
      for (const auto& iv : r->x) {
        if (iv.hi < iv.lo) throw std::invalid_argument(label + ": empty spawn interval for '" + t.name + "'");
      }
      for (const auto& iv : r->y) {
        if (iv.hi < iv.lo) throw std::invalid_argument(label + ": empty spawn interval for '" + t.name + "'");
      }
    }
  }
  if (agents != 1 || types.front().behavior != Behavior::Agent) {
    throw std::invalid_argument(label + ": the first entity type must be the only agent type");
  }
  if (physics.dt <= 0.0 || physics.mass <= 0.0 || physics.damping <= 0.0 || physics.damping > 1.0) {
    throw std::invalid_argument(label + ": physics needs dt > 0, mass > 0 and damping in (0, 1]");
  }
  if (physics.wander_period <= 0) throw std::invalid_argument(label + ": wander_period must be positive");
  if (physics.arrival_window.lo < 0.0 || physics.arrival_window.hi > 1.0 ||
      physics.arrival_window.hi < physics.arrival_window.lo) {
    throw std::invalid_argument(label + ": arrival_window must satisfy 0 <= lo <= hi <= 1");
  }
  in_domain.validate(types.size());
  ood1.validate(types.size());
  ood2.validate(types.size());
}

}  // namespace flicker
