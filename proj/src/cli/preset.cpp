#include "flicker/cli/preset.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

namespace flicker {

std::vector<int> Preset::n_train() const {
  if (!n_train_override.empty()) return n_train_override;
  return scenario->in_domain.upper_bounds();
}

ModelConfig Preset::model_config() const {
  ModelConfig m = model;
  m.type_count = scenario->type_count();
  m.feature_width = scenario->feature_width();
  m.agent_type = scenario->agent_type();
  m.slots = n_train();
  return m;
}

TrainSetup Preset::train_setup() const {
  TrainSetup s;
  s.scenario = scenario;
  s.eval_mode = domain_mode;
  s.method = method;
  s.domain_aware = domain_aware;
  s.n_train = n_train();
  s.train = train;
  s.model = model_config();
  return s;
}

void Preset::validate() const {
  if (!scenario) throw std::invalid_argument("preset: no scenario");
  scenario->validate();
  train.validate();
  const auto n = n_train();
  if (n.size() != scenario->type_count()) throw std::invalid_argument("preset: n_train needs one entry per type");
  for (int v : n) {
    if (v < 1) throw std::invalid_argument("preset: n_train entries must be at least 1");
  }
  model_config().validate();
}

namespace {

using S = Schema;
using T = Schema::Type;

std::shared_ptr<const Schema> preset_schema() {
  static const auto schema = [] {
    auto num = S::of(T::Number);
    auto integer = S::of(T::Int);
    auto boolean = S::of(T::Bool);
    auto str = S::of(T::String);
    auto spawn_rule = S::map({{"edge", boolean}, {"absolute", boolean}, {"x", S::of(T::Intervals)},
                              {"y", S::of(T::Intervals)}});
    auto type = S::map({{"behavior", str},
                        {"radius", num},
                        {"spawn", S::map({{"init", spawn_rule}, {"intra", spawn_rule}})}});
    auto domain = S::map({{"init", S::dict(S::of(T::Count))}, {"intra", S::dict(S::of(T::Count))}});
    auto physics = S::map({{"dt", num},
                           {"damping", num},
                           {"mass", num},
                           {"force", num},
                           {"chase_speed", num},
                           {"flee_speed", num},
                           {"wander_speed", num},
                           {"seek_speed", num},
                           {"wander_period", integer},
                           {"arrival_window", S::of(T::Interval)}});
    auto env = S::map({{"name", str},
                       {"bound", num},
                       {"t_max", integer},
                       {"boundary_offset", num},
                       {"physics", physics},
                       {"types", S::dict(type)},
                       {"domains", S::map({{"in", domain}, {"ood1", domain}, {"ood2", domain}})}});
    auto train = S::map({{"test_interval", integer},
                         {"test_episodes", integer},
                         {"epsilon_start", num},
                         {"epsilon_finish", num},
                         {"epsilon_anneal_steps", integer},
                         {"parallel_envs", integer},
                         {"batch_size", integer},
                         {"buffer_size", integer},
                         {"max_timesteps", integer},
                         {"lr", num},
                         {"gamma", num},
                         {"target_update_interval", integer},
                         {"learn_every", integer},
                         {"grad_clip", num},
                         {"double_q", boolean},
                         {"checkpoint_interval", integer}});
    auto model = S::map({{"token_dim", integer},
                         {"attention_heads", integer},
                         {"rnn_input_dim", integer},
                         {"rnn_hidden_dim", integer},
                         {"mixing_embed_dim", integer},
                         {"hypernet_embed_dim", integer},
                         {"hyper_activation", str}});
    return S::map({{"include", S::seq(str)},
                   {"env", env},
                   {"domain_mode", str},
                   {"backbone", str},
                   {"method", str},
                   {"domain_aware", boolean},
                   {"n_train", S::dict(integer)},
                   {"train", train},
                   {"model", model}});
  }();
  return schema;
}

void load_into(const std::filesystem::path& path, ConfigNode& merged, std::vector<std::filesystem::path>& stack) {
  const auto canonical = std::filesystem::weakly_canonical(path);
  if (std::find(stack.begin(), stack.end(), canonical) != stack.end()) {
    throw ConfigError({path.string(), 0, 0}, "include cycle");
  }
  ConfigNode doc = parse_config_file(path);
  if (!doc.is_map()) throw ConfigError(doc.loc, "a preset must be a map");
  auto problems = check_schema(doc, *preset_schema());
  if (!problems.empty()) {
    std::string msg = problems.front().what();
    for (std::size_t i = 1; i < problems.size(); ++i) msg += "\n" + std::string(problems[i].what());
    throw ConfigError(problems.front().where(), msg.substr(problems.front().where().str().size() + 2));
  }
  stack.push_back(canonical);
  if (const ConfigNode* inc = doc.find("include")) {
    for (const auto& item : inc->items) {
      std::filesystem::path target = path.parent_path() / item.as_string();
      if (!std::filesystem::exists(target)) throw ConfigError(item.loc, "included file '" + target.string() + "' not found");
      load_into(target, merged, stack);
    }
  }
  stack.pop_back();
  doc.entries.erase(std::remove_if(doc.entries.begin(), doc.entries.end(),
                                   [](const auto& kv) { return kv.first == "include"; }),
                    doc.entries.end());
  merge_config(merged, doc);
}

const ConfigNode& require(const ConfigNode& parent, const std::string& key, const std::string& path) {
  const ConfigNode* n = parent.find(key);
  if (!n) throw ConfigError(parent.loc, "missing required key '" + (path.empty() ? key : path + "." + key) + "'");
  return *n;
}

template <class Fn>
void optional(const ConfigNode& parent, const std::string& key, Fn&& fn) {
  if (const ConfigNode* n = parent.find(key)) fn(*n);
}

std::vector<Interval> intervals(const ConfigNode& n) {
  std::vector<Interval> out;
  auto one = [](const ConfigNode& iv) {
    Interval i{iv.items[0].as_number(), iv.items[1].as_number()};
    if (i.hi < i.lo) throw ConfigError(iv.loc, "interval has hi < lo");
    return i;
  };
  if (n.items.size() == 2 && n.items[0].is_scalar()) {
    out.push_back(one(n));
  } else {
    for (const auto& iv : n.items) out.push_back(one(iv));
  }
  return out;
}

SpawnRule spawn_rule(const ConfigNode& n) {
  SpawnRule r;
  optional(n, "edge", [&](const ConfigNode& v) { r.edge = v.as_bool(); });
  optional(n, "absolute", [&](const ConfigNode& v) { r.absolute = v.as_bool(); });
  optional(n, "x", [&](const ConfigNode& v) { r.x = intervals(v); });
  optional(n, "y", [&](const ConfigNode& v) { r.y = intervals(v); });
  if (!r.edge && (r.x.empty() || r.y.empty())) throw ConfigError(n.loc, "spawn rule needs edge: true or both x and y");
  return r;
}

CountRange count_range(const ConfigNode& n) {
  CountRange c;
  if (n.is_scalar()) {
    c.lo = c.hi = static_cast<int>(n.as_int());
  } else {
    c.lo = static_cast<int>(n.items[0].as_int());
    c.hi = static_cast<int>(n.items[1].as_int());
  }
  if (c.lo < 0 || c.hi < c.lo) throw ConfigError(n.loc, "count range must satisfy 0 <= lo <= hi");
  return c;
}

DomainSpec domain_spec(const ConfigNode& n, const Scenario& sc, const std::string& path) {
  DomainSpec d;
  d.types.resize(sc.type_count());
  const ConfigNode& init = require(n, "init", path);
  for (const auto& [name, value] : init.entries) {
    const int k = sc.type_index(name);
    if (k < 0) throw ConfigError(value.loc, "unknown entity type '" + name + "'");
    d.types[static_cast<std::size_t>(k)].init = count_range(value);
  }
  for (const auto& t : sc.types) {
    if (!init.find(t.name)) throw ConfigError(init.loc, path + ".init: missing count for type '" + t.name + "'");
  }
  optional(n, "intra", [&](const ConfigNode& intra) {
    for (const auto& [name, value] : intra.entries) {
      const int k = sc.type_index(name);
      if (k < 0) throw ConfigError(value.loc, "unknown entity type '" + name + "'");
      d.types[static_cast<std::size_t>(k)].intra = count_range(value);
    }
  });
  return d;
}

template <class Fn>
auto wrap(const SourceLoc& loc, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(loc, e.what());
  }
}

std::shared_ptr<Scenario> scenario_from(const ConfigNode& env) {
  auto sc = std::make_shared<Scenario>();
  const ConfigNode& name = require(env, "name", "env");
  sc->env = wrap(name.loc, [&] { return parse_env(name.as_string()); });
  sc->bound = require(env, "bound", "env").as_number();
  sc->t_max = static_cast<int>(require(env, "t_max", "env").as_int());
  optional(env, "boundary_offset", [&](const ConfigNode& v) { sc->boundary_offset = v.as_number(); });
  optional(env, "physics", [&](const ConfigNode& p) {
    Physics& ph = sc->physics;
    optional(p, "dt", [&](const ConfigNode& v) { ph.dt = v.as_number(); });
    optional(p, "damping", [&](const ConfigNode& v) { ph.damping = v.as_number(); });
    optional(p, "mass", [&](const ConfigNode& v) { ph.mass = v.as_number(); });
    optional(p, "force", [&](const ConfigNode& v) { ph.force = v.as_number(); });
    optional(p, "chase_speed", [&](const ConfigNode& v) { ph.chase_speed = v.as_number(); });
    optional(p, "flee_speed", [&](const ConfigNode& v) { ph.flee_speed = v.as_number(); });
    optional(p, "wander_speed", [&](const ConfigNode& v) { ph.wander_speed = v.as_number(); });
    optional(p, "seek_speed", [&](const ConfigNode& v) { ph.seek_speed = v.as_number(); });
    optional(p, "wander_period", [&](const ConfigNode& v) { ph.wander_period = static_cast<int>(v.as_int()); });
    optional(p, "arrival_window", [&](const ConfigNode& v) { ph.arrival_window = intervals(v).front(); });
  });
  const ConfigNode& types = require(env, "types", "env");
  for (const auto& [tname, t] : types.entries) {
    EntityType et;
    et.name = tname;
    const ConfigNode& b = require(t, "behavior", "env.types." + tname);
    et.behavior = wrap(b.loc, [&] { return parse_behavior(b.as_string()); });
    optional(t, "radius", [&](const ConfigNode& v) { et.radius = v.as_number(); });
    const ConfigNode& spawn = require(t, "spawn", "env.types." + tname);
    et.init_spawn = spawn_rule(require(spawn, "init", "env.types." + tname + ".spawn"));
    et.intra_spawn = spawn_rule(require(spawn, "intra", "env.types." + tname + ".spawn"));
    sc->types.push_back(std::move(et));
  }
  const ConfigNode& domains = require(env, "domains", "env");
  sc->in_domain = domain_spec(require(domains, "in", "env.domains"), *sc, "env.domains.in");
  sc->ood1 = domain_spec(require(domains, "ood1", "env.domains"), *sc, "env.domains.ood1");
  sc->ood2 = domain_spec(require(domains, "ood2", "env.domains"), *sc, "env.domains.ood2");
  wrap(env.loc, [&] {
    sc->validate();
    return 0;
  });
  return sc;
}

}  // namespace

std::filesystem::path preset_dir() {
  if (const char* env = std::getenv("FLICKERSIM_PRESET_DIR"); env && *env) return env;
  return FLICKERSIM_PRESET_DIR;
}

std::filesystem::path resolve_preset(const std::string& name_or_path) {
  std::filesystem::path p(name_or_path);
  if (std::filesystem::is_regular_file(p)) return p;
  const auto dir = preset_dir();
  const std::string stem = p.has_extension() ? p.stem().string() : p.filename().string();
  if (std::filesystem::is_directory(dir)) {
    std::vector<std::filesystem::path> hits;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".yaml" && entry.path().stem() == stem) {
        hits.push_back(entry.path());
      }
    }
    std::sort(hits.begin(), hits.end());
    if (hits.size() == 1) return hits.front();
    if (hits.size() > 1) throw ConfigError({name_or_path, 0, 0}, "preset name is ambiguous under " + dir.string());
  }
  throw ConfigError({name_or_path, 0, 0}, "no such preset file or name (searched " + dir.string() + ")");
}

ConfigNode load_config_tree(const std::filesystem::path& path) {
  ConfigNode merged;
  merged.kind = ConfigNode::Kind::Map;
  merged.loc = {path.string(), 1, 1};
  std::vector<std::filesystem::path> stack;
  load_into(path, merged, stack);
  merged.loc = {path.string(), 1, 1};
  return merged;
}

Preset preset_from_tree(const ConfigNode& root, const std::string& name) {
  Preset p;
  p.name = name;
  p.scenario = scenario_from(require(root, "env", ""));
  const Scenario& sc = *p.scenario;
  optional(root, "domain_mode", [&](const ConfigNode& v) {
    p.domain_mode = wrap(v.loc, [&] { return parse_domain_mode(v.as_string()); });
  });
  const ConfigNode& method = require(root, "method", "");
  p.method = wrap(method.loc, [&] { return parse_method(method.as_string()); });
  const ConfigNode& backbone = require(root, "backbone", "");
  p.model.backbone = wrap(backbone.loc, [&] { return parse_backbone(backbone.as_string()); });
  optional(root, "domain_aware", [&](const ConfigNode& v) { p.domain_aware = v.as_bool(); });
  optional(root, "n_train", [&](const ConfigNode& n) {
    p.n_train_override = sc.in_domain.upper_bounds();
    for (const auto& [tname, v] : n.entries) {
      const int k = sc.type_index(tname);
      if (k < 0) throw ConfigError(v.loc, "unknown entity type '" + tname + "'");
      p.n_train_override[static_cast<std::size_t>(k)] = static_cast<int>(v.as_int());
    }
  });
  optional(root, "train", [&](const ConfigNode& t) {
    TrainConfig& c = p.train;
    auto i64 = [&](const char* key, std::int64_t& out) { optional(t, key, [&](const ConfigNode& v) { out = v.as_int(); }); };
    auto i32 = [&](const char* key, int& out) {
      optional(t, key, [&](const ConfigNode& v) { out = static_cast<int>(v.as_int()); });
    };
    auto f64 = [&](const char* key, double& out) { optional(t, key, [&](const ConfigNode& v) { out = v.as_number(); }); };
    i64("test_interval", c.test_interval);
    i32("test_episodes", c.test_episodes);
    f64("epsilon_start", c.epsilon_start);
    f64("epsilon_finish", c.epsilon_finish);
    i64("epsilon_anneal_steps", c.epsilon_anneal_steps);
    i32("parallel_envs", c.parallel_envs);
    i32("batch_size", c.batch_size);
    i32("buffer_size", c.buffer_size);
    i64("max_timesteps", c.max_timesteps);
    f64("lr", c.lr);
    f64("gamma", c.gamma);
    i32("target_update_interval", c.target_update_interval);
    i64("learn_every", c.learn_every);
    f64("grad_clip", c.grad_clip);
    optional(t, "double_q", [&](const ConfigNode& v) { c.double_q = v.as_bool(); });
    i64("checkpoint_interval", c.checkpoint_interval);
  });
  optional(root, "model", [&](const ConfigNode& m) {
    ModelConfig& c = p.model;
    auto dim = [&](const char* key, std::size_t& out) {
      optional(m, key, [&](const ConfigNode& v) {
        const long long x = v.as_int();
        if (x < 1) throw ConfigError(v.loc, std::string(key) + " must be positive");
        out = static_cast<std::size_t>(x);
      });
    };
    dim("token_dim", c.token_dim);
    dim("attention_heads", c.attention_heads);
    dim("rnn_input_dim", c.rnn_input_dim);
    dim("rnn_hidden_dim", c.rnn_hidden_dim);
    dim("mixing_embed_dim", c.mixing_embed_dim);
    dim("hypernet_embed_dim", c.hypernet_embed_dim);
    optional(m, "hyper_activation", [&](const ConfigNode& v) {
      c.hyper_activation = wrap(v.loc, [&] { return parse_hyper_activation(v.as_string()); });
    });
  });
  wrap(root.loc, [&] {
    p.validate();
    return 0;
  });
  return p;
}

Preset load_preset(const std::string& name_or_path) {
  const auto path = resolve_preset(name_or_path);
  Preset p = preset_from_tree(load_config_tree(path), path.stem().string());
  p.source = path;
  return p;
}

}  // namespace flicker
