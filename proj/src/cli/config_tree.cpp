#include "flicker/cli/config_tree.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace flicker {

std::string SourceLoc::str() const {
  std::string out = file.empty() ? "<config>" : file;
  if (line > 0) out += ":" + std::to_string(line) + ":" + std::to_string(column);
  return out;
}

ConfigError::ConfigError(const SourceLoc& loc, const std::string& message)
    : std::runtime_error(loc.str() + ": " + message), loc_(loc) {}

const ConfigNode* ConfigNode::find(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return &v;
  }
  return nullptr;
}

ConfigNode* ConfigNode::find(const std::string& key) {
  for (auto& [k, v] : entries) {
    if (k == key) return &v;
  }
  return nullptr;
}

namespace {

bool parse_int(const std::string& s, long long& out) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end && !s.empty();
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::istringstream in(s);
  in.imbue(std::locale::classic());
  in >> out;
  return in && in.peek() == std::char_traits<char>::eof() && std::isfinite(out);
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "True" || s == "yes" || s == "on") return out = true, true;
  if (s == "false" || s == "False" || s == "no" || s == "off") return out = false, true;
  return false;
}

const char* kind_name(ConfigNode::Kind k) {
  switch (k) {
    case ConfigNode::Kind::Null: return "null";
    case ConfigNode::Kind::Scalar: return "scalar";
    case ConfigNode::Kind::Sequence: return "sequence";
    case ConfigNode::Kind::Map: return "map";
  }
  return "?";
}

ConfigNode convert(const YAML::Node& y, const std::string& file) {
  ConfigNode n;
  n.loc = {file, y.Mark().line + 1, y.Mark().column + 1};
  switch (y.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      n.kind = ConfigNode::Kind::Null;
      break;
    case YAML::NodeType::Scalar:
      n.kind = ConfigNode::Kind::Scalar;
      n.scalar = y.Scalar();
      break;
    case YAML::NodeType::Sequence:
      n.kind = ConfigNode::Kind::Sequence;
      for (const auto& item : y) n.items.push_back(convert(item, file));
      break;
    case YAML::NodeType::Map:
      n.kind = ConfigNode::Kind::Map;
      for (const auto& kv : y) {
        const std::string key = kv.first.Scalar();
        if (n.find(key)) {
          throw ConfigError({file, kv.first.Mark().line + 1, kv.first.Mark().column + 1}, "duplicate key '" + key + "'");
        }
        n.entries.emplace_back(key, convert(kv.second, file));
      }
      break;
  }
  return n;
}

}  // namespace

double ConfigNode::as_number() const {
  double v = 0.0;
  if (!is_scalar() || !parse_number(scalar, v)) throw ConfigError(loc, "expected a number");
  return v;
}

long long ConfigNode::as_int() const {
  long long v = 0;
  if (!is_scalar() || !parse_int(scalar, v)) throw ConfigError(loc, "expected an integer");
  return v;
}

bool ConfigNode::as_bool() const {
  bool v = false;
  if (!is_scalar() || !parse_bool(scalar, v)) throw ConfigError(loc, "expected true or false");
  return v;
}

const std::string& ConfigNode::as_string() const {
  if (!is_scalar()) throw ConfigError(loc, "expected a string");
  return scalar;
}

ConfigNode parse_config_string(const std::string& text, const std::string& name) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError({name, e.mark.line + 1, e.mark.column + 1}, e.msg);
  }
  ConfigNode n = convert(root, name);
  if (n.kind == ConfigNode::Kind::Null) {
    n.kind = ConfigNode::Kind::Map;
    n.loc = {name, 1, 1};
  }
  return n;
}

ConfigNode parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({path.string(), 0, 0}, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_string(buf.str(), path.string());
}

void merge_config(ConfigNode& base, const ConfigNode& over) {
  if (!base.is_map() || !over.is_map()) {
    base = over;
    return;
  }
  for (const auto& [key, value] : over.entries) {
    if (ConfigNode* existing = base.find(key)) {
      merge_config(*existing, value);
    } else {
      base.entries.emplace_back(key, value);
    }
  }
}

std::shared_ptr<const Schema> Schema::of(Type t) {
  auto s = std::make_shared<Schema>();
  s->type = t;
  return s;
}

std::shared_ptr<const Schema> Schema::map(std::map<std::string, std::shared_ptr<const Schema>> fields) {
  auto s = std::make_shared<Schema>();
  s->type = Type::Map;
  s->fields = std::move(fields);
  return s;
}

std::shared_ptr<const Schema> Schema::dict(std::shared_ptr<const Schema> element) {
  auto s = std::make_shared<Schema>();
  s->type = Type::Dict;
  s->element = std::move(element);
  return s;
}

std::shared_ptr<const Schema> Schema::seq(std::shared_ptr<const Schema> element) {
  auto s = std::make_shared<Schema>();
  s->type = Type::Seq;
  s->element = std::move(element);
  return s;
}

namespace {

bool is_int(const ConfigNode& n) {
  long long v;
  return n.is_scalar() && parse_int(n.scalar, v);
}

bool is_number(const ConfigNode& n) {
  double v;
  return n.is_scalar() && parse_number(n.scalar, v);
}

bool is_interval(const ConfigNode& n) {
  return n.is_seq() && n.items.size() == 2 && is_number(n.items[0]) && is_number(n.items[1]);
}

void check(const ConfigNode& node, const Schema& schema, const std::string& path, std::vector<ConfigError>& out) {
  const std::string where = path.empty() ? "document" : "'" + path + "'";
  auto fail = [&](const std::string& expected) {
    out.emplace_back(node.loc, where + ": expected " + expected + ", found " +
                                   (node.is_scalar() ? "'" + node.scalar + "'" : std::string(kind_name(node.kind))));
  };
  using T = Schema::Type;
  switch (schema.type) {
    case T::Any: return;
    case T::Int:
      if (!is_int(node)) fail("an integer");
      return;
    case T::Number:
      if (!is_number(node)) fail("a number");
      return;
    case T::Bool: {
      bool b;
      if (!node.is_scalar() || !parse_bool(node.scalar, b)) fail("true or false");
      return;
    }
    case T::String:
      if (!node.is_scalar()) fail("a string");
      return;
    case T::Count:
      if (!(is_int(node) || (node.is_seq() && node.items.size() == 2 && is_int(node.items[0]) && is_int(node.items[1])))) {
        fail("a count (integer or [lo, hi])");
      }
      return;
    case T::Interval:
      if (!is_interval(node)) fail("an interval [lo, hi]");
      return;
    case T::Intervals: {
      bool ok = is_interval(node);
      if (!ok && node.is_seq() && !node.items.empty()) {
        ok = true;
        for (const auto& item : node.items) ok = ok && is_interval(item);
      }
      if (!ok) fail("an interval [lo, hi] or a list of intervals");
      return;
    }
    case T::Seq:
      if (!node.is_seq()) return fail("a sequence");
      for (std::size_t i = 0; i < node.items.size(); ++i) {
        check(node.items[i], *schema.element, path + "[" + std::to_string(i) + "]", out);
      }
      return;
    case T::Map:
    case T::Dict:
      if (!node.is_map()) return fail("a map");
      for (const auto& [key, value] : node.entries) {
        const std::string sub = path.empty() ? key : path + "." + key;
        if (schema.type == T::Dict) {
          check(value, *schema.element, sub, out);
          continue;
        }
        auto it = schema.fields.find(key);
        if (it == schema.fields.end()) {
          SourceLoc loc = value.loc;
          out.emplace_back(loc, "unknown key '" + sub + "'");
          continue;
        }
        check(value, *it->second, sub, out);
      }
      return;
  }
}

}  // namespace

std::vector<ConfigError> check_schema(const ConfigNode& node, const Schema& schema, const std::string& path) {
  std::vector<ConfigError> out;
  check(node, schema, path, out);
  return out;
}

}  // namespace flicker
