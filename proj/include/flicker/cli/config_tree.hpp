#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace flicker {

struct SourceLoc {
  std::string file;
  int line = 0;  // 1-based; 0 when unknown
  int column = 0;

  std::string str() const;
};

// Configuration problem with the location it was found at. Usage errors map to
// exit code 2.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const SourceLoc& loc, const std::string& message);
  const SourceLoc& where() const { return loc_; }

 private:
  SourceLoc loc_;
};

// Parsed YAML document that remembers where every value came from, so errors
// found after merging included files still point at the right line.
struct ConfigNode {
  enum class Kind { Null, Scalar, Sequence, Map };

  Kind kind = Kind::Null;
  std::string scalar;
  std::vector<ConfigNode> items;
  std::vector<std::pair<std::string, ConfigNode>> entries;  // document order
  SourceLoc loc;

  bool is_map() const { return kind == Kind::Map; }
  bool is_seq() const { return kind == Kind::Sequence; }
  bool is_scalar() const { return kind == Kind::Scalar; }

  const ConfigNode* find(const std::string& key) const;
  ConfigNode* find(const std::string& key);

  double as_number() const;
  long long as_int() const;
  bool as_bool() const;
  const std::string& as_string() const;
};

ConfigNode parse_config_file(const std::filesystem::path& path);
ConfigNode parse_config_string(const std::string& text, const std::string& name);

// Maps merge key by key (recursively); anything else in `over` replaces `base`.
void merge_config(ConfigNode& base, const ConfigNode& over);

// Declarative shape check: rejects unknown keys and wrong value types.
struct Schema {
  enum class Type { Any, Int, Number, Bool, String, Map, Dict, Seq, Count, Interval, Intervals };

  Type type = Type::Any;
  std::map<std::string, std::shared_ptr<const Schema>> fields;  // Map
  std::shared_ptr<const Schema> element;                        // Dict values, Seq items

  static std::shared_ptr<const Schema> of(Type t);
  static std::shared_ptr<const Schema> map(std::map<std::string, std::shared_ptr<const Schema>> fields);
  static std::shared_ptr<const Schema> dict(std::shared_ptr<const Schema> element);
  static std::shared_ptr<const Schema> seq(std::shared_ptr<const Schema> element);
};

// Every problem found, in document order; empty when the node conforms.
std::vector<ConfigError> check_schema(const ConfigNode& node, const Schema& schema, const std::string& path = "");

}  // namespace flicker
