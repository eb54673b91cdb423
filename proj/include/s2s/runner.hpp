#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "s2s/types.hpp"

namespace s2s {

using Json = nlohmann::ordered_json;

/// A config problem tied to one dotted key ("model.activation").
class ConfigError : public InvalidInput {
 public:
  ConfigError(std::string key, const std::string& what)
      : InvalidInput(key + ": " + what), key(std::move(key)) {}
  std::string key;
};

/// The full default tree. Every key a config may set appears here; anything
/// else is rejected.
Json default_config();

/// Merges `user` over the defaults, rejecting unknown keys and type
/// mismatches, then checks every referenced kind and mode.
Json normalize_config(const Json& user);

/// "a.b.c=value"; the value is parsed as JSON when possible, else taken as a
/// string.
void apply_override(Json& config, const std::string& assignment);

std::vector<std::string> preset_names();
/// Normalized preset config. Throws ConfigError for unknown names.
Json preset(const std::string& name);

struct RunOutcome {
  Json summary;
  std::string output_dir;
};

/// Runs a normalized config (single point or sweep) and writes the artifact
/// bundle under config["output_dir"].
RunOutcome run_experiment(const Json& config);

/// Single point without touching the filesystem when `output_dir` is empty.
Json run_point(const Json& config, const std::string& output_dir);

}  // namespace s2s
