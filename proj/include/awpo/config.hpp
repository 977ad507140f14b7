#pragma once

#include <string>
#include <vector>

#include "awpo/sim.hpp"
#include "awpo/theory.hpp"

namespace awpo {

// The single configuration document driving every CLI command. Parsing is
// strict: unknown keys, wrong types and out-of-range values all raise
// ConfigError naming the offending dotted key.
struct RunConfig {
  TrainerConfig trainer;
  TheoryConfig theory;
  std::string out_dir = "runs/default";

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // Reads the file, applies dotted-path overrides ("a.b.c=value", value parsed
  // as JSON when possible, as a string otherwise), then parses and validates.
  static RunConfig load(const std::string& path,
                        const std::vector<std::string>& overrides = {});

  void validate() const;
};

// Applies one "dotted.path=value" assignment to a JSON document.
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace awpo
