#pragma once

// Experiment configuration as flat dotted keys ("attack.zeta"). Files are
// INI: a [section] header followed by key = value lines. Precedence, lowest
// first: built-in defaults, file, RANKGAUNTLET_SEED, --set overrides.

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rankgauntlet/sim.hpp"

namespace rankgauntlet {

using ConfigMap = std::map<std::string, std::string>;

// Every accepted key with its default value.
ConfigMap default_config();

ConfigMap read_config_file(const std::string& path);
ConfigMap parse_config(std::istream& is);

// "key=value"; the key must be known.
void apply_override(ConfigMap& cfg, const std::string& assignment);

ConfigMap resolve_config(const std::optional<std::string>& path, const std::vector<std::string>& overrides,
                         const char* env_seed);

// Rejects unknown keys and malformed values with kInvalidConfig.
ExperimentConfig to_experiment(const ConfigMap& cfg);

// FNV-1a over the sorted key=value lines, as 16 hex digits.
std::string config_hash(const ConfigMap& cfg);

void write_config(std::ostream& os, const ConfigMap& cfg);

}  // namespace rankgauntlet
