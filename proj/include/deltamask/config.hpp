#pragma once

#include <string>

#include "deltamask/simulator.hpp"

namespace deltamask {

/// Strict INI-style schema, flat sections. Unknown sections, unknown keys
/// and malformed values all raise ConfigError naming the offending key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

/// Apply one "section.key=value" override.
void apply_override(ExperimentConfig& config, const std::string& assignment);

/// Resolved configuration echo, parseable by parse_config again.
std::string dump_config(const ExperimentConfig& config);

}  // namespace deltamask
