#pragma once

#include <filesystem>
#include <string>

#include "sfp/env.hpp"
#include "sfp/ppo.hpp"

namespace sfp {

// Everything `train` needs besides the instance pools. Loaded from a JSON
// file with three optional sections ("env", "train", "network"); missing keys
// keep their defaults and unknown keys are rejected.
struct RunConfig {
  EnvConfig env;
  TrainConfig train;
};

RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

// Canonical JSON of the fully resolved configuration (sorted keys).
std::string to_json(const RunConfig& config);

// FNV-1a of to_json(config).
std::string config_hash(const RunConfig& config);

}  // namespace sfp
