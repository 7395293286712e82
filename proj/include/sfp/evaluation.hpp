#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "sfp/env.hpp"
#include "sfp/metrics.hpp"
#include "sfp/policy.hpp"
#include "sfp/ppo.hpp"

namespace sfp {

inline constexpr const char* kInstanceExtension = ".inst";

struct InstanceEntry {
  std::string name;  // file name without directory
  std::string hash;
  std::shared_ptr<const MipInstance> instance;
};

// A single instance file, or every *.inst file of a directory in name order.
std::vector<InstanceEntry> load_instances(const std::filesystem::path& path);
InstancePool to_pool(const std::vector<InstanceEntry>& entries);

// FNV-1a over the ordered instance hashes.
std::string instance_set_hash(const std::vector<InstanceEntry>& entries);

struct EpisodeRecord {
  std::string instance;
  std::string hash;
  int steps = 0;
  bool success = false;
  int lp_solves = 0;
};

struct EvalOptions {
  int cap = 100;
  std::uint64_t seed = 0;
  bool deterministic = false;  // SFP only: act with the mean
  int workers = 1;
};

struct EvalResult {
  std::string solver;  // "FP", "SFP-MLP" or "SFP-CNN"
  EpisodeStats stats;
  double lp_solves_per_episode = 0.0;
  double wall_seconds = 0.0;
  std::vector<EpisodeRecord> episodes;
};

std::string solver_label(ObsVariant variant);

// Episode i uses derive_seed(options.seed, i); results do not depend on
// options.workers.
EvalResult evaluate_fp(const std::vector<InstanceEntry>& instances, const EvalOptions& options);
EvalResult evaluate_policy(const GaussianPolicy& policy, const std::vector<InstanceEntry>& instances,
                           const EnvConfig& env_config, const EvalOptions& options);

}  // namespace sfp
