#include "sfp/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <thread>

#include "sfp/errors.hpp"
#include "sfp/feasibility_pump.hpp"

namespace sfp {

namespace fs = std::filesystem;

std::vector<InstanceEntry> load_instances(const fs::path& path) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == kInstanceExtension) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(path)) {
    files.push_back(path);
  } else {
    throw DataError("no such instance file or directory: " + path.string());
  }
  if (files.empty()) throw DataError("no " + std::string(kInstanceExtension) + " files in " + path.string());
  std::vector<InstanceEntry> out;
  for (const auto& file : files) {
    auto inst = std::make_shared<const MipInstance>(load_instance(file));
    out.push_back({file.filename().string(), instance_hash(*inst), std::move(inst)});
  }
  return out;
}

InstancePool to_pool(const std::vector<InstanceEntry>& entries) {
  InstancePool pool;
  for (const auto& e : entries) pool.push_back(e.instance);
  return pool;
}

std::string instance_set_hash(const std::vector<InstanceEntry>& entries) {
  std::string joined;
  for (const auto& e : entries) joined += e.hash + "\n";
  return fnv1a_hex(joined);
}

std::string solver_label(ObsVariant variant) {
  return variant == ObsVariant::kMlp ? "SFP-MLP" : "SFP-CNN";
}

namespace {

// Runs body(i) for every i, striding across workers, and rethrows the first
// worker exception.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t, int)>& body) {
  const int threads = std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(count, 1)));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i, 0);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = static_cast<std::size_t>(w); i < count; i += static_cast<std::size_t>(threads)) {
          body(i, w);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void finish(EvalResult& result, int cap, std::chrono::steady_clock::time_point start) {
  std::vector<int> lengths;
  double lp = 0.0;
  for (const auto& e : result.episodes) {
    lengths.push_back(e.steps);
    lp += e.lp_solves;
  }
  result.stats = summarize_lengths(lengths, cap);
  result.lp_solves_per_episode = lp / static_cast<double>(result.episodes.size());
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

EvalResult evaluate_fp(const std::vector<InstanceEntry>& instances, const EvalOptions& options) {
  if (instances.empty()) throw DataError("evaluate: empty instance set");
  const auto start = std::chrono::steady_clock::now();
  EvalResult result;
  result.solver = "FP";
  result.episodes.resize(instances.size());
  parallel_for(instances.size(), options.workers, [&](std::size_t i, int) {
    FpOptions fp;
    fp.max_steps = options.cap;
    fp.seed = derive_seed(options.seed, i);
    const FpResult r = run_fp(*instances[i].instance, fp);
    result.episodes[i] = {instances[i].name, instances[i].hash, r.steps_taken,
                          r.terminated_by == FpTermination::kFoundFeasible, r.lp_solves};
  });
  finish(result, options.cap, start);
  return result;
}

EvalResult evaluate_policy(const GaussianPolicy& policy, const std::vector<InstanceEntry>& instances,
                           const EnvConfig& env_config, const EvalOptions& options) {
  if (instances.empty()) throw DataError("evaluate: empty instance set");
  const PolicyBinding& b = policy.binding();
  for (const auto& e : instances) {
    if (e.instance->n != b.n || e.instance->m != b.m) {
      throw DataError("evaluate: instance " + e.name + " has size " + std::to_string(e.instance->n) +
                      "x" + std::to_string(e.instance->m) + " but the checkpoint expects " +
                      std::to_string(b.n) + "x" + std::to_string(b.m));
    }
  }
  EnvConfig env = env_config;
  env.variant = b.variant;
  env.max_steps = options.cap;
  env.validate();
  const auto start = std::chrono::steady_clock::now();
  EvalResult result;
  result.solver = solver_label(b.variant);
  result.episodes.resize(instances.size());
  const int threads = std::max(1, options.workers);
  std::vector<GaussianPolicy> copies(static_cast<std::size_t>(threads), policy);
  parallel_for(instances.size(), threads, [&](std::size_t i, int w) {
    const EpisodeResult r = run_policy_episode(copies[static_cast<std::size_t>(w)], instances[i].instance, env,
                                               derive_seed(options.seed, i), options.deterministic);
    result.episodes[i] = {instances[i].name, instances[i].hash, r.length, r.feasible, r.lp_solves};
  });
  finish(result, options.cap, start);
  return result;
}

}  // namespace sfp
