#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "sfp/env.hpp"
#include "sfp/metrics.hpp"
#include "sfp/policy.hpp"

namespace sfp {

using InstancePool = std::vector<std::shared_ptr<const MipInstance>>;

struct Transition {
  Observation obs;
  std::vector<double> action;
  double log_prob_old = 0.0;
  double reward = 0.0;
  double value_old = 0.0;
  bool done = false;
  int episode = 0;
};

// Episodes are stored contiguously in collection order. An episode that is
// feasible at reset contributes no transitions but still has length 1.
struct RolloutBuffer {
  std::vector<Transition> steps;
  std::vector<int> episode_lengths;
  std::vector<double> episode_returns;
  std::vector<int> episode_instances;  // index into the pool
  long lp_solves = 0;

  // Throws DataError when episodes are interleaved, an episode does not end
  // with done, or a length exceeds max_steps.
  void validate(int max_steps) const;
};

struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  int epochs_per_update = 4;
  int minibatch_size = 64;
  int episodes_per_iteration = 32;
  int iterations = 50;
  double learning_rate = 3e-4;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double max_grad_norm = 0.5;
  // Rewards are multiplied by this before advantage estimation.
  double reward_scale = 0.01;
  bool normalize_advantages = true;
  double initial_log_std = 0.0;
  std::uint64_t seed = 0;
  int workers = 1;
  // Validation episodes per iteration; 0 runs one episode per instance.
  int eval_episodes = 0;
  NetworkShape network;

  void validate() const;
};

// Runs `count` episodes with instances drawn uniformly from `pool`. Episode e
// uses the seed derive_seed(seed, e) for both its instance draw and its action
// noise, so the result is independent of `workers`.
RolloutBuffer collect_rollouts(const GaussianPolicy& policy, const Critic& critic,
                               const InstancePool& pool, const EnvConfig& env_config, int count,
                               std::uint64_t seed, int workers = 1);

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// GAE per episode: delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t,
// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}; returns = A + V_old.
// Unnormalized.
Advantages compute_gae(const RolloutBuffer& buffer, double gamma, double lambda,
                       double reward_scale = 1.0);

void normalize_in_place(std::vector<double>& values);

// min(r A, clip(r, 1 - eps, 1 + eps) A)
double clipped_surrogate(double ratio, double advantage, double eps);

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<nn::Param*> params, double learning_rate);

  // Clips the global gradient norm to max_norm (if positive), then descends.
  // Returns the pre-clip norm.
  double step(double max_norm);
  void rebind(std::vector<nn::Param*> params);

 private:
  std::vector<nn::Param*> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_ = 0.0;
  long t_ = 0;
};

struct MinibatchRecord {
  std::vector<double> ratios;
  double clip_fraction = 0.0;
};

struct UpdateStats {
  double surrogate = 0.0;  // mean over all minibatches of the batch mean
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  // max |r - 1| over the first minibatch of the first epoch, before any
  // parameter moves.
  double initial_ratio_deviation = 0.0;
  double first_surrogate = 0.0;  // batch mean surrogate of that minibatch
  std::vector<MinibatchRecord> minibatches;
};

// Clipped-surrogate update with value and entropy terms; throws
// NonFiniteValue (with a diagnostic) if a loss becomes non-finite.
UpdateStats ppo_update(GaussianPolicy& policy, Critic& critic, Adam& policy_opt,
                       Adam& critic_opt, const RolloutBuffer& buffer,
                       const Advantages& advantages, const TrainConfig& config, Rng& rng);

struct IterationRecord {
  int iteration = 0;
  double train_ep_len_mean = 0.0;
  double train_ep_len_std = 0.0;
  double eval_ep_len_mean = 0.0;
  double eval_ep_len_std = 0.0;
  double eval_success_rate = 0.0;
  double mean_return = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  long lp_solves = 0;
};

struct TrainLog {
  std::vector<IterationRecord> records;
};

struct TrainResult {
  Checkpoint best;
  Checkpoint final_state;
  int best_iteration = 0;
  TrainLog log;
};

// Episode runner shared by validation and evaluation.
struct EpisodeResult {
  int length = 0;
  bool feasible = false;
  int lp_solves = 0;
  int projections = 0;
};

EpisodeResult run_policy_episode(GaussianPolicy& policy,
                                 std::shared_ptr<const MipInstance> instance,
                                 const EnvConfig& env_config, std::uint64_t seed,
                                 bool deterministic);

using IterationCallback = std::function<void(const IterationRecord&)>;

// iterations x (collect -> GAE -> update -> validate); keeps the checkpoint
// with the lowest validation EpLenMean as `best`.
TrainResult train(const InstancePool& train_pool, const InstancePool& eval_pool,
                  ObsVariant variant, const EnvConfig& env_config,
                  const TrainConfig& train_config, const IterationCallback& on_iteration = {});

}  // namespace sfp
