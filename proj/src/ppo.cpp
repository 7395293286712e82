#include "sfp/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "sfp/errors.hpp"

namespace sfp {

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw DataError("train: gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw DataError("train: gae_lambda must lie in [0, 1]");
  }
  if (!(clip_eps > 0.0)) throw DataError("train: clip_eps must be positive");
  if (epochs_per_update < 1 || minibatch_size < 1 || episodes_per_iteration < 1 ||
      iterations < 1 || workers < 1) {
    throw DataError("train: counts must be at least 1");
  }
  if (eval_episodes < 0) throw DataError("train: eval_episodes must be non-negative");
  if (!(learning_rate > 0.0)) throw DataError("train: learning_rate must be positive");
  if (value_coef < 0.0 || entropy_coef < 0.0 || max_grad_norm < 0.0 || !(reward_scale > 0.0)) {
    throw DataError("train: coefficients must be non-negative and reward_scale positive");
  }
}

void RolloutBuffer::validate(int max_steps) const {
  std::vector<int> seen(episode_lengths.size(), 0);
  int current = -1;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const Transition& t = steps[i];
    if (t.episode < 0 || static_cast<std::size_t>(t.episode) >= episode_lengths.size()) {
      throw DataError("rollout buffer: transition references an unknown episode");
    }
    if (t.episode != current) {
      if (seen[t.episode] != 0) throw DataError("rollout buffer: episodes are not contiguous");
      current = t.episode;
    }
    ++seen[t.episode];
    const bool last = i + 1 == steps.size() || steps[i + 1].episode != t.episode;
    if (last != t.done) throw DataError("rollout buffer: done flag not at episode end");
  }
  for (std::size_t e = 0; e < episode_lengths.size(); ++e) {
    if (episode_lengths[e] < 1 || episode_lengths[e] > max_steps) {
      throw DataError("rollout buffer: episode length out of range");
    }
    if (seen[e] != 0 && seen[e] != episode_lengths[e]) {
      throw DataError("rollout buffer: episode length disagrees with its transitions");
    }
  }
}

namespace {

struct EpisodeData {
  std::vector<Transition> steps;
  int length = 0;
  double ret = 0.0;
  int instance = 0;
  long lp_solves = 0;
};

EpisodeData run_training_episode(GaussianPolicy& policy, Critic& critic,
                                 const InstancePool& pool, const EnvConfig& env_config,
                                 std::uint64_t seed, int episode) {
  Rng rng(seed);
  EpisodeData data;
  data.instance = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1));
  FeasibilityEnv env(pool[static_cast<std::size_t>(data.instance)], env_config);
  Observation obs = env.reset();
  while (!env.state().done) {
    ActionSample sample = sample_action(policy, obs, rng);
    const double value = critic.forward(obs);
    StepOutcome out = env.step(sample.action);
    data.ret += out.reward;
    data.steps.push_back(Transition{std::move(obs), std::move(sample.action), sample.log_prob,
                                    out.reward, value, out.done, episode});
    obs = std::move(out.obs);
  }
  data.length = env.episode_length();
  data.lp_solves = env.lp_solves();
  return data;
}

}  // namespace

RolloutBuffer collect_rollouts(const GaussianPolicy& policy, const Critic& critic,
                               const InstancePool& pool, const EnvConfig& env_config, int count,
                               std::uint64_t seed, int workers) {
  if (pool.empty()) throw DataError("collect_rollouts: empty instance pool");
  for (const auto& inst : pool) {
    if (inst->n != policy.binding().n || inst->m != policy.binding().m) {
      throw DataError("collect_rollouts: instance size does not match the policy binding");
    }
  }
  std::vector<EpisodeData> episodes(static_cast<std::size_t>(count));
  auto work = [&](int worker, int stride) {
    GaussianPolicy local_policy = policy;
    Critic local_critic = critic;
    for (int e = worker; e < count; e += stride) {
      episodes[static_cast<std::size_t>(e)] = run_training_episode(
          local_policy, local_critic, pool, env_config, derive_seed(seed, static_cast<std::uint64_t>(e)), e);
    }
  };
  const int threads = std::clamp(workers, 1, std::max(1, count));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool_threads;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) {
      pool_threads.emplace_back([&, w] {
        try {
          work(w, threads);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool_threads) t.join();
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }

  RolloutBuffer buffer;
  for (auto& ep : episodes) {
    buffer.episode_lengths.push_back(ep.length);
    buffer.episode_returns.push_back(ep.ret);
    buffer.episode_instances.push_back(ep.instance);
    buffer.lp_solves += ep.lp_solves;
    std::move(ep.steps.begin(), ep.steps.end(), std::back_inserter(buffer.steps));
  }
  return buffer;
}

Advantages compute_gae(const RolloutBuffer& buffer, double gamma, double lambda,
                       double reward_scale) {
  const std::size_t n = buffer.steps.size();
  Advantages out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  double next_value = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const Transition& t = buffer.steps[k];
    const double live = t.done ? 0.0 : 1.0;
    const double delta = reward_scale * t.reward + gamma * next_value * live - t.value_old;
    const double adv = delta + gamma * lambda * live * next_adv;
    out.advantages[k] = adv;
    out.returns[k] = adv + t.value_old;
    next_adv = adv;
    next_value = t.value_old;
  }
  return out;
}

void normalize_in_place(std::vector<double>& values) {
  if (values.empty()) return;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  const double std = std::sqrt(sq / values.size());
  for (double& v : values) v = (v - mean) / (std + 1e-8);
}

double clipped_surrogate(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

Adam::Adam(std::vector<nn::Param*> params, double learning_rate) : lr_(learning_rate) {
  rebind(std::move(params));
}

void Adam::rebind(std::vector<nn::Param*> params) {
  params_ = std::move(params);
  m_.clear();
  v_.clear();
  for (const nn::Param* p : params_) {
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
  t_ = 0;
}

double Adam::step(double max_norm) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  double sq = 0.0;
  for (const nn::Param* p : params_) {
    for (double g : p->grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  const double scale = max_norm > 0.0 && norm > max_norm ? max_norm / norm : 1.0;
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    nn::Param& p = *params_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i] * scale;
      m_[k][i] = kBeta1 * m_[k][i] + (1.0 - kBeta1) * g;
      v_[k][i] = kBeta2 * v_[k][i] + (1.0 - kBeta2) * g * g;
      p.value.data[i] -= lr_ * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + kEps);
    }
  }
  return norm;
}

UpdateStats ppo_update(GaussianPolicy& policy, Critic& critic, Adam& policy_opt,
                       Adam& critic_opt, const RolloutBuffer& buffer,
                       const Advantages& advantages, const TrainConfig& config, Rng& rng) {
  const std::size_t n = buffer.steps.size();
  if (n == 0) throw DataError("ppo_update: empty rollout buffer");
  if (advantages.advantages.size() != n || advantages.returns.size() != n) {
    throw ShapeMismatch("ppo_update: advantages do not match the buffer");
  }
  std::vector<double> adv = advantages.advantages;
  if (config.normalize_advantages) normalize_in_place(adv);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.minibatch_size);

  UpdateStats stats;
  double total_surrogate = 0.0, total_value = 0.0, total_entropy = 0.0, total_kl = 0.0;
  long clipped_count = 0, sample_count = 0;

  for (int epoch = 0; epoch < config.epochs_per_update; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      policy.zero_grad();
      critic.zero_grad();

      MinibatchRecord record;
      double mb_surrogate = 0.0, mb_value = 0.0, mb_entropy = 0.0;
      int mb_clipped = 0;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        const Transition& t = buffer.steps[idx];
        const PolicyOutput out = policy.forward(t.obs);
        const double log_prob = gaussian_log_prob(out.mean, out.log_std, t.action);
        const double ratio = std::exp(log_prob - t.log_prob_old);
        const double a = adv[idx];
        const double surrogate = clipped_surrogate(ratio, a, config.clip_eps);
        const bool unclipped_active = ratio * a <= surrogate;
        const double dloss_dlogp = unclipped_active ? -ratio * a * inv_b : 0.0;

        const std::size_t dims = out.mean.size();
        std::vector<double> grad_mean(dims), grad_log_std(dims);
        for (std::size_t d = 0; d < dims; ++d) {
          const double sigma = std::exp(out.log_std[d]);
          const double z = (t.action[d] - out.mean[d]) / sigma;
          grad_mean[d] = dloss_dlogp * z / sigma;
          grad_log_std[d] = dloss_dlogp * (z * z - 1.0) - config.entropy_coef * inv_b;
        }
        policy.backward(grad_mean, grad_log_std);

        const double value = critic.forward(t.obs);
        const double err = value - advantages.returns[idx];
        critic.backward(config.value_coef * 2.0 * err * inv_b);

        record.ratios.push_back(ratio);
        mb_clipped += std::abs(ratio - 1.0) > config.clip_eps ? 1 : 0;
        mb_surrogate += surrogate;
        mb_value += err * err;
        mb_entropy += gaussian_entropy(out.log_std);
        total_kl += t.log_prob_old - log_prob;
      }
      const double count = static_cast<double>(end - start);
      record.clip_fraction = mb_clipped / count;
      if (!std::isfinite(mb_surrogate) || !std::isfinite(mb_value) || !std::isfinite(mb_entropy)) {
        std::ostringstream msg;
        msg << "ppo_update: non-finite loss at epoch " << epoch << ", minibatch starting at "
            << start << " (surrogate=" << mb_surrogate << ", value=" << mb_value
            << ", entropy=" << mb_entropy << ")";
        throw NonFiniteValue(msg.str());
      }
      if (epoch == 0 && start == 0) {
        for (double r : record.ratios) {
          stats.initial_ratio_deviation = std::max(stats.initial_ratio_deviation, std::abs(r - 1.0));
        }
        stats.first_surrogate = mb_surrogate / count;
      }
      total_surrogate += mb_surrogate;
      total_value += mb_value;
      total_entropy += mb_entropy;
      clipped_count += mb_clipped;
      sample_count += static_cast<long>(end - start);
      stats.minibatches.push_back(std::move(record));

      policy_opt.step(config.max_grad_norm);
      critic_opt.step(config.max_grad_norm);
      policy.clamp_log_std();
    }
  }
  const double samples = static_cast<double>(sample_count);
  stats.surrogate = total_surrogate / samples;
  stats.value_loss = total_value / samples;
  stats.entropy = total_entropy / samples;
  stats.clip_fraction = clipped_count / samples;
  stats.approx_kl = total_kl / samples;
  return stats;
}

EpisodeResult run_policy_episode(GaussianPolicy& policy,
                                 std::shared_ptr<const MipInstance> instance,
                                 const EnvConfig& env_config, std::uint64_t seed,
                                 bool deterministic) {
  Rng rng(seed);
  FeasibilityEnv env(std::move(instance), env_config);
  Observation obs = env.reset();
  while (!env.state().done) {
    std::vector<double> action = deterministic ? policy.forward(obs).mean
                                               : sample_action(policy, obs, rng).action;
    obs = env.step(action).obs;
  }
  return {env.episode_length(), env.state().feasible, env.lp_solves(), env.projection_count()};
}

namespace {

PolicyBinding binding_for(const InstancePool& pool, ObsVariant variant, const NetworkShape& shape) {
  PolicyBinding binding;
  binding.n = pool.front()->n;
  binding.m = pool.front()->m;
  binding.variant = variant;
  binding.shape = shape;
  return binding;
}

constexpr std::uint64_t kEvalStream = 0x5eed'e7a1ULL;

}  // namespace

TrainResult train(const InstancePool& train_pool, const InstancePool& eval_pool,
                  ObsVariant variant, const EnvConfig& env_config,
                  const TrainConfig& train_config, const IterationCallback& on_iteration) {
  train_config.validate();
  EnvConfig env = env_config;
  env.variant = variant;
  env.validate();
  if (train_pool.empty() || eval_pool.empty()) throw DataError("train: instance pools must be nonempty");
  const PolicyBinding binding = binding_for(train_pool, variant, train_config.network);
  for (const InstancePool* pool : {&train_pool, &eval_pool}) {
    for (const auto& inst : *pool) {
      if (inst->n != binding.n || inst->m != binding.m) {
        throw DataError("train: all instances must share one (n, m)");
      }
    }
  }

  const std::uint64_t seed = train_config.seed;
  GaussianPolicy policy(binding, derive_seed(seed, 1));
  policy.fill_log_std(train_config.initial_log_std);
  Critic critic(binding, derive_seed(seed, 2));
  Adam policy_opt(policy.params(), train_config.learning_rate);
  Adam critic_opt(critic.params(), train_config.learning_rate);
  Rng update_rng(derive_seed(seed, 3));

  const int eval_episodes = train_config.eval_episodes > 0
                                ? train_config.eval_episodes
                                : static_cast<int>(eval_pool.size());

  TrainResult result;
  double best_mean = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= train_config.iterations; ++it) {
    const RolloutBuffer buffer =
        collect_rollouts(policy, critic, train_pool, env, train_config.episodes_per_iteration,
                         derive_seed(seed, 1000 + static_cast<std::uint64_t>(it)),
                         train_config.workers);
    IterationRecord record;
    record.iteration = it;
    const EpisodeStats train_stats = summarize_lengths(buffer.episode_lengths, env.max_steps);
    record.train_ep_len_mean = train_stats.ep_len_mean;
    record.train_ep_len_std = train_stats.ep_len_std;
    record.mean_return = std::accumulate(buffer.episode_returns.begin(),
                                         buffer.episode_returns.end(), 0.0) /
                         static_cast<double>(buffer.episode_returns.size());
    record.lp_solves = buffer.lp_solves;

    if (!buffer.steps.empty()) {
      const Advantages adv = compute_gae(buffer, train_config.gamma, train_config.gae_lambda,
                                         train_config.reward_scale);
      const UpdateStats stats =
          ppo_update(policy, critic, policy_opt, critic_opt, buffer, adv, train_config, update_rng);
      record.surrogate = stats.surrogate;
      record.value_loss = stats.value_loss;
      record.entropy = stats.entropy;
      record.clip_fraction = stats.clip_fraction;
      record.approx_kl = stats.approx_kl;
    }

    std::vector<int> lengths;
    lengths.reserve(static_cast<std::size_t>(eval_episodes));
    for (int e = 0; e < eval_episodes; ++e) {
      const auto& inst = eval_pool[static_cast<std::size_t>(e) % eval_pool.size()];
      lengths.push_back(run_policy_episode(policy, inst, env,
                                           derive_seed(seed ^ kEvalStream, static_cast<std::uint64_t>(e)),
                                           /*deterministic=*/false)
                            .length);
    }
    const EpisodeStats eval_stats = summarize_lengths(lengths, env.max_steps);
    record.eval_ep_len_mean = eval_stats.ep_len_mean;
    record.eval_ep_len_std = eval_stats.ep_len_std;
    record.eval_success_rate = eval_stats.success_rate;

    result.log.records.push_back(record);
    if (on_iteration) on_iteration(record);
    if (record.eval_ep_len_mean < best_mean) {
      best_mean = record.eval_ep_len_mean;
      result.best = Checkpoint{policy, critic};
      result.best_iteration = it;
    }
  }
  result.final_state = Checkpoint{policy, critic};
  return result;
}

}  // namespace sfp
