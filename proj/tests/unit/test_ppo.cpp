#include <doctest.h>

#include <cmath>

#include "sfp/errors.hpp"
#include "sfp/ppo.hpp"
#include "sfp_oracles/oracles.hpp"

using namespace sfp;

namespace {

InstancePool pool(std::uint64_t base, int count, int n = 5, int m = 6) {
  InstancePool out;
  for (int i = 0; i < count; ++i) {
    out.push_back(std::make_shared<const MipInstance>(
        generate(derive_seed(base, static_cast<std::uint64_t>(i)), n, m, ProblemKind::kIP)));
  }
  return out;
}

PolicyBinding binding(ObsVariant variant = ObsVariant::kMlp) {
  PolicyBinding b;
  b.n = 5;
  b.m = 6;
  b.variant = variant;
  return b;
}

RolloutBuffer random_buffer(Rng& rng, int episodes) {
  RolloutBuffer buf;
  for (int e = 0; e < episodes; ++e) {
    const int len = static_cast<int>(rng.uniform_int(1, 12));
    for (int t = 0; t < len; ++t) {
      Transition tr;
      tr.reward = -10.0 * rng.uniform();
      tr.value_old = rng.normal();
      tr.done = t + 1 == len;
      tr.episode = e;
      buf.steps.push_back(tr);
    }
    buf.episode_lengths.push_back(len);
    buf.episode_returns.push_back(0.0);
    buf.episode_instances.push_back(0);
  }
  return buf;
}

}  // namespace

TEST_CASE("GAE matches naive summation") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const RolloutBuffer buf = random_buffer(rng, 6);
    const double gamma = 0.5 + 0.5 * rng.uniform();
    const double lambda = rng.uniform();
    const double scale = trial % 2 ? 1.0 : 0.01;
    const Advantages adv = compute_gae(buf, gamma, lambda, scale);
    const auto ref = oracle::naive_gae(buf, gamma, lambda, scale);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      CHECK(std::abs(adv.advantages[k] - ref[k]) < 1e-10);
      CHECK(adv.returns[k] == doctest::Approx(adv.advantages[k] + buf.steps[k].value_old));
    }
  }
}

TEST_CASE("GAE limiting cases") {
  Rng rng(2);
  const RolloutBuffer buf = random_buffer(rng, 4);
  const Advantages td = compute_gae(buf, 0.9, 0.0);
  for (std::size_t k = 0; k < buf.steps.size(); ++k) {
    const double next = buf.steps[k].done ? 0.0 : buf.steps[k + 1].value_old;
    CHECK(td.advantages[k] == doctest::Approx(buf.steps[k].reward + 0.9 * next - buf.steps[k].value_old));
  }
  RolloutBuffer zero_v = buf;
  for (auto& t : zero_v.steps) t.value_old = 0.0;
  const Advantages mc = compute_gae(zero_v, 0.9, 1.0);
  for (std::size_t k = 0; k < zero_v.steps.size(); ++k) {
    double g = 0.0, w = 1.0;
    for (std::size_t j = k; j < zero_v.steps.size() && zero_v.steps[j].episode == zero_v.steps[k].episode; ++j) {
      g += w * zero_v.steps[j].reward;
      w *= 0.9;
    }
    CHECK(mc.advantages[k] == doctest::Approx(g));
  }
}

TEST_CASE("clipped surrogate never exceeds either branch") {
  Rng rng(3);
  for (int k = 0; k < 1000; ++k) {
    const double r = std::exp(rng.normal());
    const double a = rng.normal();
    const double s = clipped_surrogate(r, a, 0.2);
    CHECK(s <= r * a + 1e-15);
    CHECK(s <= std::clamp(r, 0.8, 1.2) * a + 1e-15);
    CHECK(s == std::min(r * a, std::clamp(r, 0.8, 1.2) * a));
  }
}

TEST_CASE("rollouts are deterministic, worker independent and record log probs") {
  const InstancePool p = pool(1, 8);
  GaussianPolicy policy(binding(), 1);
  Critic critic(binding(), 2);
  EnvConfig env;
  env.max_steps = 15;
  const RolloutBuffer a = collect_rollouts(policy, critic, p, env, 6, 99, 1);
  const RolloutBuffer b = collect_rollouts(policy, critic, p, env, 6, 99, 3);
  CHECK(a.episode_lengths == b.episode_lengths);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    CHECK(a.steps[k].action == b.steps[k].action);
    CHECK(a.steps[k].log_prob_old == b.steps[k].log_prob_old);
  }
  CHECK_NOTHROW(a.validate(env.max_steps));
  for (const Transition& t : a.steps) {
    const PolicyOutput out = policy.forward(t.obs);
    CHECK(std::abs(gaussian_log_prob(out.mean, out.log_std, t.action) - t.log_prob_old) < 1e-10);
  }
}

TEST_CASE("feasible-at-reset pool gives unit episodes") {
  MipInstance inst;
  inst.n = 5;
  inst.m = 6;
  inst.a.assign(30, 0);
  for (int j = 0; j < 5; ++j) inst.a[j * 5 + j] = -1;
  inst.b = {-1, -1, -1, -1, -1, 0};
  inst.c = {1, 1, 1, 1, 1};
  inst.int_mask.assign(5, 1);
  GaussianPolicy policy(binding(), 1);
  policy.fill_log_std(-5.0);
  Critic critic(binding(), 2);
  const RolloutBuffer buf =
      collect_rollouts(policy, critic, {std::make_shared<const MipInstance>(inst)}, {}, 5, 3);
  CHECK(buf.episode_lengths == std::vector<int>(5, 1));
  CHECK(buf.steps.empty());
}

TEST_CASE("buffer validation") {
  Rng rng(4);
  RolloutBuffer buf = random_buffer(rng, 3);
  CHECK_NOTHROW(buf.validate(100));
  CHECK_THROWS_AS(buf.validate(1), DataError);
  buf.steps.front().done = !buf.steps.front().done;
  CHECK_THROWS_AS(buf.validate(100), DataError);
}

TEST_CASE("ratio identity and clip-fraction recount") {
  const InstancePool p = pool(2, 10);
  GaussianPolicy policy(binding(), 5);
  Critic critic(binding(), 6);
  EnvConfig env;
  env.max_steps = 20;
  const RolloutBuffer buf = collect_rollouts(policy, critic, p, env, 8, 7);
  REQUIRE(!buf.steps.empty());
  const Advantages adv = compute_gae(buf, 0.99, 0.95, 0.01);
  TrainConfig config;
  config.minibatch_size = 16;
  Adam popt(policy.params(), config.learning_rate), copt(critic.params(), config.learning_rate);
  Rng rng(8);
  const UpdateStats stats = ppo_update(policy, critic, popt, copt, buf, adv, config, rng);
  CHECK(stats.initial_ratio_deviation < 1e-8);
  for (const MinibatchRecord& mb : stats.minibatches) {
    int clipped = 0;
    for (double r : mb.ratios) clipped += std::abs(r - 1.0) > config.clip_eps;
    CHECK(mb.clip_fraction == static_cast<double>(clipped) / mb.ratios.size());
  }
  CHECK(std::isfinite(stats.surrogate));
  CHECK(std::isfinite(stats.value_loss));
  for (double v : policy.params().back()->value.data) {
    CHECK(v >= kLogStdMin);
    CHECK(v <= kLogStdMax);
  }
}

TEST_CASE("zero advantages leave the mean head to the entropy term only") {
  const InstancePool p = pool(3, 4);
  GaussianPolicy policy(binding(), 5);
  Critic critic(binding(), 6);
  EnvConfig env;
  env.max_steps = 10;
  const RolloutBuffer buf = collect_rollouts(policy, critic, p, env, 4, 7);
  REQUIRE(!buf.steps.empty());
  Advantages adv = compute_gae(buf, 0.99, 0.95);
  std::fill(adv.advantages.begin(), adv.advantages.end(), 0.0);
  TrainConfig config;
  config.normalize_advantages = false;
  config.epochs_per_update = 1;
  const GaussianPolicy before = policy;
  Adam popt(policy.params(), config.learning_rate), copt(critic.params(), config.learning_rate);
  Rng rng(1);
  const UpdateStats stats = ppo_update(policy, critic, popt, copt, buf, adv, config, rng);
  CHECK(stats.first_surrogate == 0.0);
  const auto pa = before.params();
  const auto pb = policy.params();
  for (std::size_t k = 0; k + 1 < pa.size(); ++k) CHECK(pa[k]->value.data == pb[k]->value.data);
  CHECK(pa.back()->value.data != pb.back()->value.data);
}

TEST_CASE("empty buffers are rejected") {
  GaussianPolicy policy(binding(), 1);
  Critic critic(binding(), 2);
  Adam popt(policy.params(), 1e-3), copt(critic.params(), 1e-3);
  Rng rng(1);
  CHECK_THROWS_AS(ppo_update(policy, critic, popt, copt, {}, {}, {}, rng), DataError);
}

TEST_CASE("Adam clips the global gradient norm") {
  nn::Param p("w", {2});
  p.grad = {3.0, 4.0};
  Adam opt({&p}, 0.1);
  CHECK(opt.step(0.5) == doctest::Approx(5.0));
  // First Adam step moves each coordinate by about lr against the gradient sign.
  CHECK(p.value.data[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(p.value.data[1] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("training smoke run is reproducible") {
  const InstancePool train_pool = pool(10, 20);
  const InstancePool eval_pool = pool(11, 5);
  EnvConfig env;
  env.max_steps = 30;
  TrainConfig config;
  config.iterations = 3;
  config.episodes_per_iteration = 6;
  config.seed = 5;
  std::vector<int> seen;
  const TrainResult a = train(train_pool, eval_pool, ObsVariant::kMlp, env, config,
                              [&](const IterationRecord& r) { seen.push_back(r.iteration); });
  const TrainResult b = train(train_pool, eval_pool, ObsVariant::kMlp, env, config);
  CHECK(seen == std::vector<int>{1, 2, 3});
  REQUIRE(a.log.records.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& x = a.log.records[k];
    const auto& y = b.log.records[k];
    CHECK(x.train_ep_len_mean == y.train_ep_len_mean);
    CHECK(x.eval_ep_len_mean == y.eval_ep_len_mean);
    CHECK(x.surrogate == y.surrogate);
    CHECK(x.value_loss == y.value_loss);
    CHECK(std::isfinite(x.entropy));
  }
  CHECK(a.best_iteration >= 1);
}

TEST_CASE("CNN training smoke run") {
  const InstancePool train_pool = pool(12, 5);
  EnvConfig env;
  env.max_steps = 10;
  TrainConfig config;
  config.iterations = 2;
  config.episodes_per_iteration = 3;
  const TrainResult r = train(train_pool, train_pool, ObsVariant::kCnn, env, config);
  CHECK(r.log.records.size() == 2);
  CHECK(r.best.policy.binding().variant == ObsVariant::kCnn);
}

TEST_CASE("pools with mixed sizes are rejected") {
  InstancePool mixed = pool(1, 2);
  mixed.push_back(std::make_shared<const MipInstance>(generate(1, 4, 6, ProblemKind::kIP)));
  CHECK_THROWS_AS(train(mixed, mixed, ObsVariant::kMlp, {}, {}), DataError);
}
