#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "sfp/errors.hpp"
#include "sfp/policy.hpp"
#include "sfp_oracles/oracles.hpp"

using namespace sfp;

namespace {

PolicyBinding small_binding(ObsVariant variant, int n = 3, int m = 4) {
  PolicyBinding b;
  b.n = n;
  b.m = m;
  b.variant = variant;
  b.shape.hidden = 6;
  b.shape.conv1_channels = 2;
  b.shape.conv2_channels = 3;
  b.shape.side_width = 5;
  return b;
}

Observation random_obs(const PolicyBinding& b, Rng& rng) {
  const auto n = static_cast<std::size_t>(b.n);
  const auto m = static_cast<std::size_t>(b.m);
  if (b.variant == ObsVariant::kMlp) {
    MlpObservation o;
    for (std::size_t i = 0; i < m * n + m + 3 * n; ++i) o.flat.push_back(10.0 * rng.normal());
    return o;
  }
  CnnObservation o;
  o.grid = Matrix(m, n + 1);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j <= n; ++j) o.grid(i, j) = 10.0 * rng.normal();
  }
  for (std::size_t i = 0; i < 2 * n; ++i) o.sols.push_back(10.0 * rng.normal());
  for (std::size_t i = 0; i < n; ++i) o.mask.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
  return o;
}

void randomize(const std::vector<nn::Param*>& params, Rng& rng, double scale) {
  for (nn::Param* p : params) {
    for (double& v : p->value.data) v = scale * rng.normal();
  }
}

// Scalar test loss: fixed random projection of the outputs.
void fd_policy(ObsVariant variant, int draws) {
  Rng rng(static_cast<std::uint64_t>(variant) + 100);
  double worst = 0.0;
  long total = 0, kinks = 0;
  for (int d = 0; d < draws; ++d) {
    const PolicyBinding b = small_binding(variant);
    GaussianPolicy policy(b, rng.next_u64());
    randomize(policy.params(), rng, 0.5);
    const Observation obs = random_obs(b, rng);
    std::vector<double> wm(b.n), ws(b.n);
    for (double& v : wm) v = rng.normal();
    for (double& v : ws) v = rng.normal();
    auto loss = [&] {
      const PolicyOutput out = policy.forward(obs);
      double s = 0.0;
      for (int i = 0; i < b.n; ++i) s += wm[i] * out.mean[i] + ws[i] * out.log_std[i];
      return s;
    };
    policy.zero_grad();
    loss();
    policy.backward(wm, ws);
    for (nn::Param* p : policy.params()) {
      for (std::size_t k = 0; k < p->value.size(); ++k) {
        const auto fd = oracle::checked_difference(p->value.data[k], loss);
        ++total;
        if (!fd.smooth) {
          ++kinks;
          continue;
        }
        worst = std::max(worst, oracle::relative_error(fd, p->grad[k]));
      }
    }
  }
  CHECK(worst < 1e-4);
  CHECK(kinks * 100 <= total);
}

void fd_critic(ObsVariant variant, int draws) {
  Rng rng(static_cast<std::uint64_t>(variant) + 200);
  double worst = 0.0;
  long total = 0, kinks = 0;
  for (int d = 0; d < draws; ++d) {
    const PolicyBinding b = small_binding(variant);
    Critic critic(b, rng.next_u64());
    randomize(critic.params(), rng, 0.5);
    const Observation obs = random_obs(b, rng);
    auto loss = [&] { return critic.forward(obs); };
    critic.zero_grad();
    loss();
    critic.backward(1.0);
    for (nn::Param* p : critic.params()) {
      for (std::size_t k = 0; k < p->value.size(); ++k) {
        const auto fd = oracle::checked_difference(p->value.data[k], loss);
        ++total;
        if (!fd.smooth) {
          ++kinks;
          continue;
        }
        worst = std::max(worst, oracle::relative_error(fd, p->grad[k]));
      }
    }
  }
  CHECK(worst < 1e-4);
  CHECK(kinks * 100 <= total);
}

}  // namespace

TEST_CASE("finite differences: MLP policy") { fd_policy(ObsVariant::kMlp, 20); }
TEST_CASE("finite differences: CNN policy") { fd_policy(ObsVariant::kCnn, 20); }
TEST_CASE("finite differences: critics") {
  fd_critic(ObsVariant::kMlp, 20);
  fd_critic(ObsVariant::kCnn, 20);
}

TEST_CASE("forward matches a naive implementation") {
  Rng rng(31);
  for (ObsVariant variant : {ObsVariant::kMlp, ObsVariant::kCnn}) {
    PolicyBinding b;
    b.n = 5;
    b.m = 6;
    b.variant = variant;
    GaussianPolicy policy(b, 7);
    Critic critic(b, 8);
    randomize(policy.params(), rng, 0.2);
    randomize(critic.params(), rng, 0.2);
    for (int trial = 0; trial < 5; ++trial) {
      const Observation obs = random_obs(b, rng);
      const PolicyOutput fast = policy.forward(obs);
      const PolicyOutput slow = oracle::naive_policy_forward(policy, obs);
      for (int i = 0; i < b.n; ++i) {
        CHECK(std::abs(fast.mean[i] - slow.mean[i]) <= 1e-10 * std::max(1.0, std::abs(slow.mean[i])));
        CHECK(fast.log_std[i] == slow.log_std[i]);
      }
      const double v = critic.forward(obs);
      CHECK(std::abs(v - oracle::naive_critic_forward(critic, obs)) <= 1e-10 * std::max(1.0, std::abs(v)));
    }
  }
}

TEST_CASE("zero weights give a zero mean") {
  PolicyBinding b;
  b.n = 5;
  b.m = 6;
  GaussianPolicy policy(b, 1);
  for (nn::Param* p : policy.params()) std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
  Rng rng(2);
  const PolicyOutput out = policy.forward(random_obs(b, rng));
  CHECK(out.mean == std::vector<double>(5, 0.0));
}

TEST_CASE("initial actions are near zero") {
  PolicyBinding b;
  b.n = 5;
  b.m = 6;
  GaussianPolicy policy(b, 1);
  Rng rng(4);
  for (double v : policy.forward(random_obs(b, rng)).mean) CHECK(std::abs(v) < 0.5);
}

TEST_CASE("swapping CNN rows changes the output") {
  PolicyBinding b;
  b.n = 5;
  b.m = 6;
  b.variant = ObsVariant::kCnn;
  GaussianPolicy policy(b, 3);
  Rng rng(6);
  randomize(policy.params(), rng, 0.3);
  auto obs = std::get<CnnObservation>(random_obs(b, rng));
  const auto before = policy.forward(obs).mean;
  for (std::size_t j = 0; j <= 5; ++j) std::swap(obs.grid(0, j), obs.grid(1, j));
  CHECK(policy.forward(obs).mean != before);
}

TEST_CASE("backward needs a forward pass") {
  PolicyBinding b = small_binding(ObsVariant::kMlp);
  GaussianPolicy policy(b, 1);
  const std::vector<double> g(b.n, 1.0);
  CHECK_THROWS_AS(policy.backward(g, g), StateError);
  Critic critic(b, 1);
  CHECK_THROWS_AS(critic.backward(1.0), StateError);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  PolicyBinding b = small_binding(ObsVariant::kCnn);
  GaussianPolicy policy(b, 1);
  Rng rng(3);
  policy.zero_grad();
  policy.forward(random_obs(b, rng));
  const std::vector<double> zero(b.n, 0.0);
  policy.backward(zero, zero);
  for (const nn::Param* p : policy.params()) {
    for (double g : p->grad) CHECK(g == 0.0);
  }
}

TEST_CASE("mismatched observations are rejected") {
  PolicyBinding b = small_binding(ObsVariant::kMlp);
  GaussianPolicy policy(b, 1);
  CHECK_THROWS_AS(policy.forward(MlpObservation{{1.0, 2.0}}), ShapeMismatch);
  Rng rng(1);
  CHECK_THROWS_AS(policy.forward(random_obs(small_binding(ObsVariant::kCnn), rng)), ShapeMismatch);
}

TEST_CASE("Gaussian log density and sampling") {
  const std::vector<double> mean{0.5, -1.0, 2.0}, log_std{0.0, 0.0, 0.0};
  CHECK(gaussian_log_prob(mean, log_std, mean) ==
        doctest::Approx(-1.5 * std::log(2.0 * std::numbers::pi)));

  PolicyBinding b;
  b.n = 5;
  b.m = 6;
  GaussianPolicy policy(b, 9);
  Rng rng(10);
  const Observation obs = random_obs(b, rng);

  policy.fill_log_std(-5.0);
  const auto center = policy.forward(obs).mean;
  for (int k = 0; k < 100; ++k) {
    const auto s = sample_action(policy, obs, rng);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(s.action[i] - center[i]) <= 4.0 * std::exp(-5.0));
  }

  policy.fill_log_std(0.0);
  const int samples = 100000;
  std::vector<double> total(5, 0.0);
  for (int k = 0; k < samples; ++k) {
    const auto s = sample_action(policy, obs, rng);
    const PolicyOutput out = policy.forward(obs);
    if (k < 50) CHECK(s.log_prob == doctest::Approx(gaussian_log_prob(out.mean, out.log_std, s.action)));
    for (int i = 0; i < 5; ++i) total[i] += s.action[i];
  }
  for (int i = 0; i < 5; ++i) CHECK(std::abs(total[i] / samples - center[i]) <= 4.0 / std::sqrt(samples));
}

TEST_CASE("log_std is clamped") {
  PolicyBinding b = small_binding(ObsVariant::kMlp);
  GaussianPolicy policy(b, 1);
  policy.fill_log_std(10.0);
  Rng rng(2);
  for (double v : policy.forward(random_obs(b, rng)).log_std) CHECK(v == kLogStdMax);
  policy.fill_log_std(-10.0);
  for (double v : policy.forward(random_obs(b, rng)).log_std) CHECK(v == kLogStdMin);
}

TEST_CASE("parameter counts are fixed by the binding") {
  PolicyBinding b;
  b.n = 5;
  b.m = 6;
  CHECK(policy_parameter_count(b) == 7818);
  CHECK(critic_parameter_count(b) == 7553);
  b.variant = ObsVariant::kCnn;
  CHECK(policy_parameter_count(b) == 47786);
}

TEST_CASE("checkpoints round-trip exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "sfp_unit_ckpt";
  std::filesystem::create_directories(dir);
  Rng rng(12);
  for (ObsVariant variant : {ObsVariant::kMlp, ObsVariant::kCnn}) {
    PolicyBinding b;
    b.n = 5;
    b.m = 6;
    b.variant = variant;
    GaussianPolicy policy(b, 1);
    Critic critic(b, 2);
    randomize(policy.params(), rng, 0.3);
    const auto path = dir / (to_string(variant) + ".json");
    save_checkpoint(policy, critic, path);
    Checkpoint back = load_checkpoint(path, b);
    const auto pa = policy.params();
    const auto pb = back.policy.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t k = 0; k < pa.size(); ++k) CHECK(pa[k]->value.data == pb[k]->value.data);
    const Observation obs = random_obs(b, rng);
    CHECK(policy.forward(obs).mean == back.policy.forward(obs).mean);
    CHECK(critic.forward(obs) == back.critic.forward(obs));

    PolicyBinding other = b;
    other.n = 4;
    try {
      load_checkpoint(path, other);
      FAIL("expected a binding mismatch");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("n") != std::string::npos);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("finite-difference comparison still flags wrong gradients") {
  double x = 0.7;
  auto f = [&] { return std::sin(x) * 50.0; };
  const auto fd = oracle::checked_difference(x, f);
  CHECK(oracle::relative_error(fd, 50.0 * std::cos(0.7)) < 1e-8);
  CHECK(oracle::relative_error(fd, 50.0 * std::cos(0.7) * (1.0 + 1e-3)) > 1e-4);
  CHECK(fd.noise < 1e-6);
}
