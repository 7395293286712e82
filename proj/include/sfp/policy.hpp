#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "sfp/env.hpp"
#include "sfp/nn.hpp"
#include "sfp/rng.hpp"

namespace sfp {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr int kCheckpointFormatVersion = 1;

// Fixed input scaling applied inside both trunks: constraint coefficients lie
// in [-10, 10], right-hand sides in the hundreds, solution coordinates in the
// [-20, 20] box. The integrality mask enters unscaled.
inline constexpr double kObsCoefScale = 0.1;
inline constexpr double kObsRhsScale = 0.01;
inline constexpr double kObsSolScale = 0.1;

struct NetworkShape {
  int hidden = 64;
  int conv1_channels = 8;
  int conv2_channels = 16;
  int side_width = 64;

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

// Everything a set of weights is only valid for.
struct PolicyBinding {
  int n = 0;
  int m = 0;
  ObsVariant variant = ObsVariant::kMlp;
  int layout_version = kObservationLayoutVersion;
  NetworkShape shape;

  void validate() const;
  friend bool operator==(const PolicyBinding&, const PolicyBinding&) = default;
};

// Two tanh layers over the scaled flat observation.
class MlpTrunk {
 public:
  MlpTrunk() = default;
  MlpTrunk(const PolicyBinding& binding, const std::string& prefix);

  std::vector<double> forward(const Observation& obs);
  void backward(std::span<const double> grad_features);
  void init(Rng& rng);
  void collect(std::vector<nn::Param*>& out);
  std::size_t feature_size() const { return l2_.out_features(); }

 private:
  std::vector<double> input_scale_;
  nn::Dense l1_, l2_;
  nn::ActivationLayer a1_{nn::Activation::kTanh}, a2_{nn::Activation::kTanh};
};

// conv(1->c1) relu conv(c1->c2) relu flatten over the [A|b] grid, a tanh side
// branch over [x_t | x_tilde_0 | mask], concatenation, two tanh layers.
class CnnTrunk {
 public:
  CnnTrunk() = default;
  CnnTrunk(const PolicyBinding& binding, const std::string& prefix);

  std::vector<double> forward(const Observation& obs);
  void backward(std::span<const double> grad_features);
  void init(Rng& rng);
  void collect(std::vector<nn::Param*>& out);
  std::size_t feature_size() const { return f2_.out_features(); }

 private:
  int n_ = 0;
  int m_ = 0;
  nn::Conv2d c1_, c2_;
  nn::ActivationLayer r1_{nn::Activation::kRelu}, r2_{nn::Activation::kRelu};
  nn::Dense side_;
  nn::ActivationLayer side_act_{nn::Activation::kTanh};
  nn::Dense f1_, f2_;
  nn::ActivationLayer fa1_{nn::Activation::kTanh}, fa2_{nn::Activation::kTanh};
  std::size_t conv_size_ = 0;
};

using Trunk = std::variant<MlpTrunk, CnnTrunk>;

struct PolicyOutput {
  std::vector<double> mean;
  std::vector<double> log_std;
};

// Diagonal Gaussian policy with a state-independent learned log_std.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(const PolicyBinding& binding, std::uint64_t seed);

  PolicyOutput forward(const Observation& obs);
  // Gradients of some scalar w.r.t. mean and log_std of the last forward.
  void backward(std::span<const double> grad_mean, std::span<const double> grad_log_std);

  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;
  void zero_grad();
  void clamp_log_std();
  void fill_log_std(double value);
  const PolicyBinding& binding() const { return binding_; }

 private:
  PolicyBinding binding_;
  Trunk trunk_;
  nn::Dense mean_head_;
  nn::Param log_std_;
};

class Critic {
 public:
  Critic() = default;
  Critic(const PolicyBinding& binding, std::uint64_t seed);

  double forward(const Observation& obs);
  void backward(double grad_value);

  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;
  void zero_grad();
  const PolicyBinding& binding() const { return binding_; }

 private:
  PolicyBinding binding_;
  Trunk trunk_;
  nn::Dense value_head_;
};

std::size_t parameter_count(std::span<const nn::Param* const> params);
std::size_t policy_parameter_count(const PolicyBinding& binding);
std::size_t critic_parameter_count(const PolicyBinding& binding);

double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action);
double gaussian_entropy(std::span<const double> log_std);

struct ActionSample {
  std::vector<double> action;
  double log_prob = 0.0;
  std::vector<double> mean;
};

ActionSample sample_action(GaussianPolicy& policy, const Observation& obs, Rng& rng);

struct Checkpoint {
  GaussianPolicy policy;
  Critic critic;
};

void save_checkpoint(const GaussianPolicy& policy, const Critic& critic,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Also throws DataError if the stored binding differs from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const PolicyBinding& expected);
PolicyBinding read_checkpoint_binding(const std::filesystem::path& path);

}  // namespace sfp
