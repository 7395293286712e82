#pragma once

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sfp/instance.hpp"
#include "sfp/matrix.hpp"

namespace sfp {

enum class ObsVariant { kMlp, kCnn };
enum class RewardNorm { kPositivePartL1, kPositivePartL2, kPlainL2 };

std::string to_string(ObsVariant variant);
ObsVariant parse_obs_variant(const std::string& text);
std::string to_string(RewardNorm norm);
RewardNorm parse_reward_norm(const std::string& text);

// Bumped whenever the observation encodings below change; checkpoints record
// the version they were trained against.
inline constexpr int kObservationLayoutVersion = 1;

struct EnvConfig {
  int max_steps = 100;
  ObsVariant variant = ObsVariant::kMlp;
  RewardNorm reward_norm = RewardNorm::kPositivePartL1;
  double action_clip = 10.0;
  // MLP variant only: keep the reset-time projection instead of re-projecting
  // after every step.
  bool freeze_projection = false;

  void validate() const;
};

// [A row-major | b | x_t | x_tilde | int_mask], length m*n + m + 3n.
struct MlpObservation {
  std::vector<double> flat;
};

// grid = [A | b] (m x (n+1)); sols = [x_t | x_tilde_0]; mask = int_mask.
struct CnnObservation {
  Matrix grid;
  std::vector<double> sols;
  std::vector<double> mask;
};

using Observation = std::variant<MlpObservation, CnnObservation>;

struct MlpLayout {
  std::size_t a_offset = 0;
  std::size_t b_offset = 0;
  std::size_t x_offset = 0;
  std::size_t x_tilde_offset = 0;
  std::size_t mask_offset = 0;
  std::size_t size = 0;

  static MlpLayout for_size(int n, int m);
};

struct DecodedMlpObservation {
  std::vector<double> a, b, x, x_tilde, mask;
};
DecodedMlpObservation decode_mlp_observation(const MlpObservation& obs, int n, int m);

// Negative violation of A x <= b under the chosen norm; 0 when feasible
// (except PlainL2, which also penalizes slack).
double violation_reward(const MipInstance& inst, std::span<const double> x, RewardNorm norm);

struct EnvState {
  std::vector<double> x;
  std::vector<double> x_tilde;
  int t = 0;
  bool done = false;
  bool feasible = false;
};

struct StepOutcome {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  FeasibilityReport info;
};

// Episode of moving an integral point by real-valued actions followed by
// partial rounding. Rewards are computed on the post-action point.
class FeasibilityEnv {
 public:
  FeasibilityEnv(std::shared_ptr<const MipInstance> instance, EnvConfig config);

  // x_0 is the rounded relaxation optimum. If it is already feasible the
  // episode is over before any step (episode length 1).
  Observation reset();

  // Throws StateError after the episode is done.
  StepOutcome step(std::span<const double> action);

  Observation observe() const;

  const EnvState& state() const { return state_; }
  const MipInstance& instance() const { return *instance_; }
  const EnvConfig& config() const { return config_; }

  // max(1, t): a feasible start and a first-step success both count as 1.
  int episode_length() const { return std::max(1, state_.t); }

  // Counters accumulated since construction.
  int projection_count() const { return projection_count_; }
  int relaxation_solves() const { return relaxation_solves_; }
  int lp_solves() const { return projection_count_ + relaxation_solves_; }

 private:
  std::shared_ptr<const MipInstance> instance_;
  EnvConfig config_;
  EnvState state_;
  bool started_ = false;
  int projection_count_ = 0;
  int relaxation_solves_ = 0;
};

}  // namespace sfp
