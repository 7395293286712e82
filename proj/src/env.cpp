#include "sfp/env.hpp"

#include <algorithm>
#include <cmath>

#include "sfp/errors.hpp"

namespace sfp {

std::string to_string(ObsVariant variant) {
  return variant == ObsVariant::kMlp ? "mlp" : "cnn";
}

ObsVariant parse_obs_variant(const std::string& text) {
  if (text == "mlp" || text == "MLP") return ObsVariant::kMlp;
  if (text == "cnn" || text == "CNN") return ObsVariant::kCnn;
  throw DataError("unknown policy variant '" + text + "' (expected mlp or cnn)");
}

std::string to_string(RewardNorm norm) {
  switch (norm) {
    case RewardNorm::kPositivePartL1: return "positive_part_l1";
    case RewardNorm::kPositivePartL2: return "positive_part_l2";
    case RewardNorm::kPlainL2: return "plain_l2";
  }
  return "?";
}

RewardNorm parse_reward_norm(const std::string& text) {
  if (text == "positive_part_l1") return RewardNorm::kPositivePartL1;
  if (text == "positive_part_l2") return RewardNorm::kPositivePartL2;
  if (text == "plain_l2") return RewardNorm::kPlainL2;
  throw DataError("unknown reward norm '" + text + "'");
}

void EnvConfig::validate() const {
  if (max_steps < 1) throw DataError("env: max_steps must be at least 1");
  if (!(action_clip > 0.0)) throw DataError("env: action_clip must be positive");
}

MlpLayout MlpLayout::for_size(int n, int m) {
  const auto un = static_cast<std::size_t>(n);
  const auto um = static_cast<std::size_t>(m);
  MlpLayout layout;
  layout.a_offset = 0;
  layout.b_offset = um * un;
  layout.x_offset = layout.b_offset + um;
  layout.x_tilde_offset = layout.x_offset + un;
  layout.mask_offset = layout.x_tilde_offset + un;
  layout.size = layout.mask_offset + un;
  return layout;
}

DecodedMlpObservation decode_mlp_observation(const MlpObservation& obs, int n, int m) {
  const MlpLayout layout = MlpLayout::for_size(n, m);
  if (obs.flat.size() != layout.size) throw ShapeMismatch("MLP observation has wrong length");
  auto slice = [&](std::size_t offset, std::size_t len) {
    return std::vector<double>(obs.flat.begin() + static_cast<std::ptrdiff_t>(offset),
                               obs.flat.begin() + static_cast<std::ptrdiff_t>(offset + len));
  };
  const auto un = static_cast<std::size_t>(n);
  const auto um = static_cast<std::size_t>(m);
  return {slice(layout.a_offset, um * un), slice(layout.b_offset, um),
          slice(layout.x_offset, un), slice(layout.x_tilde_offset, un),
          slice(layout.mask_offset, un)};
}

double violation_reward(const MipInstance& inst, std::span<const double> x, RewardNorm norm) {
  const std::vector<double> r = residual(inst, x);
  double total = 0.0;
  switch (norm) {
    case RewardNorm::kPositivePartL1:
      for (double v : r) total += std::max(0.0, v);
      return -total;
    case RewardNorm::kPositivePartL2:
      for (double v : r) total += std::max(0.0, v) * std::max(0.0, v);
      return -std::sqrt(total);
    case RewardNorm::kPlainL2:
      for (double v : r) total += v * v;
      return -std::sqrt(total);
  }
  return 0.0;
}

FeasibilityEnv::FeasibilityEnv(std::shared_ptr<const MipInstance> instance, EnvConfig config)
    : instance_(std::move(instance)), config_(config) {
  if (!instance_) throw DataError("env: null instance");
  config_.validate();
}

Observation FeasibilityEnv::reset() {
  const MipInstance& inst = *instance_;
  const LpOutcome relaxed = solve_lp(relaxation(inst));
  ++relaxation_solves_;
  const auto* optimum = std::get_if<LpOptimal>(&relaxed);
  if (optimum == nullptr) throw DataError("env: continuous relaxation has no optimum");

  state_ = EnvState{};
  state_.x = round_partial(optimum->point, inst.int_mask);
  state_.x_tilde = project_onto_relaxation(inst, state_.x);
  ++projection_count_;
  state_.feasible = check(inst, state_.x).feasible;
  state_.done = state_.feasible;
  started_ = true;
  return observe();
}

StepOutcome FeasibilityEnv::step(std::span<const double> action) {
  if (!started_) throw StateError("env: step before reset");
  if (state_.done) throw StateError("env: step after the episode is done");
  const MipInstance& inst = *instance_;
  if (action.size() != static_cast<std::size_t>(inst.n)) {
    throw ShapeMismatch("env: action has " + std::to_string(action.size()) +
                        " entries, expected " + std::to_string(inst.n));
  }

  std::vector<double> moved(state_.x);
  for (int j = 0; j < inst.n; ++j) {
    const double a = std::isfinite(action[j])
                         ? std::clamp(action[j], -config_.action_clip, config_.action_clip)
                         : 0.0;
    moved[j] = std::clamp(moved[j] + a, static_cast<double>(inst.lower_bound),
                          static_cast<double>(inst.upper_bound));
  }
  state_.x = round_partial(moved, inst.int_mask);
  ++state_.t;

  StepOutcome outcome;
  outcome.info = check(inst, state_.x);
  state_.feasible = outcome.info.feasible;
  // Continuous MIP coordinates can leave sub-tolerance residue in a feasible
  // point; the violation norms report exactly zero there.
  outcome.reward = state_.feasible && config_.reward_norm != RewardNorm::kPlainL2
                       ? 0.0
                       : violation_reward(inst, state_.x, config_.reward_norm);

  if (config_.variant == ObsVariant::kMlp && !config_.freeze_projection) {
    state_.x_tilde = project_onto_relaxation(inst, state_.x);
    ++projection_count_;
  }
  state_.done = state_.feasible || state_.t >= config_.max_steps;
  outcome.done = state_.done;
  outcome.obs = observe();
  return outcome;
}

Observation FeasibilityEnv::observe() const {
  const MipInstance& inst = *instance_;
  if (config_.variant == ObsVariant::kMlp) {
    const MlpLayout layout = MlpLayout::for_size(inst.n, inst.m);
    MlpObservation obs;
    obs.flat.resize(layout.size);
    std::copy(inst.a.begin(), inst.a.end(), obs.flat.begin() + layout.a_offset);
    std::copy(inst.b.begin(), inst.b.end(), obs.flat.begin() + layout.b_offset);
    std::copy(state_.x.begin(), state_.x.end(), obs.flat.begin() + layout.x_offset);
    std::copy(state_.x_tilde.begin(), state_.x_tilde.end(),
              obs.flat.begin() + layout.x_tilde_offset);
    std::copy(inst.int_mask.begin(), inst.int_mask.end(), obs.flat.begin() + layout.mask_offset);
    return obs;
  }
  CnnObservation obs;
  obs.grid = Matrix(static_cast<std::size_t>(inst.m), static_cast<std::size_t>(inst.n) + 1);
  for (int i = 0; i < inst.m; ++i) {
    for (int j = 0; j < inst.n; ++j) obs.grid(i, j) = inst.coef(i, j);
    obs.grid(i, inst.n) = inst.b[i];
  }
  obs.sols = state_.x;
  obs.sols.insert(obs.sols.end(), state_.x_tilde.begin(), state_.x_tilde.end());
  obs.mask.assign(inst.int_mask.begin(), inst.int_mask.end());
  return obs;
}

}  // namespace sfp
