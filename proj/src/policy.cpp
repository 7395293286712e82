#include "sfp/policy.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "sfp/errors.hpp"

namespace sfp {

namespace {

const double kHiddenGain = std::sqrt(2.0);
constexpr double kMeanHeadGain = 0.01;
constexpr double kValueHeadGain = 1.0;

template <typename T>
const T& expect(const Observation& obs, const char* who) {
  const auto* p = std::get_if<T>(&obs);
  if (p == nullptr) throw ShapeMismatch(std::string(who) + ": observation variant mismatch");
  return *p;
}

}  // namespace

void PolicyBinding::validate() const {
  if (n < 1 || m < 1) throw DataError("binding: n and m must be positive");
  if (layout_version != kObservationLayoutVersion) {
    throw VersionMismatch("binding: observation layout version " +
                          std::to_string(layout_version) + " is not supported");
  }
  if (shape.hidden < 1 || shape.conv1_channels < 1 || shape.conv2_channels < 1 ||
      shape.side_width < 1) {
    throw DataError("binding: network widths must be positive");
  }
}

MlpTrunk::MlpTrunk(const PolicyBinding& binding, const std::string& prefix) {
  const MlpLayout layout = MlpLayout::for_size(binding.n, binding.m);
  input_scale_.assign(layout.size, kObsSolScale);
  std::fill_n(input_scale_.begin() + static_cast<std::ptrdiff_t>(layout.a_offset),
              layout.b_offset - layout.a_offset, kObsCoefScale);
  std::fill_n(input_scale_.begin() + static_cast<std::ptrdiff_t>(layout.b_offset),
              layout.x_offset - layout.b_offset, kObsRhsScale);
  std::fill(input_scale_.begin() + static_cast<std::ptrdiff_t>(layout.mask_offset),
            input_scale_.end(), 1.0);
  const auto hidden = static_cast<std::size_t>(binding.shape.hidden);
  l1_ = nn::Dense(layout.size, hidden, prefix + ".fc1");
  l2_ = nn::Dense(hidden, hidden, prefix + ".fc2");
}

std::vector<double> MlpTrunk::forward(const Observation& obs) {
  const auto& flat = expect<MlpObservation>(obs, "mlp trunk").flat;
  if (flat.size() != input_scale_.size()) {
    throw ShapeMismatch("mlp trunk: observation length " + std::to_string(flat.size()) +
                        ", expected " + std::to_string(input_scale_.size()));
  }
  std::vector<double> x(flat.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = flat[i] * input_scale_[i];
  return a2_.forward(l2_.forward(a1_.forward(l1_.forward(x))));
}

void MlpTrunk::backward(std::span<const double> grad_features) {
  l1_.backward(a1_.backward(l2_.backward(a2_.backward(grad_features))));
}

void MlpTrunk::init(Rng& rng) {
  l1_.init(rng, kHiddenGain);
  l2_.init(rng, kHiddenGain);
}

void MlpTrunk::collect(std::vector<nn::Param*>& out) {
  l1_.collect(out);
  l2_.collect(out);
}

CnnTrunk::CnnTrunk(const PolicyBinding& binding, const std::string& prefix)
    : n_(binding.n), m_(binding.m) {
  const auto h = static_cast<std::size_t>(binding.m);
  const auto w = static_cast<std::size_t>(binding.n) + 1;
  const auto c1 = static_cast<std::size_t>(binding.shape.conv1_channels);
  const auto c2 = static_cast<std::size_t>(binding.shape.conv2_channels);
  const auto side = static_cast<std::size_t>(binding.shape.side_width);
  const auto hidden = static_cast<std::size_t>(binding.shape.hidden);
  c1_ = nn::Conv2d(1, c1, h, w, prefix + ".conv1");
  c2_ = nn::Conv2d(c1, c2, h, w, prefix + ".conv2");
  conv_size_ = c2_.output_size();
  side_ = nn::Dense(3 * static_cast<std::size_t>(binding.n), side, prefix + ".side");
  f1_ = nn::Dense(conv_size_ + side, hidden, prefix + ".fuse1");
  f2_ = nn::Dense(hidden, hidden, prefix + ".fuse2");
}

std::vector<double> CnnTrunk::forward(const Observation& obs) {
  const auto& cnn = expect<CnnObservation>(obs, "cnn trunk");
  const auto un = static_cast<std::size_t>(n_);
  const auto um = static_cast<std::size_t>(m_);
  if (cnn.grid.rows() != um || cnn.grid.cols() != un + 1 || cnn.sols.size() != 2 * un ||
      cnn.mask.size() != un) {
    throw ShapeMismatch("cnn trunk: observation shape does not match binding (n=" +
                        std::to_string(n_) + ", m=" + std::to_string(m_) + ")");
  }
  std::vector<double> grid(um * (un + 1));
  for (std::size_t i = 0; i < um; ++i) {
    for (std::size_t j = 0; j <= un; ++j) {
      grid[i * (un + 1) + j] = cnn.grid(i, j) * (j == un ? kObsRhsScale : kObsCoefScale);
    }
  }
  std::vector<double> side_in;
  side_in.reserve(3 * un);
  for (double v : cnn.sols) side_in.push_back(v * kObsSolScale);
  side_in.insert(side_in.end(), cnn.mask.begin(), cnn.mask.end());

  std::vector<double> fused = r2_.forward(c2_.forward(r1_.forward(c1_.forward(grid))));
  const std::vector<double> side = side_act_.forward(side_.forward(side_in));
  fused.insert(fused.end(), side.begin(), side.end());
  return fa2_.forward(f2_.forward(fa1_.forward(f1_.forward(fused))));
}

void CnnTrunk::backward(std::span<const double> grad_features) {
  const std::vector<double> g = f1_.backward(fa1_.backward(f2_.backward(fa2_.backward(grad_features))));
  const std::span<const double> grad_conv(g.data(), conv_size_);
  const std::span<const double> grad_side(g.data() + conv_size_, g.size() - conv_size_);
  side_.backward(side_act_.backward(grad_side));
  c1_.backward(r1_.backward(c2_.backward(r2_.backward(grad_conv))));
}

void CnnTrunk::init(Rng& rng) {
  c1_.init(rng, kHiddenGain);
  c2_.init(rng, kHiddenGain);
  side_.init(rng, kHiddenGain);
  f1_.init(rng, kHiddenGain);
  f2_.init(rng, kHiddenGain);
}

void CnnTrunk::collect(std::vector<nn::Param*>& out) {
  c1_.collect(out);
  c2_.collect(out);
  side_.collect(out);
  f1_.collect(out);
  f2_.collect(out);
}

namespace {

Trunk make_trunk(const PolicyBinding& binding, const std::string& prefix) {
  if (binding.variant == ObsVariant::kMlp) return MlpTrunk(binding, prefix);
  return CnnTrunk(binding, prefix);
}

std::size_t trunk_features(const Trunk& trunk) {
  return std::visit([](const auto& t) { return t.feature_size(); }, trunk);
}

template <typename Net>
std::vector<const nn::Param*> as_const(Net& net) {
  const auto mutable_params = net.params();
  return {mutable_params.begin(), mutable_params.end()};
}

}  // namespace

GaussianPolicy::GaussianPolicy(const PolicyBinding& binding, std::uint64_t seed)
    : binding_(binding), trunk_(make_trunk(binding, "policy")) {
  binding_.validate();
  const auto n = static_cast<std::size_t>(binding.n);
  mean_head_ = nn::Dense(trunk_features(trunk_), n, "policy.mean");
  log_std_ = nn::Param("policy.log_std", {n});
  Rng rng(seed);
  std::visit([&](auto& t) { t.init(rng); }, trunk_);
  mean_head_.init(rng, kMeanHeadGain);
}

PolicyOutput GaussianPolicy::forward(const Observation& obs) {
  const std::vector<double> features = std::visit([&](auto& t) { return t.forward(obs); }, trunk_);
  PolicyOutput out;
  out.mean = mean_head_.forward(features);
  out.log_std.resize(log_std_.value.size());
  for (std::size_t i = 0; i < out.log_std.size(); ++i) {
    out.log_std[i] = std::clamp(log_std_.value.data[i], kLogStdMin, kLogStdMax);
  }
  nn::check_finite(out.mean, "policy mean");
  return out;
}

void GaussianPolicy::backward(std::span<const double> grad_mean,
                              std::span<const double> grad_log_std) {
  if (grad_log_std.size() != log_std_.grad.size()) {
    throw ShapeMismatch("policy: log_std gradient has wrong size");
  }
  for (std::size_t i = 0; i < grad_log_std.size(); ++i) log_std_.grad[i] += grad_log_std[i];
  const std::vector<double> g = mean_head_.backward(grad_mean);
  std::visit([&](auto& t) { t.backward(g); }, trunk_);
}

std::vector<nn::Param*> GaussianPolicy::params() {
  std::vector<nn::Param*> out;
  std::visit([&](auto& t) { t.collect(out); }, trunk_);
  mean_head_.collect(out);
  out.push_back(&log_std_);
  return out;
}

std::vector<const nn::Param*> GaussianPolicy::params() const {
  return as_const(const_cast<GaussianPolicy&>(*this));
}

void GaussianPolicy::zero_grad() {
  for (nn::Param* p : params()) p->zero_grad();
}

void GaussianPolicy::fill_log_std(double value) {
  std::fill(log_std_.value.data.begin(), log_std_.value.data.end(), value);
  clamp_log_std();
}

void GaussianPolicy::clamp_log_std() {
  for (double& v : log_std_.value.data) v = std::clamp(v, kLogStdMin, kLogStdMax);
}

Critic::Critic(const PolicyBinding& binding, std::uint64_t seed)
    : binding_(binding), trunk_(make_trunk(binding, "critic")) {
  binding_.validate();
  value_head_ = nn::Dense(trunk_features(trunk_), 1, "critic.value");
  Rng rng(seed);
  std::visit([&](auto& t) { t.init(rng); }, trunk_);
  value_head_.init(rng, kValueHeadGain);
}

double Critic::forward(const Observation& obs) {
  const std::vector<double> features = std::visit([&](auto& t) { return t.forward(obs); }, trunk_);
  const double value = value_head_.forward(features)[0];
  if (!std::isfinite(value)) throw NonFiniteValue("non-finite value in critic output");
  return value;
}

void Critic::backward(double grad_value) {
  const std::vector<double> g = value_head_.backward(std::span<const double>(&grad_value, 1));
  std::visit([&](auto& t) { t.backward(g); }, trunk_);
}

std::vector<nn::Param*> Critic::params() {
  std::vector<nn::Param*> out;
  std::visit([&](auto& t) { t.collect(out); }, trunk_);
  value_head_.collect(out);
  return out;
}

std::vector<const nn::Param*> Critic::params() const {
  return as_const(const_cast<Critic&>(*this));
}

void Critic::zero_grad() {
  for (nn::Param* p : params()) p->zero_grad();
}

std::size_t parameter_count(std::span<const nn::Param* const> params) {
  std::size_t total = 0;
  for (const nn::Param* p : params) total += p->value.size();
  return total;
}

std::size_t policy_parameter_count(const PolicyBinding& binding) {
  return parameter_count(GaussianPolicy(binding, 0).params());
}

std::size_t critic_parameter_count(const PolicyBinding& binding) {
  return parameter_count(Critic(binding, 0).params());
}

double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    total += -0.5 * z * z - log_std[i] - half_log_2pi;
  }
  return total;
}

double gaussian_entropy(std::span<const double> log_std) {
  const double per_dim = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  double total = 0.0;
  for (double s : log_std) total += s + per_dim;
  return total;
}

ActionSample sample_action(GaussianPolicy& policy, const Observation& obs, Rng& rng) {
  PolicyOutput out = policy.forward(obs);
  ActionSample sample;
  sample.action.resize(out.mean.size());
  for (std::size_t i = 0; i < out.mean.size(); ++i) {
    sample.action[i] = out.mean[i] + std::exp(out.log_std[i]) * rng.normal();
  }
  sample.log_prob = gaussian_log_prob(out.mean, out.log_std, sample.action);
  sample.mean = std::move(out.mean);
  return sample;
}

namespace {

using nlohmann::json;

json binding_to_json(const PolicyBinding& b) {
  return {{"n", b.n},
          {"m", b.m},
          {"variant", to_string(b.variant)},
          {"layout_version", b.layout_version},
          {"shape",
           {{"hidden", b.shape.hidden},
            {"conv1_channels", b.shape.conv1_channels},
            {"conv2_channels", b.shape.conv2_channels},
            {"side_width", b.shape.side_width}}}};
}

PolicyBinding binding_from_json(const json& j) {
  PolicyBinding b;
  b.n = j.at("n").get<int>();
  b.m = j.at("m").get<int>();
  b.variant = parse_obs_variant(j.at("variant").get<std::string>());
  b.layout_version = j.at("layout_version").get<int>();
  const json& s = j.at("shape");
  b.shape.hidden = s.at("hidden").get<int>();
  b.shape.conv1_channels = s.at("conv1_channels").get<int>();
  b.shape.conv2_channels = s.at("conv2_channels").get<int>();
  b.shape.side_width = s.at("side_width").get<int>();
  return b;
}

json params_to_json(const std::vector<const nn::Param*>& params) {
  json out = json::array();
  for (const nn::Param* p : params) {
    out.push_back({{"name", p->name}, {"shape", p->value.shape}, {"values", p->value.data}});
  }
  return out;
}

void params_from_json(const json& j, const std::vector<nn::Param*>& params,
                      const std::string& source) {
  if (!j.is_array() || j.size() != params.size()) {
    throw DataError(source + ": parameter table does not match the architecture");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    nn::Param& p = *params[k];
    const json& entry = j[k];
    if (entry.at("name").get<std::string>() != p.name) {
      throw DataError(source + ": expected parameter '" + p.name + "', found '" +
                      entry.at("name").get<std::string>() + "'");
    }
    if (entry.at("shape").get<std::vector<std::size_t>>() != p.value.shape) {
      throw ShapeMismatch(source + ": shape mismatch for parameter '" + p.name + "'");
    }
    auto values = entry.at("values").get<std::vector<double>>();
    if (values.size() != p.value.size()) {
      throw ShapeMismatch(source + ": value count mismatch for parameter '" + p.name + "'");
    }
    p.value.data = std::move(values);
    p.value.check_finite(p.name);
  }
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  try {
    json j = json::parse(in);
    if (j.value("format", "") != "sfp-checkpoint") {
      throw DataError(path.string() + ": not a checkpoint file");
    }
    if (j.at("version").get<int>() != kCheckpointFormatVersion) {
      throw VersionMismatch(path.string() + ": unsupported checkpoint version");
    }
    return j;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed checkpoint: " + e.what());
  }
}

}  // namespace

void save_checkpoint(const GaussianPolicy& policy, const Critic& critic,
                     const std::filesystem::path& path) {
  if (!(policy.binding() == critic.binding())) {
    throw DataError("save_checkpoint: policy and critic bindings differ");
  }
  json j = {{"format", "sfp-checkpoint"},
            {"version", kCheckpointFormatVersion},
            {"binding", binding_to_json(policy.binding())},
            {"policy", params_to_json(policy.params())},
            {"critic", params_to_json(critic.params())}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << j.dump() << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

PolicyBinding read_checkpoint_binding(const std::filesystem::path& path) {
  try {
    return binding_from_json(read_json(path).at("binding"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed binding: " + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const json j = read_json(path);
  try {
    const PolicyBinding binding = binding_from_json(j.at("binding"));
    Checkpoint ckpt{GaussianPolicy(binding, 0), Critic(binding, 0)};
    params_from_json(j.at("policy"), ckpt.policy.params(), path.string());
    params_from_json(j.at("critic"), ckpt.critic.params(), path.string());
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed checkpoint: " + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const PolicyBinding& expected) {
  const PolicyBinding stored = read_checkpoint_binding(path);
  if (!(stored == expected)) {
    throw DataError(path.string() + ": checkpoint is bound to n=" + std::to_string(stored.n) +
                    ", m=" + std::to_string(stored.m) + ", variant=" + to_string(stored.variant) +
                    " but n=" + std::to_string(expected.n) + ", m=" +
                    std::to_string(expected.m) + ", variant=" + to_string(expected.variant) +
                    " was requested");
  }
  return load_checkpoint(path);
}

}  // namespace sfp
