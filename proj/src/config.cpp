#include "sfp/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sfp/errors.hpp"

namespace sfp {

namespace {

using nlohmann::json;

void reject_unknown(const json& section, const std::string& where,
                    const std::set<std::string>& allowed) {
  if (!section.is_object()) throw DataError(where + ": expected an object");
  for (const auto& [key, value] : section.items()) {
    if (!allowed.contains(key)) throw DataError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& section, const std::string& where, const char* key, T& out) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError(where + "." + key + ": wrong type");
  }
}

json env_json(const EnvConfig& e) {
  return {{"max_steps", e.max_steps},
          {"reward_norm", to_string(e.reward_norm)},
          {"action_clip", e.action_clip},
          {"freeze_projection", e.freeze_projection}};
}

json train_json(const TrainConfig& t) {
  return {{"gamma", t.gamma},
          {"gae_lambda", t.gae_lambda},
          {"clip_eps", t.clip_eps},
          {"epochs_per_update", t.epochs_per_update},
          {"minibatch_size", t.minibatch_size},
          {"episodes_per_iteration", t.episodes_per_iteration},
          {"iterations", t.iterations},
          {"learning_rate", t.learning_rate},
          {"value_coef", t.value_coef},
          {"entropy_coef", t.entropy_coef},
          {"max_grad_norm", t.max_grad_norm},
          {"reward_scale", t.reward_scale},
          {"normalize_advantages", t.normalize_advantages},
          {"initial_log_std", t.initial_log_std},
          {"seed", t.seed},
          {"workers", t.workers},
          {"eval_episodes", t.eval_episodes}};
}

json network_json(const NetworkShape& s) {
  return {{"hidden", s.hidden},
          {"conv1_channels", s.conv1_channels},
          {"conv2_channels", s.conv2_channels},
          {"side_width", s.side_width}};
}

std::set<std::string> keys_of(const json& j) {
  std::set<std::string> out;
  for (const auto& [key, value] : j.items()) out.insert(key);
  return out;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(source + ": " + e.what());
  }
  RunConfig config;
  reject_unknown(root, source, {"env", "train", "network"});

  if (root.contains("env")) {
    const json& e = root["env"];
    const std::string where = source + ": env";
    reject_unknown(e, where, keys_of(env_json(config.env)));
    read(e, where, "max_steps", config.env.max_steps);
    read(e, where, "action_clip", config.env.action_clip);
    read(e, where, "freeze_projection", config.env.freeze_projection);
    std::string norm = to_string(config.env.reward_norm);
    read(e, where, "reward_norm", norm);
    config.env.reward_norm = parse_reward_norm(norm);
  }
  if (root.contains("train")) {
    const json& t = root["train"];
    const std::string where = source + ": train";
    TrainConfig& c = config.train;
    reject_unknown(t, where, keys_of(train_json(c)));
    read(t, where, "gamma", c.gamma);
    read(t, where, "gae_lambda", c.gae_lambda);
    read(t, where, "clip_eps", c.clip_eps);
    read(t, where, "epochs_per_update", c.epochs_per_update);
    read(t, where, "minibatch_size", c.minibatch_size);
    read(t, where, "episodes_per_iteration", c.episodes_per_iteration);
    read(t, where, "iterations", c.iterations);
    read(t, where, "learning_rate", c.learning_rate);
    read(t, where, "value_coef", c.value_coef);
    read(t, where, "entropy_coef", c.entropy_coef);
    read(t, where, "max_grad_norm", c.max_grad_norm);
    read(t, where, "reward_scale", c.reward_scale);
    read(t, where, "normalize_advantages", c.normalize_advantages);
    read(t, where, "initial_log_std", c.initial_log_std);
    read(t, where, "seed", c.seed);
    read(t, where, "workers", c.workers);
    read(t, where, "eval_episodes", c.eval_episodes);
  }
  if (root.contains("network")) {
    const json& n = root["network"];
    const std::string where = source + ": network";
    NetworkShape& s = config.train.network;
    reject_unknown(n, where, keys_of(network_json(s)));
    read(n, where, "hidden", s.hidden);
    read(n, where, "conv1_channels", s.conv1_channels);
    read(n, where, "conv2_channels", s.conv2_channels);
    read(n, where, "side_width", s.side_width);
  }
  config.env.validate();
  config.train.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.string());
}

std::string to_json(const RunConfig& config) {
  const json j = {{"env", env_json(config.env)},
                  {"train", train_json(config.train)},
                  {"network", network_json(config.train.network)}};
  return j.dump(2);
}

std::string config_hash(const RunConfig& config) { return fnv1a_hex(to_json(config)); }

}  // namespace sfp
