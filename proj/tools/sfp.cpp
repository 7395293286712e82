#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>

#include "sfp/config.hpp"
#include "sfp/errors.hpp"
#include "sfp/evaluation.hpp"
#include "sfp/feasibility_pump.hpp"
#include "sfp/instance.hpp"
#include "sfp/report.hpp"
#include "sfp_oracles/checks.hpp"

namespace fs = std::filesystem;
using namespace sfp;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

std::pair<int, int> parse_size(const std::string& text) {
  static const std::regex pattern(R"((\d+)x(\d+))");
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) throw CLI::ValidationError("--size", "expected NxM, got '" + text + "'");
  return {std::stoi(m[1]), std::stoi(m[2])};
}

std::string size_tag(int n, int m) { return std::to_string(n) + "x" + std::to_string(m); }

std::string default_set_name(const fs::path& instances) {
  fs::path p = instances;
  if (!p.has_filename()) p = p.parent_path();
  return fs::is_directory(p) ? p.filename().string() : p.stem().string();
}

void check_size(const std::vector<InstanceEntry>& entries, const std::optional<std::pair<int, int>>& size) {
  if (!size) return;
  for (const auto& e : entries) {
    if (e.instance->n != size->first || e.instance->m != size->second) {
      throw DataError("instance " + e.name + " is " + size_tag(e.instance->n, e.instance->m) + ", expected " +
                      size_tag(size->first, size->second));
    }
  }
}

void print_stats(const std::string& label, const EvalResult& r) {
  std::printf("%s: episodes %d  EpLenMean %.2f  EpLenStd %.2f  EpLenMax %.0f  q90 %.2f  q10 %.2f  success %.3f"
              "  lp/episode %.2f\n",
              label.c_str(), r.stats.episodes, r.stats.ep_len_mean, r.stats.ep_len_std, r.stats.ep_len_max,
              r.stats.q90, r.stats.q10, r.stats.success_rate, r.lp_solves_per_episode);
}

int cmd_gen(const std::vector<std::string>& sizes, int count, const std::string& kind_text, std::uint64_t seed,
            const fs::path& out) {
  const ProblemKind kind = parse_problem_kind(kind_text);
  for (const auto& s : sizes) {
    const auto [n, m] = parse_size(s);
    const fs::path dir = sizes.size() == 1 ? out : out / (size_tag(n, m) + "_" + to_string(kind));
    fs::create_directories(dir);
    const std::uint64_t size_seed = derive_seed(seed, static_cast<std::uint64_t>(n) * 1000 + static_cast<std::uint64_t>(m));
    for (int i = 0; i < count; ++i) {
      const MipInstance inst = generate(derive_seed(size_seed, static_cast<std::uint64_t>(i)), n, m, kind);
      char name[64];
      std::snprintf(name, sizeof name, "%s_%s_%04d%s", to_string(kind).c_str(), size_tag(n, m).c_str(), i,
                    kInstanceExtension);
      save_instance(inst, dir / name);
    }
    std::printf("wrote %d %s instances of size %s to %s\n", count, to_string(kind).c_str(), size_tag(n, m).c_str(),
                dir.string().c_str());
  }
  return kOk;
}

int cmd_fp(const fs::path& instances, int cap, std::uint64_t seed, const std::optional<fs::path>& trace_dir) {
  const auto entries = load_instances(instances);
  if (trace_dir) fs::create_directories(*trace_dir);
  std::vector<int> lengths;
  long lp = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    FpOptions options;
    options.max_steps = cap;
    options.seed = derive_seed(seed, i);
    const FpResult r = run_fp(*entries[i].instance, options);
    lengths.push_back(r.steps_taken);
    lp += r.lp_solves;
    std::printf("%s steps %d %s perturbations %d lp_solves %d\n", entries[i].name.c_str(), r.steps_taken,
                r.terminated_by == FpTermination::kFoundFeasible ? "feasible" : "step-limit", r.perturbation_count,
                r.lp_solves);
    if (trace_dir) {
      std::ofstream out(*trace_dir / (fs::path(entries[i].name).stem().string() + ".jsonl"), std::ios::binary);
      if (!out) throw DataError("cannot write trace into " + trace_dir->string());
      write_trace_jsonl(r, out);
    }
  }
  EvalResult summary;
  summary.stats = summarize_lengths(lengths, cap);
  summary.lp_solves_per_episode = static_cast<double>(lp) / static_cast<double>(entries.size());
  print_stats("FP", summary);
  return kOk;
}

struct TrainArgs {
  std::string variant = "mlp";
  std::string size;
  fs::path config;
  fs::path train_dir;
  fs::path val_dir;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<int> workers;
};

int cmd_train(const TrainArgs& args) {
  RunConfig config = args.config.empty() ? RunConfig{} : load_run_config(args.config);
  if (args.seed) config.train.seed = *args.seed;
  if (args.iterations) config.train.iterations = *args.iterations;
  if (args.workers) config.train.workers = *args.workers;
  const ObsVariant variant = parse_obs_variant(args.variant);
  config.env.variant = variant;
  config.train.validate();
  config.env.validate();

  std::optional<std::pair<int, int>> size;
  if (!args.size.empty()) size = parse_size(args.size);
  const auto train_set = load_instances(args.train_dir);
  const auto val_set = load_instances(args.val_dir);
  check_size(train_set, size);
  check_size(val_set, size);
  const std::string train_hash = instance_set_hash(train_set);
  const std::string val_hash = instance_set_hash(val_set);
  for (const auto& a : train_set) {
    for (const auto& b : val_set) {
      if (a.hash == b.hash) throw DataError("training and validation sets share instance " + a.name);
    }
  }

  const std::string tag = to_string(variant);
  const fs::path ckpt_dir = args.out / "checkpoints";
  const fs::path log_dir = args.out / "logs";
  fs::create_directories(ckpt_dir);
  fs::create_directories(log_dir);
  const fs::path log_path = log_dir / ("train_" + tag + ".csv");

  const std::string hash = config_hash(config);
  nlohmann::ordered_json meta = {
      {"variant", tag},
      {"config", nlohmann::json::parse(to_json(config))},
      {"config_hash", hash},
      {"seed", config.train.seed},
      {"advantage_normalization", config.train.normalize_advantages},
      {"projection_norm", "L1"},
      {"size", size_tag(train_set.front().instance->n, train_set.front().instance->m)},
      {"train_instances", {{"path", args.train_dir.string()}, {"count", train_set.size()}, {"hash", train_hash}}},
      {"val_instances", {{"path", args.val_dir.string()}, {"count", val_set.size()}, {"hash", val_hash}}},
  };
  auto write_meta = [&] {
    std::ofstream out(log_dir / ("train_" + tag + "_meta.json"), std::ios::binary);
    out << meta.dump(2) << '\n';
  };
  write_meta();

  TrainLog partial;
  auto on_iteration = [&](const IterationRecord& r) {
    partial.records.push_back(r);
    write_train_log(log_path, partial);
    std::printf("iter %3d  train EpLenMean %7.2f  val EpLenMean %7.2f  val success %.3f  return %10.2f  kl %.4f\n",
                r.iteration, r.train_ep_len_mean, r.eval_ep_len_mean, r.eval_success_rate, r.mean_return,
                r.approx_kl);
    std::fflush(stdout);
  };
  const TrainResult result =
      train(to_pool(train_set), to_pool(val_set), variant, config.env, config.train, on_iteration);
  write_train_log(log_path, result.log);
  save_checkpoint(result.best.policy, result.best.critic, ckpt_dir / (tag + "_best.json"));
  save_checkpoint(result.final_state.policy, result.final_state.critic, ckpt_dir / (tag + "_final.json"));
  meta["best_iteration"] = result.best_iteration;
  write_meta();
  std::printf("best iteration %d; checkpoints in %s\n", result.best_iteration, ckpt_dir.string().c_str());
  return kOk;
}

struct EvalArgs {
  std::string solver = "fp";
  fs::path instances;
  int cap = 100;
  std::uint64_t seed = 0;
  fs::path run;
  std::string set;
  fs::path config;
  bool deterministic = false;
  int workers = 1;
};

int cmd_eval(const EvalArgs& args) {
  const auto entries = load_instances(args.instances);
  const std::string set = args.set.empty() ? default_set_name(args.instances) : args.set;
  EvalOptions options;
  options.cap = args.cap;
  options.seed = args.seed;
  options.deterministic = args.deterministic;
  options.workers = args.workers;
  EvalResult result;
  std::string hash;
  if (args.solver == "fp") {
    result = evaluate_fp(entries, options);
  } else {
    const fs::path ckpt_path = args.solver;
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const ObsVariant variant = ckpt.policy.binding().variant;
    const fs::path meta_path =
        ckpt_path.parent_path().parent_path() / "logs" / ("train_" + to_string(variant) + "_meta.json");
    RunConfig config;
    if (!args.config.empty()) {
      config = load_run_config(args.config);
    } else if (fs::exists(meta_path)) {
      std::ifstream in(meta_path);
      const auto meta = nlohmann::json::parse(in, nullptr, false);
      if (meta.is_discarded() || !meta.contains("config")) throw DataError("malformed " + meta_path.string());
      config = parse_run_config(meta.at("config").dump(), meta_path.string());
    }
    config.env.variant = variant;
    hash = config_hash(config);
    result = evaluate_policy(ckpt.policy, entries, config.env, options);
  }
  print_stats(result.solver + " on " + set, result);
  if (!args.run.empty()) {
    const MetricsRow row = make_metrics_row(result, set, args.cap, args.seed, hash, instance_set_hash(entries));
    const fs::path path = write_eval_outputs(args.run, result, row);
    std::printf("wrote %s\n", path.string().c_str());
  }
  return kOk;
}

int cmd_compare(const fs::path& run) {
  for (const auto& path : compare_run(run)) {
    std::printf("wrote %s\n", path.string().c_str());
    if (path.extension() == ".txt") {
      std::ifstream in(path);
      std::cout << in.rdbuf() << '\n';
    }
  }
  return kOk;
}

int cmd_selftest(bool full, std::uint64_t seed) {
  struct Suite {
    const char* name;
    std::function<suite::CheckResult()> run;
  };
  const std::vector<Suite> suites = {
      {"lp-oracle", [&] { return suite::lp_equivalence(200, seed); }},
      {"projection", [&] { return suite::projection_properties(100, seed + 1); }},
      {"generator", [&] { return suite::generator_soundness(full ? 10000 : 1000, full ? 1000 : 50, seed + 2); }},
      {"fp-regime", [&] { return suite::fp_regime(100, seed + 3); }},
      {"gradients", [&] { return suite::gradient_suite(full ? 20 : 3, seed + 4); }},
      {"ppo-mechanics", [&] { return suite::ppo_mechanics(seed + 5); }},
  };
  bool all = true;
  for (const auto& s : suites) {
    const auto start = std::chrono::steady_clock::now();
    const suite::CheckResult r = s.run();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %-14s %s (%.1fs)\n", r.pass ? "PASS" : "FAIL", s.name, r.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && r.pass;
  }
  return all ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smart feasibility pump: instance generation, FP baseline, PPO training and evaluation"};
  app.require_subcommand(1);

  std::vector<std::string> sizes;
  int gen_count = 100;
  std::string kind = "ip";
  std::uint64_t gen_seed = 0;
  fs::path gen_out;
  auto* gen = app.add_subcommand("gen", "Generate random instances");
  gen->add_option("--size", sizes, "Instance size NxM (n variables, m constraints); repeatable")->required();
  gen->add_option("--count", gen_count, "Instances per size")->check(CLI::PositiveNumber);
  gen->add_option("--kind", kind, "ip or mip")->check(CLI::IsMember({"ip", "mip", "IP", "MIP"}));
  gen->add_option("--seed", gen_seed, "Master seed");
  gen->add_option("--out", gen_out, "Output directory")->required();

  fs::path fp_instances;
  int fp_cap = 100;
  std::uint64_t fp_seed = 0;
  std::optional<fs::path> fp_trace;
  auto* fp = app.add_subcommand("fp", "Run the classic feasibility pump");
  fp->add_option("--instances", fp_instances, "Instance file or directory")->required();
  fp->add_option("--cap", fp_cap, "Step cap")->check(CLI::PositiveNumber);
  fp->add_option("--seed", fp_seed, "Perturbation seed");
  fp->add_option("--trace", fp_trace, "Directory for per-instance JSONL traces");

  TrainArgs targs;
  auto* tr = app.add_subcommand("train", "Train an SFP policy with PPO");
  tr->add_option("--variant", targs.variant, "mlp or cnn")->check(CLI::IsMember({"mlp", "cnn"}));
  tr->add_option("--size", targs.size, "Expected instance size NxM");
  tr->add_option("--config", targs.config, "JSON run configuration")->check(CLI::ExistingFile);
  tr->add_option("--train", targs.train_dir, "Training instances")->required();
  tr->add_option("--val", targs.val_dir, "Validation instances")->required();
  tr->add_option("--out", targs.out, "Run directory")->required();
  tr->add_option("--seed", targs.seed, "Override train.seed");
  tr->add_option("--iterations", targs.iterations, "Override train.iterations")->check(CLI::PositiveNumber);
  tr->add_option("--workers", targs.workers, "Override train.workers")->check(CLI::PositiveNumber);

  EvalArgs eargs;
  auto* ev = app.add_subcommand("eval", "Evaluate FP or a checkpoint on an instance set");
  ev->add_option("--solver", eargs.solver, "'fp' or a checkpoint path")->required();
  ev->add_option("--instances", eargs.instances, "Instance file or directory")->required();
  ev->add_option("--cap", eargs.cap, "Step cap")->check(CLI::PositiveNumber);
  ev->add_option("--seed", eargs.seed, "Evaluation seed");
  ev->add_option("--run", eargs.run, "Run directory for metric CSVs");
  ev->add_option("--set", eargs.set, "Set name used in file names (default: instance directory name)");
  ev->add_option("--config", eargs.config, "JSON run configuration (default: the training run's resolved config)")->check(CLI::ExistingFile);
  ev->add_flag("--deterministic", eargs.deterministic, "Act with the policy mean instead of sampling");
  ev->add_option("--workers", eargs.workers, "Worker threads")->check(CLI::PositiveNumber);

  fs::path cmp_run;
  auto* cmp = app.add_subcommand("compare", "Build comparison tables from a run directory");
  cmp->add_option("run", cmp_run, "Run directory")->required();

  bool full = false;
  std::uint64_t self_seed = 1;
  auto* self = app.add_subcommand("selftest", "Run the oracle suites");
  self->add_flag("--full", full, "Use the full sample sizes (minutes)");
  self->add_option("--seed", self_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen(sizes, gen_count, kind, gen_seed, gen_out);
    if (*fp) return cmd_fp(fp_instances, fp_cap, fp_seed, fp_trace);
    if (*tr) return cmd_train(targs);
    if (*ev) return cmd_eval(eargs);
    if (*cmp) return cmd_compare(cmp_run);
    if (*self) return cmd_selftest(full, self_seed);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kNumerical;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
