#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "sfp/config.hpp"
#include "sfp/errors.hpp"
#include "sfp/evaluation.hpp"
#include "sfp/report.hpp"

using namespace sfp;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sfp_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<InstanceEntry> write_set(const fs::path& dir, int count, std::uint64_t seed) {
  fs::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    save_instance(generate(derive_seed(seed, static_cast<std::uint64_t>(i)), 5, 6, ProblemKind::kIP),
                  dir / ("i" + std::to_string(i) + ".inst"));
  }
  return load_instances(dir);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("config parsing fills defaults and rejects unknown keys") {
  const RunConfig c = parse_run_config(R"({"train": {"iterations": 7, "gamma": 0.9}, "env": {"max_steps": 50}})");
  CHECK(c.train.iterations == 7);
  CHECK(c.train.gamma == 0.9);
  CHECK(c.train.learning_rate == TrainConfig{}.learning_rate);
  CHECK(c.env.max_steps == 50);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"train": {"itterations": 7}})"), doctest::Contains("itterations"),
                       DataError);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"optimizer": {}})"), doctest::Contains("optimizer"), DataError);
  CHECK_THROWS_AS(parse_run_config(R"({"train": {"iterations": "many"}})"), DataError);
  CHECK_THROWS_AS(parse_run_config(R"({"train": {"iterations": 0}})"), DataError);
  CHECK_THROWS_AS(parse_run_config("{"), DataError);
}

TEST_CASE("config hash is canonical") {
  const RunConfig a = parse_run_config(R"({"train": {"gamma": 0.9, "iterations": 7}})");
  const RunConfig b = parse_run_config(R"({"train": {"iterations": 7, "gamma": 0.9}})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(RunConfig{}));
  CHECK(config_hash(parse_run_config(to_json(a))) == config_hash(a));
}

TEST_CASE("instance directories load in name order") {
  const fs::path dir = fresh_dir("load");
  const auto set = write_set(dir, 4, 1);
  REQUIRE(set.size() == 4);
  for (std::size_t i = 1; i < set.size(); ++i) CHECK(set[i - 1].name < set[i].name);
  std::ofstream(dir / "notes.txt") << "ignored";
  CHECK(load_instances(dir).size() == 4);
  CHECK_THROWS_AS(load_instances(dir / "missing"), DataError);
  CHECK_THROWS_AS(load_instances(fresh_dir("empty")), DataError);
}

TEST_CASE("evaluation is seed-determined and worker independent") {
  const auto set = write_set(fresh_dir("eval"), 6, 2);
  EvalOptions o;
  o.seed = 5;
  const EvalResult a = evaluate_fp(set, o);
  o.workers = 3;
  const EvalResult b = evaluate_fp(set, o);
  REQUIRE(a.episodes.size() == 6);
  for (std::size_t i = 0; i < a.episodes.size(); ++i) CHECK(a.episodes[i].steps == b.episodes[i].steps);
  CHECK(a.stats.ep_len_mean == b.stats.ep_len_mean);

  PolicyBinding binding;
  binding.n = 5;
  binding.m = 6;
  GaussianPolicy policy(binding, 3);
  o.cap = 5;
  const EvalResult p1 = evaluate_policy(policy, set, {}, o);
  o.workers = 1;
  const EvalResult p2 = evaluate_policy(policy, set, {}, o);
  for (std::size_t i = 0; i < p1.episodes.size(); ++i) CHECK(p1.episodes[i].steps == p2.episodes[i].steps);
  CHECK(p1.solver == "SFP-MLP");
  CHECK(p1.stats.ep_len_max <= 5);
}

TEST_CASE("evaluation rejects a checkpoint of another size") {
  const auto set = write_set(fresh_dir("mismatch"), 2, 3);
  PolicyBinding binding;
  binding.n = 7;
  binding.m = 9;
  GaussianPolicy policy(binding, 1);
  CHECK_THROWS_AS(evaluate_policy(policy, set, {}, {}), DataError);
  CHECK_THROWS_AS(evaluate_fp({}, {}), DataError);
}

TEST_CASE("metrics rows round-trip through CSV") {
  MetricsRow r;
  r.solver = "SFP-CNN";
  r.set = "test";
  r.episodes = 100;
  r.cap = 100;
  r.ep_len_mean = 12.3456;
  r.ep_len_std = 4.5;
  r.ep_len_max = 100;
  r.q90 = 30.25;
  r.q10 = 1;
  r.success_rate = 0.97;
  r.lp_solves_per_episode = 2;
  r.seed = 0xffffffffffffffffULL;
  r.config_hash = "abc";
  r.instances_hash = "def";
  const fs::path dir = fresh_dir("csv");
  std::ofstream(dir / "m.csv") << metrics_header() << '\n' << format_metrics_row(r) << '\n';
  const MetricsRow back = parse_metrics_csv(dir / "m.csv");
  CHECK(format_metrics_row(back) == format_metrics_row(r));
  std::ofstream(dir / "bad.csv") << "solver\n";
  CHECK_THROWS_AS(parse_metrics_csv(dir / "bad.csv"), ParseError);
}

TEST_CASE("compare marks absent cells, is byte-stable and refuses mixed sets") {
  const fs::path run = fresh_dir("compare");
  const auto set = write_set(run / "instances", 3, 4);
  EvalOptions o;
  const EvalResult fp = evaluate_fp(set, o);
  write_eval_outputs(run, fp, make_metrics_row(fp, "small", o.cap, o.seed, "", instance_set_hash(set)));
  const auto paths = compare_run(run);
  REQUIRE(paths.size() == 2);
  const std::string csv = slurp(paths[0]);
  const std::string txt = slurp(paths[1]);
  CHECK(csv.find("absent") != std::string::npos);
  CHECK(csv.rfind("metric,FP,SFP-MLP,SFP-CNN\n", 0) == 0);
  CHECK(txt.find(instance_set_hash(set)) != std::string::npos);
  compare_run(run);
  CHECK(slurp(paths[0]) == csv);
  CHECK(slurp(paths[1]) == txt);

  EvalResult other = fp;
  other.solver = "SFP-MLP";
  write_eval_outputs(run, other, make_metrics_row(other, "small", o.cap, o.seed, "h", "different"));
  CHECK_THROWS_AS(compare_run(run), DataError);
}
