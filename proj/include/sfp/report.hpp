#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sfp/evaluation.hpp"
#include "sfp/ppo.hpp"

namespace sfp {

// One row of a metrics table, as stored in logs/eval_<set>_<solver>.csv.
struct MetricsRow {
  std::string solver;
  std::string set;
  int episodes = 0;
  int cap = 0;
  double ep_len_mean = 0.0;
  double ep_len_std = 0.0;
  double ep_len_max = 0.0;
  double q90 = 0.0;
  double q10 = 0.0;
  double success_rate = 0.0;
  double lp_solves_per_episode = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;  // "-" for FP
  std::string instances_hash;
};

std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);
MetricsRow parse_metrics_csv(const std::filesystem::path& path);

MetricsRow make_metrics_row(const EvalResult& result, const std::string& set, int cap,
                            std::uint64_t seed, const std::string& config_hash,
                            const std::string& instances_hash);

// File-name friendly solver tag: "fp", "sfp-mlp", "sfp-cnn".
std::string solver_tag(const std::string& solver);

// Writes logs/eval_<set>_<tag>.csv, logs/episodes_<set>_<tag>.csv and the
// wall-clock sidecar logs/timing_<set>_<tag>.csv under run_dir. The first two
// are deterministic given the seeds. Returns the metrics file path.
std::filesystem::path write_eval_outputs(const std::filesystem::path& run_dir, const EvalResult& result,
                                         const MetricsRow& row);

std::string train_log_header();
void write_train_log(const std::filesystem::path& path, const TrainLog& log);

// Reads every logs/eval_*.csv under run_dir and writes
// reports/compare_<set>.csv and reports/compare_<set>.txt for each set.
// Throws DataError if two solvers of one set were evaluated on different
// instance sets. Returns the written report paths.
std::vector<std::filesystem::path> compare_run(const std::filesystem::path& run_dir);

std::string render_compare_csv(const std::string& set, const std::vector<MetricsRow>& rows);
std::string render_compare_text(const std::string& set, const std::vector<MetricsRow>& rows);

}  // namespace sfp
