#include "sfp/report.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "sfp/errors.hpp"

namespace sfp {

namespace fs = std::filesystem;

namespace {

constexpr std::array<const char*, 3> kSolverOrder = {"FP", "SFP-MLP", "SFP-CNN"};

std::string fixed(double value, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

double parse_double(const std::string& text, const fs::path& path, const char* field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path.string(), 2, field, "not a number: '" + text + "'");
  }
}

}  // namespace

std::string metrics_header() {
  return "solver,set,episodes,cap,ep_len_mean,ep_len_std,ep_len_max,q90,q10,success_rate,"
         "lp_solves_per_episode,seed,config_hash,instances_hash";
}

std::string format_metrics_row(const MetricsRow& r) {
  std::ostringstream os;
  os << r.solver << ',' << r.set << ',' << r.episodes << ',' << r.cap << ',' << fixed(r.ep_len_mean) << ','
     << fixed(r.ep_len_std) << ',' << fixed(r.ep_len_max) << ',' << fixed(r.q90) << ',' << fixed(r.q10)
     << ',' << fixed(r.success_rate) << ',' << fixed(r.lp_solves_per_episode) << ',' << r.seed << ','
     << r.config_hash << ',' << r.instances_hash;
  return os.str();
}

MetricsRow parse_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string header, line;
  std::getline(in, header);
  if (header != metrics_header()) throw ParseError(path.string(), 1, "header", "unexpected metrics header");
  if (!std::getline(in, line)) throw ParseError(path.string(), 2, "row", "missing metrics row");
  const auto c = split_csv(line);
  if (c.size() != 14) throw ParseError(path.string(), 2, "row", "expected 14 columns");
  MetricsRow r;
  r.solver = c[0];
  r.set = c[1];
  r.episodes = static_cast<int>(parse_double(c[2], path, "episodes"));
  r.cap = static_cast<int>(parse_double(c[3], path, "cap"));
  r.ep_len_mean = parse_double(c[4], path, "ep_len_mean");
  r.ep_len_std = parse_double(c[5], path, "ep_len_std");
  r.ep_len_max = parse_double(c[6], path, "ep_len_max");
  r.q90 = parse_double(c[7], path, "q90");
  r.q10 = parse_double(c[8], path, "q10");
  r.success_rate = parse_double(c[9], path, "success_rate");
  r.lp_solves_per_episode = parse_double(c[10], path, "lp_solves_per_episode");
  try {
    r.seed = std::stoull(c[11]);
  } catch (const std::exception&) {
    throw ParseError(path.string(), 2, "seed", "not an unsigned integer: '" + c[11] + "'");
  }
  r.config_hash = c[12];
  r.instances_hash = c[13];
  return r;
}

MetricsRow make_metrics_row(const EvalResult& result, const std::string& set, int cap, std::uint64_t seed,
                            const std::string& config_hash, const std::string& instances_hash) {
  MetricsRow r;
  r.solver = result.solver;
  r.set = set;
  r.episodes = result.stats.episodes;
  r.cap = cap;
  r.ep_len_mean = result.stats.ep_len_mean;
  r.ep_len_std = result.stats.ep_len_std;
  r.ep_len_max = result.stats.ep_len_max;
  r.q90 = result.stats.q90;
  r.q10 = result.stats.q10;
  r.success_rate = result.stats.success_rate;
  r.lp_solves_per_episode = result.lp_solves_per_episode;
  r.seed = seed;
  r.config_hash = config_hash.empty() ? "-" : config_hash;
  r.instances_hash = instances_hash;
  return r;
}

std::string solver_tag(const std::string& solver) {
  std::string tag = solver;
  std::transform(tag.begin(), tag.end(), tag.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return tag;
}

fs::path write_eval_outputs(const fs::path& run_dir, const EvalResult& result, const MetricsRow& row) {
  const std::string stem = row.set + "_" + solver_tag(row.solver) + ".csv";
  const fs::path logs = run_dir / "logs";
  const fs::path metrics = logs / ("eval_" + stem);
  write_file(metrics, metrics_header() + "\n" + format_metrics_row(row) + "\n");

  std::ostringstream eps;
  eps << "episode,instance,instance_hash,steps,success,lp_solves\n";
  for (std::size_t i = 0; i < result.episodes.size(); ++i) {
    const auto& e = result.episodes[i];
    eps << i << ',' << e.instance << ',' << e.hash << ',' << e.steps << ',' << (e.success ? 1 : 0) << ','
        << e.lp_solves << '\n';
  }
  write_file(logs / ("episodes_" + stem), eps.str());

  const double per_episode =
      result.episodes.empty() ? 0.0 : result.wall_seconds / static_cast<double>(result.episodes.size());
  write_file(logs / ("timing_" + stem),
             "solver,set,episodes,wall_seconds,wall_seconds_per_episode\n" + row.solver + "," + row.set + "," +
                 std::to_string(row.episodes) + "," + fixed(result.wall_seconds, 6) + "," +
                 fixed(per_episode, 6) + "\n");
  return metrics;
}

std::string train_log_header() {
  return "iteration,train_ep_len_mean,train_ep_len_std,eval_ep_len_mean,eval_ep_len_std,"
         "eval_success_rate,mean_return,surrogate,value_loss,entropy,clip_fraction,approx_kl,lp_solves";
}

void write_train_log(const fs::path& path, const TrainLog& log) {
  std::ostringstream os;
  os << train_log_header() << '\n';
  for (const auto& r : log.records) {
    os << r.iteration << ',' << fixed(r.train_ep_len_mean) << ',' << fixed(r.train_ep_len_std) << ','
       << fixed(r.eval_ep_len_mean) << ',' << fixed(r.eval_ep_len_std) << ',' << fixed(r.eval_success_rate)
       << ',' << fixed(r.mean_return, 6) << ',' << fixed(r.surrogate, 8) << ',' << fixed(r.value_loss, 8)
       << ',' << fixed(r.entropy, 6) << ',' << fixed(r.clip_fraction, 6) << ',' << fixed(r.approx_kl, 8)
       << ',' << r.lp_solves << '\n';
  }
  write_file(path, os.str());
}

namespace {

const MetricsRow* find_solver(const std::vector<MetricsRow>& rows, const std::string& solver) {
  for (const auto& r : rows) {
    if (r.solver == solver) return &r;
  }
  return nullptr;
}

struct CompareLine {
  std::string name;
  std::vector<std::string> cells;
};

std::vector<CompareLine> compare_lines(const std::vector<MetricsRow>& rows) {
  using Getter = std::string (*)(const MetricsRow&);
  const std::vector<std::pair<std::string, Getter>> fields = {
      {"EpLenMean", [](const MetricsRow& r) { return fixed(r.ep_len_mean, 2); }},
      {"EpLenStd", [](const MetricsRow& r) { return fixed(r.ep_len_std, 2); }},
      {"EpLenMax", [](const MetricsRow& r) { return fixed(r.ep_len_max, 2); }},
      {"90 Quant", [](const MetricsRow& r) { return fixed(r.q90, 2); }},
      {"10 Quant", [](const MetricsRow& r) { return fixed(r.q10, 2); }},
      {"success_rate", [](const MetricsRow& r) { return fixed(r.success_rate, 4); }},
      {"lp_solves_per_episode", [](const MetricsRow& r) { return fixed(r.lp_solves_per_episode, 2); }},
      {"episodes", [](const MetricsRow& r) { return std::to_string(r.episodes); }},
      {"cap", [](const MetricsRow& r) { return std::to_string(r.cap); }},
      {"seed", [](const MetricsRow& r) { return std::to_string(r.seed); }},
      {"config_hash", [](const MetricsRow& r) { return r.config_hash; }},
  };
  std::vector<CompareLine> out;
  for (const auto& [name, get] : fields) {
    CompareLine line{name, {}};
    for (const char* solver : kSolverOrder) {
      const MetricsRow* r = find_solver(rows, solver);
      line.cells.push_back(r ? get(*r) : "absent");
    }
    out.push_back(std::move(line));
  }
  return out;
}

std::string shared_instances_hash(const std::string& set, const std::vector<MetricsRow>& rows) {
  std::string hash;
  for (const auto& r : rows) {
    if (hash.empty()) {
      hash = r.instances_hash;
    } else if (r.instances_hash != hash) {
      throw DataError("compare: set '" + set + "' was evaluated on different instances (" + hash + " vs " +
                      r.instances_hash + " for " + r.solver + ")");
    }
  }
  return hash;
}

}  // namespace

std::string render_compare_csv(const std::string& set, const std::vector<MetricsRow>& rows) {
  const std::string hash = shared_instances_hash(set, rows);
  std::ostringstream os;
  os << "metric";
  for (const char* solver : kSolverOrder) os << ',' << solver;
  os << '\n';
  for (const auto& line : compare_lines(rows)) {
    os << line.name;
    for (const auto& c : line.cells) os << ',' << c;
    os << '\n';
  }
  os << "instances_hash";
  for (std::size_t i = 0; i < kSolverOrder.size(); ++i) os << ',' << hash;
  os << '\n';
  return os.str();
}

std::string render_compare_text(const std::string& set, const std::vector<MetricsRow>& rows) {
  const std::string hash = shared_instances_hash(set, rows);
  const auto lines = compare_lines(rows);
  std::size_t name_width = 6;
  std::vector<std::size_t> widths(kSolverOrder.size());
  for (std::size_t j = 0; j < kSolverOrder.size(); ++j) widths[j] = std::string(kSolverOrder[j]).size();
  for (const auto& line : lines) {
    name_width = std::max(name_width, line.name.size());
    for (std::size_t j = 0; j < line.cells.size(); ++j) widths[j] = std::max(widths[j], line.cells[j].size());
  }
  auto pad_left = [](const std::string& s, std::size_t w) { return std::string(w - s.size(), ' ') + s; };
  auto pad_right = [](const std::string& s, std::size_t w) { return s + std::string(w - s.size(), ' '); };
  std::ostringstream os;
  os << "set: " << set << "\ninstances_hash: " << hash << "\n\n";
  os << pad_right("metric", name_width);
  for (std::size_t j = 0; j < kSolverOrder.size(); ++j) os << "  " << pad_left(kSolverOrder[j], widths[j]);
  os << '\n';
  for (const auto& line : lines) {
    os << pad_right(line.name, name_width);
    for (std::size_t j = 0; j < line.cells.size(); ++j) os << "  " << pad_left(line.cells[j], widths[j]);
    os << '\n';
  }
  return os.str();
}

std::vector<fs::path> compare_run(const fs::path& run_dir) {
  const fs::path logs = run_dir / "logs";
  if (!fs::is_directory(logs)) throw DataError("compare: no logs directory in " + run_dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(logs)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("eval_") && entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("compare: no eval_*.csv files in " + logs.string());

  std::map<std::string, std::vector<MetricsRow>> by_set;
  for (const auto& f : files) {
    MetricsRow row = parse_metrics_csv(f);
    auto& rows = by_set[row.set];
    if (find_solver(rows, row.solver)) {
      throw DataError("compare: duplicate " + row.solver + " results for set '" + row.set + "'");
    }
    rows.push_back(std::move(row));
  }
  std::vector<fs::path> written;
  for (const auto& [set, rows] : by_set) {
    const fs::path csv = run_dir / "reports" / ("compare_" + set + ".csv");
    const fs::path txt = run_dir / "reports" / ("compare_" + set + ".txt");
    write_file(csv, render_compare_csv(set, rows));
    write_file(txt, render_compare_text(set, rows));
    written.push_back(csv);
    written.push_back(txt);
  }
  return written;
}

}  // namespace sfp
