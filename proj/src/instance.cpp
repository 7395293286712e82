#include "sfp/instance.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "sfp/errors.hpp"
#include "sfp/rng.hpp"

namespace sfp {

std::string to_string(ProblemKind kind) {
  return kind == ProblemKind::kIP ? "IP" : "MIP";
}

ProblemKind parse_problem_kind(const std::string& text) {
  if (text == "IP" || text == "ip") return ProblemKind::kIP;
  if (text == "MIP" || text == "mip") return ProblemKind::kMIP;
  throw DataError("unknown problem kind '" + text + "' (expected IP or MIP)");
}

Matrix MipInstance::constraint_matrix() const {
  Matrix out(static_cast<std::size_t>(m), static_cast<std::size_t>(n));
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out(i, j) = coef(i, j);
  }
  return out;
}

std::vector<double> MipInstance::rhs() const { return {b.begin(), b.end()}; }

std::vector<double> MipInstance::lower_bounds() const {
  return std::vector<double>(static_cast<std::size_t>(n), lower_bound);
}

std::vector<double> MipInstance::upper_bounds() const {
  return std::vector<double>(static_cast<std::size_t>(n), upper_bound);
}

void MipInstance::validate() const {
  const auto un = static_cast<std::size_t>(n);
  const auto um = static_cast<std::size_t>(m);
  if (n < 1 || m < 1) throw DataError("instance: n and m must be positive");
  if (a.size() != un * um) throw ShapeMismatch("instance: A must have m*n entries");
  if (b.size() != um) throw ShapeMismatch("instance: b must have m entries");
  if (c.size() != un) throw ShapeMismatch("instance: c must have n entries");
  if (int_mask.size() != un) throw ShapeMismatch("instance: int_mask must have n entries");
  if (!witness.empty() && witness.size() != un) {
    throw ShapeMismatch("instance: witness must be empty or have n entries");
  }
  if (lower_bound > upper_bound) throw DataError("instance: lb exceeds ub");
  for (int v : int_mask) {
    if (v != 0 && v != 1) throw DataError("instance: int_mask entries must be 0 or 1");
  }
  if (kind == ProblemKind::kIP &&
      std::any_of(int_mask.begin(), int_mask.end(), [](int v) { return v == 0; })) {
    throw DataError("instance: IP kind requires every variable to be integral");
  }
  if (!witness.empty()) {
    for (int i = 0; i < m; ++i) {
      long long activity = 0;
      for (int j = 0; j < n; ++j) activity += static_cast<long long>(coef(i, j)) * witness[j];
      if (activity > b[i]) throw DataError("instance: witness violates row " + std::to_string(i));
    }
    for (int v : witness) {
      if (v < lower_bound || v > upper_bound) {
        throw DataError("instance: witness lies outside the box");
      }
    }
  }
}

std::string generator_invariant_violation(const MipInstance& inst) {
  try {
    inst.validate();
  } catch (const Error& e) {
    return e.what();
  }
  for (int v : inst.a) {
    if (v < -10 || v > 10) return "A entry outside [-10, 10]";
  }
  for (int v : inst.c) {
    if (v < -10 || v > 10) return "c entry outside [-10, 10]";
  }
  if (std::none_of(inst.b.begin(), inst.b.end(), [](int v) { return v < 0; })) {
    return "origin is feasible (no b_i < 0)";
  }
  if (std::none_of(inst.int_mask.begin(), inst.int_mask.end(), [](int v) { return v == 1; })) {
    return "no integral variable";
  }
  if (inst.witness.empty()) return "missing witness";
  for (int v : inst.witness) {
    if (v < 1 || v > 10) return "witness entry outside [1, 10]";
  }
  for (int i = 0; i < inst.m; ++i) {
    long long activity = 0;
    for (int j = 0; j < inst.n; ++j) {
      activity += static_cast<long long>(inst.coef(i, j)) * inst.witness[j];
    }
    const long long slack = inst.b[i] - activity;
    if (slack < 1 || slack > 10) return "b - A xi outside [1, 10] in row " + std::to_string(i);
  }
  if (inst.lower_bound != kDefaultLowerBound || inst.upper_bound != kDefaultUpperBound) {
    return "box differs from [-20, 20]";
  }
  return {};
}

bool relaxation_is_bounded(const MipInstance& inst) {
  // max +-d_j over the recession cone cut by the unit box is zero for every
  // coordinate exactly when the cone is trivial.
  DenseLp lp;
  lp.row_matrix = inst.constraint_matrix();
  lp.rhs.assign(static_cast<std::size_t>(inst.m), 0.0);
  lp.lower_bounds.assign(static_cast<std::size_t>(inst.n), -1.0);
  lp.upper_bounds.assign(static_cast<std::size_t>(inst.n), 1.0);
  for (int j = 0; j < inst.n; ++j) {
    for (double sign : {-1.0, 1.0}) {
      lp.objective.assign(static_cast<std::size_t>(inst.n), 0.0);
      lp.objective[static_cast<std::size_t>(j)] = sign;
      const LpOutcome outcome = solve_lp(lp);
      const auto* optimal = std::get_if<LpOptimal>(&outcome);
      if (optimal == nullptr || optimal->objective_value < -1e-9) return false;
    }
  }
  return true;
}

MipInstance generate(std::uint64_t seed, int n, int m, ProblemKind kind,
                     const GeneratorOptions& options) {
  if (n < 1 || m < 1) throw DataError("generate: n and m must be at least 1");
  constexpr int kRejectionLimit = 10000;
  Rng rng(seed);
  const auto un = static_cast<std::size_t>(n);
  const auto um = static_cast<std::size_t>(m);

  for (int attempt = 0; attempt < kRejectionLimit; ++attempt) {
    MipInstance inst;
    inst.n = n;
    inst.m = m;
    inst.kind = kind;
    inst.seed = seed;
    inst.a.resize(un * um);
    for (int& v : inst.a) v = static_cast<int>(rng.uniform_int(-10, 10));
    inst.witness.resize(un);
    for (int& v : inst.witness) v = static_cast<int>(rng.uniform_int(1, 10));
    inst.b.resize(um);
    for (int i = 0; i < m; ++i) {
      int activity = 0;
      for (int j = 0; j < n; ++j) activity += inst.coef(i, j) * inst.witness[j];
      inst.b[i] = activity + static_cast<int>(rng.uniform_int(1, 10));
    }
    inst.int_mask.assign(un, 1);
    if (kind == ProblemKind::kMIP) {
      do {
        for (int& v : inst.int_mask) v = static_cast<int>(rng.uniform_int(0, 1));
      } while (std::none_of(inst.int_mask.begin(), inst.int_mask.end(),
                            [](int v) { return v == 1; }));
    }
    inst.c.resize(un);
    for (int& v : inst.c) v = static_cast<int>(rng.uniform_int(-10, 10));

    if (std::none_of(inst.b.begin(), inst.b.end(), [](int v) { return v < 0; })) continue;
    if (options.require_bounded_relaxation && !relaxation_is_bounded(inst)) continue;
    return inst;
  }
  throw RejectionLimitExceeded("generate: no acceptable instance after " +
                               std::to_string(kRejectionLimit) + " draws (n=" +
                               std::to_string(n) + ", m=" + std::to_string(m) + ")");
}

std::vector<double> residual(const MipInstance& inst, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(inst.n)) {
    throw ShapeMismatch("point has " + std::to_string(x.size()) + " entries, instance has n=" +
                        std::to_string(inst.n));
  }
  std::vector<double> out(static_cast<std::size_t>(inst.m));
  for (int i = 0; i < inst.m; ++i) {
    double activity = 0.0;
    for (int j = 0; j < inst.n; ++j) activity += inst.coef(i, j) * x[j];
    out[i] = activity - inst.b[i];
  }
  return out;
}

FeasibilityReport check(const MipInstance& inst, std::span<const double> x,
                        double feas_tol, double int_tol) {
  FeasibilityReport report;
  for (double r : residual(inst, x)) report.constraint_violation += std::max(0.0, r);
  for (int j = 0; j < inst.n; ++j) {
    report.constraint_violation += std::max(0.0, inst.lower_bound - x[j]);
    report.constraint_violation += std::max(0.0, x[j] - inst.upper_bound);
    if (inst.int_mask[j] == 1) {
      report.integrality_violation =
          std::max(report.integrality_violation, std::abs(x[j] - std::round(x[j])));
    }
  }
  report.feasible = report.constraint_violation <= feas_tol &&
                    report.integrality_violation <= int_tol;
  return report;
}

std::vector<double> round_partial(std::span<const double> x, std::span<const int> int_mask) {
  if (x.size() != int_mask.size()) throw ShapeMismatch("round_partial: length mismatch");
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (int_mask[j] != 0) out[j] = std::round(out[j]);
  }
  return out;
}

DenseLp relaxation(const MipInstance& inst) {
  DenseLp lp;
  lp.row_matrix = inst.constraint_matrix();
  lp.rhs = inst.rhs();
  lp.objective.assign(inst.c.begin(), inst.c.end());
  lp.lower_bounds = inst.lower_bounds();
  lp.upper_bounds = inst.upper_bounds();
  return lp;
}

std::vector<double> project_onto_relaxation(const MipInstance& inst,
                                            std::span<const double> anchor) {
  return project_l1(inst.constraint_matrix(), inst.rhs(), inst.lower_bounds(),
                    inst.upper_bounds(), anchor);
}

namespace {

void write_ints(std::ostream& out, const char* key, const std::vector<int>& values) {
  out << key << ':';
  for (int v : values) out << ' ' << v;
  out << '\n';
}

struct FieldLine {
  int line = 0;
  std::vector<long long> values;
};

std::vector<long long> parse_ints(const std::string& text, const std::string& source,
                                  int line, const std::string& key) {
  std::vector<long long> values;
  std::istringstream tokens(text);
  std::string token;
  while (tokens >> token) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw ParseError(source, line, key, "expected an integer, got '" + token + "'");
    }
    values.push_back(v);
  }
  return values;
}

}  // namespace

void write_instance(const MipInstance& inst, std::ostream& out) {
  out << "version: " << kInstanceFormatVersion << '\n';
  out << "kind: " << to_string(inst.kind) << '\n';
  out << "n: " << inst.n << '\n';
  out << "m: " << inst.m << '\n';
  write_ints(out, "A", inst.a);
  write_ints(out, "b", inst.b);
  write_ints(out, "c", inst.c);
  write_ints(out, "int_mask", inst.int_mask);
  out << "lb: " << inst.lower_bound << '\n';
  out << "ub: " << inst.upper_bound << '\n';
  out << "seed: " << inst.seed << '\n';
  write_ints(out, "witness", inst.witness);
}

MipInstance read_instance(std::istream& in, const std::string& source) {
  static const std::vector<std::string> kFields = {
      "version", "kind", "n", "m", "A", "b", "c", "int_mask", "lb", "ub", "seed", "witness"};

  std::map<std::string, std::pair<int, std::string>> raw;
  std::string text;
  int line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty() || text[0] == '#') continue;
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
      throw ParseError(source, line_no, text, "expected 'key: value'");
    }
    std::string key = text.substr(0, colon);
    if (std::find(kFields.begin(), kFields.end(), key) == kFields.end()) {
      throw ParseError(source, line_no, key, "unknown field");
    }
    if (raw.count(key) != 0) throw ParseError(source, line_no, key, "duplicate field");
    raw[key] = {line_no, text.substr(colon + 1)};
  }
  for (const auto& field : kFields) {
    if (raw.count(field) == 0) throw ParseError(source, line_no, field, "missing field");
  }

  auto ints = [&](const std::string& key) {
    const auto& [line, body] = raw.at(key);
    return parse_ints(body, source, line, key);
  };
  auto scalar = [&](const std::string& key) {
    const auto values = ints(key);
    if (values.size() != 1) {
      throw ParseError(source, raw.at(key).first, key, "expected exactly one integer");
    }
    return values[0];
  };
  auto vector_of = [&](const std::string& key, std::size_t expected, bool may_be_empty) {
    const auto values = ints(key);
    if (values.size() != expected && !(may_be_empty && values.empty())) {
      throw ParseError(source, raw.at(key).first, key,
                       "expected " + std::to_string(expected) + " integers, got " +
                           std::to_string(values.size()));
    }
    return std::vector<int>(values.begin(), values.end());
  };

  const long long version = scalar("version");
  if (version != kInstanceFormatVersion) {
    throw VersionMismatch(source + ": instance format version " + std::to_string(version) +
                          " is not supported (expected " +
                          std::to_string(kInstanceFormatVersion) + ")");
  }

  MipInstance inst;
  {
    std::string kind_text = raw.at("kind").second;
    kind_text.erase(0, kind_text.find_first_not_of(' '));
    kind_text.erase(kind_text.find_last_not_of(" \r") + 1);
    try {
      inst.kind = parse_problem_kind(kind_text);
    } catch (const DataError& e) {
      throw ParseError(source, raw.at("kind").first, "kind", e.what());
    }
  }
  inst.n = static_cast<int>(scalar("n"));
  inst.m = static_cast<int>(scalar("m"));
  if (inst.n < 1) throw ParseError(source, raw.at("n").first, "n", "must be positive");
  if (inst.m < 1) throw ParseError(source, raw.at("m").first, "m", "must be positive");
  const auto un = static_cast<std::size_t>(inst.n);
  const auto um = static_cast<std::size_t>(inst.m);
  inst.a = vector_of("A", un * um, false);
  inst.b = vector_of("b", um, false);
  inst.c = vector_of("c", un, false);
  inst.int_mask = vector_of("int_mask", un, false);
  inst.lower_bound = static_cast<int>(scalar("lb"));
  inst.upper_bound = static_cast<int>(scalar("ub"));
  {
    const auto& [line, body] = raw.at("seed");
    std::istringstream seed_in(body);
    std::string token, extra;
    seed_in >> token;
    const char* first = token.data();
    const auto [end, ec] = std::from_chars(first, first + token.size(), inst.seed);
    if (token.empty() || ec != std::errc() || end != first + token.size() || (seed_in >> extra)) {
      throw ParseError(source, line, "seed", "expected an unsigned 64-bit integer, got '" + body + "'");
    }
  }
  inst.witness = vector_of("witness", un, true);

  try {
    inst.validate();
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
  return inst;
}

void save_instance(const MipInstance& inst, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_instance(inst, out);
  if (!out) throw DataError("failed writing " + path.string());
}

MipInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open instance file " + path.string());
  return read_instance(in, path.string());
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string instance_hash(const MipInstance& inst) {
  std::ostringstream out;
  write_instance(inst, out);
  return fnv1a_hex(out.str());
}

}  // namespace sfp
