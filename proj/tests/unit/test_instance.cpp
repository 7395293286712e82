#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "sfp/errors.hpp"
#include "sfp/feasibility_pump.hpp"
#include "sfp/instance.hpp"
#include "sfp/rng.hpp"
#include "sfp_oracles/oracles.hpp"

using namespace sfp;

namespace {

std::string serialize(const MipInstance& inst) {
  std::ostringstream out;
  write_instance(inst, out);
  return out.str();
}

std::vector<double> as_double(const std::vector<int>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("generator is deterministic and satisfies its invariants") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto kind = seed % 2 == 0 ? ProblemKind::kIP : ProblemKind::kMIP;
    const MipInstance a = generate(seed, 5, 6, kind);
    const MipInstance b = generate(seed, 5, 6, kind);
    CHECK(serialize(a) == serialize(b));
    CHECK(generator_invariant_violation(a).empty());
    CHECK(std::any_of(a.b.begin(), a.b.end(), [](int v) { return v < 0; }));
    CHECK(check(a, as_double(a.witness)).feasible);
    if (kind == ProblemKind::kIP) {
      CHECK(std::all_of(a.int_mask.begin(), a.int_mask.end(), [](int v) { return v == 1; }));
    } else {
      CHECK(std::any_of(a.int_mask.begin(), a.int_mask.end(), [](int v) { return v == 1; }));
    }
    CHECK(relaxation_is_bounded(a));
  }
}

TEST_CASE("different seeds give different instances") {
  CHECK(serialize(generate(1, 5, 6, ProblemKind::kIP)) != serialize(generate(2, 5, 6, ProblemKind::kIP)));
}

TEST_CASE("unbounded relaxations are allowed when requested") {
  GeneratorOptions options;
  options.require_bounded_relaxation = false;
  int unbounded = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    if (!relaxation_is_bounded(generate(seed, 5, 6, ProblemKind::kIP, options))) ++unbounded;
  }
  CHECK(unbounded > 0);
}

TEST_CASE("boundedness test on hand-made polyhedra") {
  MipInstance inst;
  inst.n = 1;
  inst.m = 1;
  inst.a = {1};
  inst.b = {-1};
  inst.c = {0};
  inst.int_mask = {1};
  CHECK_FALSE(relaxation_is_bounded(inst));
  inst.m = 2;
  inst.a = {1, -1};
  inst.b = {-1, 5};
  CHECK(relaxation_is_bounded(inst));
}

TEST_CASE("check reports violation and integrality") {
  MipInstance inst;
  inst.n = 2;
  inst.m = 2;
  inst.a = {1, 0, 0, 1};
  inst.b = {1, -1};
  inst.c = {0, 0};
  inst.int_mask = {1, 1};
  const std::vector<double> x{3.5, -1.0};
  const FeasibilityReport r = check(inst, x);
  CHECK(r.constraint_violation == doctest::Approx(2.5));
  CHECK(r.integrality_violation == doctest::Approx(0.5));
  CHECK_FALSE(r.feasible);
  const std::vector<double> bad_len{1.0};
  CHECK_THROWS_AS(check(inst, bad_len), DataError);
}

TEST_CASE("check agrees with a naive checker and ignores row order") {
  Rng rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    const MipInstance inst = generate(static_cast<std::uint64_t>(trial), 4, 5,
                                      trial % 2 ? ProblemKind::kMIP : ProblemKind::kIP);
    std::vector<double> x(4);
    for (double& v : x) {
      v = rng.uniform() < 0.7 ? static_cast<double>(rng.uniform_int(-5, 12)) : rng.uniform() * 20 - 5;
    }
    const bool feasible = check(inst, x).feasible;
    CHECK(feasible == oracle::naive_is_feasible(inst, x));
    MipInstance swapped = inst;
    for (int j = 0; j < inst.n; ++j) std::swap(swapped.a[j], swapped.a[(inst.m - 1) * inst.n + j]);
    std::swap(swapped.b.front(), swapped.b.back());
    CHECK(check(swapped, x).feasible == feasible);
  }
}

TEST_CASE("round_partial") {
  const std::vector<int> both{1, 1}, first{1, 0};
  CHECK(round_partial(std::vector<double>{1.4, 2.6}, both) == std::vector<double>{1, 3});
  CHECK(round_partial(std::vector<double>{1.5, -1.5}, both) == std::vector<double>{2, -2});
  CHECK(round_partial(std::vector<double>{1.7, 2.3}, first) == std::vector<double>{2, 2.3});
  const auto once = round_partial(std::vector<double>{0.49, -7.51}, both);
  CHECK(round_partial(once, both) == once);
}

TEST_CASE("instance files round-trip byte for byte") {
  const MipInstance inst = generate(42, 5, 6, ProblemKind::kMIP);
  const std::string text = serialize(inst);
  std::istringstream in(text);
  const MipInstance back = read_instance(in);
  CHECK(back == inst);
  CHECK(serialize(back) == text);
  CHECK(instance_hash(back) == instance_hash(inst));
}

TEST_CASE("seeds above 2^63 round-trip") {
  const MipInstance inst = generate(0xfedcba9876543210ULL, 5, 6, ProblemKind::kIP);
  std::istringstream in(serialize(inst));
  CHECK(read_instance(in).seed == 0xfedcba9876543210ULL);
}

TEST_CASE("parse errors name the problem") {
  const std::string text = serialize(generate(3, 2, 4, ProblemKind::kIP));
  SUBCASE("missing int_mask") {
    std::string broken;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
      if (line.rfind("int_mask", 0) != 0) broken += line + "\n";
    }
    std::istringstream bin(broken);
    try {
      read_instance(bin, "x.txt");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("int_mask") != std::string::npos);
    }
  }
  SUBCASE("wrong version") {
    std::string broken = text;
    broken.replace(broken.find("version: 1"), 10, "version: 9");
    std::istringstream bin(broken);
    CHECK_THROWS_AS(read_instance(bin), VersionMismatch);
  }
  SUBCASE("unknown field") {
    std::istringstream bin(text + "colour: blue\n");
    CHECK_THROWS_AS(read_instance(bin), ParseError);
  }
  SUBCASE("float in an integer field") {
    std::string broken = text;
    const auto pos = broken.find("\nb: ");
    broken.insert(pos + 4, "1.5 ");
    std::istringstream bin(broken);
    CHECK_THROWS_AS(read_instance(bin), DataError);
  }
}

TEST_CASE("hand-written instance matches its programmatic twin") {
  const std::string text =
      "# two variables\n"
      "version: 1\nkind: IP\nn: 2\nm: 3\n"
      "A: 1 1 -1 0 0 -1\n"
      "b: 7 -1 -1\n"
      "c: -3 2\n"
      "int_mask: 1 1\n"
      "lb: -20\nub: 20\nseed: 0\nwitness: 2 2\n";
  std::istringstream in(text);
  const MipInstance parsed = read_instance(in);
  MipInstance twin;
  twin.n = 2;
  twin.m = 3;
  twin.a = {1, 1, -1, 0, 0, -1};
  twin.b = {7, -1, -1};
  twin.c = {-3, 2};
  twin.int_mask = {1, 1};
  twin.witness = {2, 2};
  CHECK(parsed == twin);
  FpOptions options;
  options.seed = 3;
  const FpResult a = run_fp(parsed, options);
  const FpResult b = run_fp(twin, options);
  CHECK(a.steps_taken == b.steps_taken);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) CHECK(a.trace[k].x_bar == b.trace[k].x_bar);
}

TEST_CASE("brute force finds an integer point in generated instances") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const MipInstance inst = generate(seed, 5, 6, seed % 3 ? ProblemKind::kIP : ProblemKind::kMIP);
    bool exhausted = false;
    const auto x = oracle::brute_force_feasible_point(inst, 5'000'000, &exhausted);
    REQUIRE(x.has_value());
    CHECK(check(inst, *x, 1e-6).feasible);
  }
}
