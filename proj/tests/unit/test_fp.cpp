#include <doctest.h>

#include <set>
#include <sstream>

#include <json.hpp>

#include "sfp/feasibility_pump.hpp"
#include "sfp/lp.hpp"
#include "sfp_oracles/oracles.hpp"

using namespace sfp;

namespace {

MipInstance no_integer_point() {
  // min x s.t. -x <= -0.2, x <= 0.8, scaled to integer data: -5x <= -1, 5x <= 4.
  MipInstance inst;
  inst.n = 1;
  inst.m = 2;
  inst.a = {-5, 5};
  inst.b = {-1, 4};
  inst.c = {1};
  inst.int_mask = {1};
  return inst;
}

}  // namespace

TEST_CASE("feasible rounded start reports one step") {
  MipInstance inst;
  inst.n = 2;
  inst.m = 2;
  inst.a = {-1, 0, 0, -1};
  inst.b = {-2, -3};
  inst.c = {1, 1};
  inst.int_mask = {1, 1};
  const FpResult r = run_fp(inst, {});
  CHECK(r.steps_taken == 1);
  CHECK(r.terminated_by == FpTermination::kFoundFeasible);
  REQUIRE(r.solution.has_value());
  CHECK(*r.solution == std::vector<double>{2, 3});
  CHECK(r.lp_solves == 1);
}

TEST_CASE("no integer point hits the step cap") {
  FpOptions options;
  options.max_steps = 20;
  const FpResult r = run_fp(no_integer_point(), options);
  CHECK(r.terminated_by == FpTermination::kStepLimit);
  CHECK(r.steps_taken == 20);
  CHECK_FALSE(r.solution.has_value());
}

TEST_CASE("trace invariants on generated instances") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const MipInstance inst = generate(seed, 5, 6, seed % 2 ? ProblemKind::kMIP : ProblemKind::kIP);
    FpOptions options;
    options.seed = seed;
    const FpResult r = run_fp(inst, options);
    const DenseLp lp = relaxation(inst);
    CHECK(r.steps_taken >= 1);
    CHECK(r.steps_taken <= options.max_steps);
    CHECK(r.solution.has_value() == (r.terminated_by == FpTermination::kFoundFeasible));
    if (r.solution) CHECK(check(inst, *r.solution).feasible);
    for (std::size_t k = 0; k < r.trace.size(); ++k) {
      const auto& rec = r.trace[k];
      for (int j = 0; j < inst.n; ++j) {
        if (inst.int_mask[j]) CHECK(rec.x_bar[j] == std::round(rec.x_bar[j]));
      }
      CHECK(max_violation(lp, rec.x) <= 1e-7);
      const bool feasible = check(inst, rec.x_bar).feasible;
      if (feasible) CHECK(k + 1 == r.trace.size());
    }
  }
}

TEST_CASE("projection steps are L1 minimal") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const MipInstance inst = generate(seed, 3, 4, ProblemKind::kIP);
    FpOptions options;
    options.seed = seed;
    const FpResult r = run_fp(inst, options);
    const Matrix a = inst.constraint_matrix();
    for (std::size_t k = 1; k < r.trace.size(); ++k) {
      const auto& prev = r.trace[k - 1].x_bar;
      const auto ref = oracle::l1_projection_by_vertices(a, inst.rhs(), inst.lower_bounds(),
                                                         inst.upper_bounds(), prev);
      CHECK(std::abs(l1_distance(r.trace[k].x, prev) - ref.first) <= 1e-6);
      CHECK(r.trace[k].l1_distance == doctest::Approx(ref.first).epsilon(1e-6));
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("same seed gives the same trace") {
  const MipInstance inst = generate(11, 5, 6, ProblemKind::kIP);
  FpOptions options;
  options.seed = 4;
  std::ostringstream a, b;
  write_trace_jsonl(run_fp(inst, options), a);
  write_trace_jsonl(run_fp(inst, options), b);
  CHECK(a.str() == b.str());
  std::istringstream lines(a.str());
  int parsed = 0;
  for (std::string line; std::getline(lines, line);) {
    CHECK(nlohmann::json::parse(line).is_object());
    ++parsed;
  }
  CHECK(parsed >= 2);
}

TEST_CASE("revisit detection can be turned off") {
  FpOptions options;
  options.detect_revisits = false;
  options.max_steps = 30;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FpResult r = run_fp(generate(seed, 5, 6, ProblemKind::kIP), options);
    CHECK(r.steps_taken <= 30);
  }
}
