#include "sfp/feasibility_pump.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include <json.hpp>

#include "sfp/errors.hpp"
#include "sfp/rng.hpp"

namespace sfp {

namespace {

// Adds +-1 to each integral coordinate independently with the given
// probability, clamped to the box; redraws until the point changes.
void perturb(std::vector<double>& x_bar, const MipInstance& inst, double flip_probability,
             Rng& rng) {
  const bool any_integral =
      std::any_of(inst.int_mask.begin(), inst.int_mask.end(), [](int v) { return v == 1; });
  if (!any_integral) return;
  while (true) {
    bool changed = false;
    std::vector<double> candidate = x_bar;
    for (int j = 0; j < inst.n; ++j) {
      if (inst.int_mask[j] == 0 || !rng.bernoulli(flip_probability)) continue;
      const double delta = rng.bernoulli(0.5) ? 1.0 : -1.0;
      candidate[j] = std::clamp(candidate[j] + delta, static_cast<double>(inst.lower_bound),
                                static_cast<double>(inst.upper_bound));
      changed = changed || candidate[j] != x_bar[j];
    }
    if (changed) {
      x_bar = std::move(candidate);
      return;
    }
  }
}

}  // namespace

FpResult run_fp(const MipInstance& inst, const FpOptions& options) {
  if (options.max_steps < 1) throw DataError("run_fp: max_steps must be at least 1");
  Rng rng(options.seed);
  FpResult result;

  const LpOutcome relaxed = solve_lp(relaxation(inst));
  ++result.lp_solves;
  const auto* optimum = std::get_if<LpOptimal>(&relaxed);
  if (optimum == nullptr) throw DataError("run_fp: continuous relaxation has no optimum");

  std::vector<double> x_bar = round_partial(optimum->point, inst.int_mask);
  result.trace.push_back({0, optimum->point, x_bar, l1_distance(optimum->point, x_bar), false});
  std::set<std::vector<double>> visited{x_bar};

  int counted = 0;
  int iterations = 0;
  const int hard_cap = 10 * options.max_steps;
  while (true) {
    if (check(inst, x_bar).feasible) {
      result.terminated_by = FpTermination::kFoundFeasible;
      result.solution = x_bar;
      result.steps_taken = std::max(1, counted);
      return result;
    }
    if (counted >= options.max_steps || iterations >= hard_cap) {
      result.terminated_by = FpTermination::kStepLimit;
      result.steps_taken = options.max_steps;
      return result;
    }
    ++iterations;

    std::vector<double> x = project_onto_relaxation(inst, x_bar);
    ++result.lp_solves;
    const double distance = l1_distance(x, x_bar);
    std::vector<double> next = round_partial(x, inst.int_mask);

    bool perturbed = false;
    if (next == x_bar) {
      perturb(next, inst, options.flip_probability, rng);
      perturbed = true;
    } else {
      ++counted;
      if (options.detect_revisits && visited.count(next) != 0) {
        perturb(next, inst, options.flip_probability, rng);
        perturbed = true;
      }
    }
    if (perturbed) ++result.perturbation_count;
    x_bar = std::move(next);
    visited.insert(x_bar);
    result.trace.push_back({counted, std::move(x), x_bar, distance, perturbed});
  }
}

void write_trace_jsonl(const FpResult& result, std::ostream& out) {
  for (const auto& record : result.trace) {
    nlohmann::json line = {{"step", record.step},
                           {"x", record.x},
                           {"x_bar", record.x_bar},
                           {"l1_distance", record.l1_distance},
                           {"perturbed", record.perturbed}};
    out << line.dump() << '\n';
  }
  nlohmann::json summary = {
      {"summary", true},
      {"steps_taken", result.steps_taken},
      {"terminated_by",
       result.terminated_by == FpTermination::kFoundFeasible ? "FoundFeasible" : "StepLimit"},
      {"perturbation_count", result.perturbation_count},
      {"lp_solves", result.lp_solves}};
  out << summary.dump() << '\n';
}

}  // namespace sfp
