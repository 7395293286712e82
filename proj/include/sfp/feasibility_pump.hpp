#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "sfp/instance.hpp"

namespace sfp {

enum class FpTermination { kFoundFeasible, kStepLimit };

struct FpTraceRecord {
  int step = 0;                // counted steps so far
  std::vector<double> x;       // LP point (relaxation optimum or projection)
  std::vector<double> x_bar;   // rounded (possibly perturbed) point
  double l1_distance = 0.0;    // ||x - previous x_bar||_1 (||x - x_bar|| at start)
  bool perturbed = false;
};

struct FpOptions {
  int max_steps = 100;
  std::uint64_t seed = 0;
  // Perturb on any revisit of an earlier rounded point, not only on an
  // immediate repeat.
  bool detect_revisits = true;
  double flip_probability = 0.5;
};

struct FpResult {
  int steps_taken = 0;
  std::optional<std::vector<double>> solution;
  std::vector<FpTraceRecord> trace;
  int perturbation_count = 0;
  int lp_solves = 0;
  FpTermination terminated_by = FpTermination::kStepLimit;
};

// Feasibility pump: start from the rounded relaxation optimum, then alternate
// L1 projection onto the relaxation with partial rounding; random +-1 moves
// on the integer coordinates break cycles. Only iterations whose rounding
// moved to a new point count as steps; a feasible start reports one step and
// a failure reports max_steps.
FpResult run_fp(const MipInstance& inst, const FpOptions& options);

// One JSON object per line.
void write_trace_jsonl(const FpResult& result, std::ostream& out);

}  // namespace sfp
