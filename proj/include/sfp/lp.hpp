#pragma once

#include <span>
#include <variant>
#include <vector>

#include "sfp/matrix.hpp"

namespace sfp {

// min objective·x  s.t.  row_matrix·x <= rhs,  lower <= x <= upper.
// Every bound must be finite.
struct DenseLp {
  Matrix row_matrix;
  std::vector<double> rhs;
  std::vector<double> objective;
  std::vector<double> lower_bounds;
  std::vector<double> upper_bounds;

  std::size_t num_vars() const { return objective.size(); }
  std::size_t num_rows() const { return rhs.size(); }

  // Throws ShapeMismatch / DataError when the invariants do not hold.
  void validate() const;
};

struct LpOptimal {
  std::vector<double> point;
  double objective_value = 0.0;
};
struct LpInfeasible {};
struct LpUnbounded {};

using LpOutcome = std::variant<LpOptimal, LpInfeasible, LpUnbounded>;

struct LpTolerances {
  double feas_tol = 1e-7;
  double opt_tol = 1e-6;
  double pivot_tol = 1e-9;
  int max_pivots = 20000;
  // Consecutive degenerate pivots before switching to least-index pivoting.
  int degeneracy_streak = 10;
};

// Dense two-phase tableau simplex. Largest-coefficient pricing, falling back
// to Bland's rule for the rest of the phase once a degeneracy streak is seen.
// Throws MaxPivotsExceeded rather than ever returning an unverified point.
LpOutcome solve_lp(const DenseLp& lp, const LpTolerances& tol = {});

// Max over rows of (row·x - rhs), and over the box of the bound violation.
double max_violation(const DenseLp& lp, std::span<const double> x);

// L1-closest point to `anchor` in {x : A x <= b, lower <= x <= upper}, via
// the auxiliary-variable LP  min sum t  s.t.  -t <= x - anchor <= t.
// Returns the anchor itself (bit-exact) when it is already feasible.
std::vector<double> project_l1(const Matrix& a, std::span<const double> b,
                               std::span<const double> lower,
                               std::span<const double> upper,
                               std::span<const double> anchor,
                               const LpTolerances& tol = {});

double l1_distance(std::span<const double> x, std::span<const double> y);

}  // namespace sfp
