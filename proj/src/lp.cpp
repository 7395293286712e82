#include "sfp/lp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sfp/errors.hpp"

namespace sfp {

void DenseLp::validate() const {
  const std::size_t n = num_vars();
  const std::size_t m = num_rows();
  if (row_matrix.rows() != m || (m > 0 && row_matrix.cols() != n)) {
    throw ShapeMismatch("DenseLp: row_matrix is " +
                        std::to_string(row_matrix.rows()) + "x" +
                        std::to_string(row_matrix.cols()) + ", expected " +
                        std::to_string(m) + "x" + std::to_string(n));
  }
  if (lower_bounds.size() != n || upper_bounds.size() != n) {
    throw ShapeMismatch("DenseLp: bound vectors must have num_vars entries");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(row_matrix.data().begin(), row_matrix.data().end(), finite) ||
      !std::all_of(rhs.begin(), rhs.end(), finite) ||
      !std::all_of(objective.begin(), objective.end(), finite) ||
      !std::all_of(lower_bounds.begin(), lower_bounds.end(), finite) ||
      !std::all_of(upper_bounds.begin(), upper_bounds.end(), finite)) {
    throw DataError("DenseLp: all entries and bounds must be finite");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (lower_bounds[j] > upper_bounds[j]) {
      throw DataError("DenseLp: lower bound exceeds upper bound for variable " +
                      std::to_string(j));
    }
  }
}

double max_violation(const DenseLp& lp, std::span<const double> x) {
  double worst = 0.0;
  for (std::size_t i = 0; i < lp.num_rows(); ++i) {
    double activity = 0.0;
    const auto row = lp.row_matrix.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) activity += row[j] * x[j];
    worst = std::max(worst, activity - lp.rhs[i]);
  }
  for (std::size_t j = 0; j < x.size(); ++j) {
    worst = std::max(worst, lp.lower_bounds[j] - x[j]);
    worst = std::max(worst, x[j] - lp.upper_bounds[j]);
  }
  return worst;
}

double l1_distance(std::span<const double> x, std::span<const double> y) {
  double total = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) total += std::abs(x[j] - y[j]);
  return total;
}

namespace {

constexpr double kTieTol = 1e-12;

// Standard-form tableau over  M y <= r,  y >= 0  after shifting by the lower
// bounds. Columns: structural | slack | artificial | rhs.
class Tableau {
 public:
  enum class Status { kOptimal, kUnbounded };

  Tableau(const DenseLp& lp, const LpTolerances& tol) : tol_(tol) {
    const std::size_t n = lp.num_vars();
    const std::size_t m = lp.num_rows();
    num_struct_ = n;
    num_rows_ = m + n;

    std::vector<double> shifted_rhs(num_rows_);
    for (std::size_t i = 0; i < m; ++i) {
      double shift = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        shift += lp.row_matrix(i, j) * lp.lower_bounds[j];
      }
      shifted_rhs[i] = lp.rhs[i] - shift;
    }
    for (std::size_t j = 0; j < n; ++j) {
      shifted_rhs[m + j] = lp.upper_bounds[j] - lp.lower_bounds[j];
    }

    std::size_t num_art = 0;
    for (double r : shifted_rhs) num_art += r < 0.0 ? 1 : 0;
    num_cols_ = num_struct_ + num_rows_ + num_art;
    rhs_col_ = num_cols_;
    t_ = Matrix(num_rows_, num_cols_ + 1);
    basis_.assign(num_rows_, 0);
    cost_.assign(num_cols_ + 1, 0.0);

    std::size_t next_art = num_struct_ + num_rows_;
    for (std::size_t i = 0; i < num_rows_; ++i) {
      auto row = t_.row(i);
      if (i < m) {
        for (std::size_t j = 0; j < n; ++j) row[j] = lp.row_matrix(i, j);
      } else {
        row[i - m] = 1.0;
      }
      row[num_struct_ + i] = 1.0;
      row[rhs_col_] = shifted_rhs[i];
      if (shifted_rhs[i] < 0.0) {
        for (double& v : row) v = -v;
        row[next_art] = 1.0;
        basis_[i] = next_art++;
      } else {
        basis_[i] = num_struct_ + i;
      }
    }
    first_art_ = num_struct_ + num_rows_;
  }

  bool has_artificials() const { return first_art_ < num_cols_; }

  // Returns the phase-one optimum (sum of artificials).
  double phase_one() {
    std::fill(cost_.begin(), cost_.end(), 0.0);
    for (std::size_t i = 0; i < num_rows_; ++i) {
      if (!is_artificial(basis_[i])) continue;
      const auto row = t_.row(i);
      for (std::size_t j = 0; j <= num_cols_; ++j) {
        if (!is_artificial(j)) cost_[j] -= row[j];
      }
    }
    run(/*allow_artificial=*/true);
    return -cost_[rhs_col_];
  }

  // Pivots basic artificials (all at level zero) out of the basis where a
  // structural or slack column allows it; otherwise the row is redundant and
  // stays inert.
  void evict_artificials() {
    for (std::size_t i = 0; i < num_rows_; ++i) {
      if (!is_artificial(basis_[i])) continue;
      std::size_t best = num_cols_;
      double best_mag = tol_.pivot_tol;
      for (std::size_t j = 0; j < first_art_; ++j) {
        const double mag = std::abs(t_(i, j));
        if (mag > best_mag) {
          best_mag = mag;
          best = j;
        }
      }
      if (best != num_cols_) pivot(i, best);
    }
  }

  Status phase_two(std::span<const double> objective) {
    std::fill(cost_.begin(), cost_.end(), 0.0);
    for (std::size_t j = 0; j < num_struct_; ++j) cost_[j] = objective[j];
    for (std::size_t i = 0; i < num_rows_; ++i) {
      const std::size_t b = basis_[i];
      const double cb = b < num_struct_ ? objective[b] : 0.0;
      if (cb == 0.0) continue;
      const auto row = t_.row(i);
      for (std::size_t j = 0; j <= num_cols_; ++j) cost_[j] -= cb * row[j];
    }
    return run(/*allow_artificial=*/false);
  }

  std::vector<double> structural_values() const {
    std::vector<double> y(num_struct_, 0.0);
    for (std::size_t i = 0; i < num_rows_; ++i) {
      if (basis_[i] < num_struct_) y[basis_[i]] = std::max(0.0, t_(i, rhs_col_));
    }
    return y;
  }

 private:
  bool is_artificial(std::size_t col) const {
    return col >= first_art_ && col < num_cols_;
  }

  Status run(bool allow_artificial) {
    bool bland = false;
    int streak = 0;
    const std::size_t limit = allow_artificial ? num_cols_ : first_art_;
    while (true) {
      std::size_t enter = limit;
      double best = -tol_.pivot_tol;
      for (std::size_t j = 0; j < limit; ++j) {
        if (cost_[j] < best) {
          enter = j;
          if (bland) break;
          best = cost_[j];
        }
      }
      if (enter == limit) return Status::kOptimal;

      std::size_t leave = num_rows_;
      double best_ratio = 0.0;
      for (std::size_t i = 0; i < num_rows_; ++i) {
        const double coef = t_(i, enter);
        if (coef <= tol_.pivot_tol) continue;
        const double ratio = std::max(0.0, t_(i, rhs_col_)) / coef;
        if (leave == num_rows_ || ratio < best_ratio - kTieTol) {
          leave = i;
          best_ratio = ratio;
        } else if (ratio <= best_ratio + kTieTol) {
          const bool prefer = bland ? basis_[i] < basis_[leave]
                                    : coef > t_(leave, enter);
          if (prefer) leave = i;
        }
      }
      if (leave == num_rows_) return Status::kUnbounded;

      if (best_ratio <= kTieTol) {
        if (++streak >= tol_.degeneracy_streak) bland = true;
      } else {
        streak = 0;
      }
      if (++pivots_ > tol_.max_pivots) {
        throw MaxPivotsExceeded("simplex exceeded " +
                                std::to_string(tol_.max_pivots) + " pivots");
      }
      pivot(leave, enter);
    }
  }

  void pivot(std::size_t r, std::size_t c) {
    auto prow = t_.row(r);
    const double inv = 1.0 / prow[c];
    for (double& v : prow) v *= inv;
    prow[c] = 1.0;
    for (std::size_t i = 0; i < num_rows_; ++i) {
      if (i == r) continue;
      auto row = t_.row(i);
      const double factor = row[c];
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j <= num_cols_; ++j) row[j] -= factor * prow[j];
      row[c] = 0.0;
    }
    const double factor = cost_[c];
    if (factor != 0.0) {
      for (std::size_t j = 0; j <= num_cols_; ++j) cost_[j] -= factor * prow[j];
      cost_[c] = 0.0;
    }
    basis_[r] = c;
  }

  const LpTolerances& tol_;
  std::size_t num_struct_ = 0;
  std::size_t num_rows_ = 0;
  std::size_t num_cols_ = 0;
  std::size_t first_art_ = 0;
  std::size_t rhs_col_ = 0;
  Matrix t_;
  std::vector<std::size_t> basis_;
  std::vector<double> cost_;
  int pivots_ = 0;
};

}  // namespace

LpOutcome solve_lp(const DenseLp& lp, const LpTolerances& tol) {
  lp.validate();
  Tableau tableau(lp, tol);
  if (tableau.has_artificials()) {
    if (tableau.phase_one() > tol.feas_tol) return LpInfeasible{};
    tableau.evict_artificials();
  }
  if (tableau.phase_two(lp.objective) == Tableau::Status::kUnbounded) {
    return LpUnbounded{};
  }

  const std::vector<double> y = tableau.structural_values();
  LpOptimal result;
  result.point.resize(lp.num_vars());
  for (std::size_t j = 0; j < lp.num_vars(); ++j) {
    result.point[j] = std::clamp(lp.lower_bounds[j] + y[j], lp.lower_bounds[j],
                                 lp.upper_bounds[j]);
    result.objective_value += lp.objective[j] * result.point[j];
  }
  const double violation = max_violation(lp, result.point);
  if (violation > tol.feas_tol) {
    throw NumericalError("simplex returned a point violating the constraints by " +
                         std::to_string(violation));
  }
  return result;
}

std::vector<double> project_l1(const Matrix& a, std::span<const double> b,
                               std::span<const double> lower,
                               std::span<const double> upper,
                               std::span<const double> anchor,
                               const LpTolerances& tol) {
  const std::size_t n = anchor.size();
  const std::size_t m = b.size();
  if (a.rows() != m || a.cols() != n || lower.size() != n || upper.size() != n) {
    throw ShapeMismatch("project_l1: inconsistent dimensions");
  }

  bool inside = true;
  for (std::size_t j = 0; j < n && inside; ++j) {
    inside = anchor[j] >= lower[j] - tol.feas_tol && anchor[j] <= upper[j] + tol.feas_tol;
  }
  for (std::size_t i = 0; i < m && inside; ++i) {
    double activity = 0.0;
    for (std::size_t j = 0; j < n; ++j) activity += a(i, j) * anchor[j];
    inside = activity <= b[i] + tol.feas_tol;
  }
  if (inside) return {anchor.begin(), anchor.end()};

  // Variables: x (n) then t (n).
  DenseLp lp;
  lp.row_matrix = Matrix(m + 2 * n, 2 * n);
  lp.rhs.resize(m + 2 * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) lp.row_matrix(i, j) = a(i, j);
    lp.rhs[i] = b[i];
  }
  for (std::size_t j = 0; j < n; ++j) {
    lp.row_matrix(m + j, j) = 1.0;
    lp.row_matrix(m + j, n + j) = -1.0;
    lp.rhs[m + j] = anchor[j];
    lp.row_matrix(m + n + j, j) = -1.0;
    lp.row_matrix(m + n + j, n + j) = -1.0;
    lp.rhs[m + n + j] = -anchor[j];
  }
  lp.objective.assign(2 * n, 0.0);
  lp.lower_bounds.resize(2 * n);
  lp.upper_bounds.resize(2 * n);
  for (std::size_t j = 0; j < n; ++j) {
    lp.objective[n + j] = 1.0;
    lp.lower_bounds[j] = lower[j];
    lp.upper_bounds[j] = upper[j];
    lp.lower_bounds[n + j] = 0.0;
    lp.upper_bounds[n + j] =
        std::max({upper[j] - anchor[j], anchor[j] - lower[j], 0.0});
  }

  const LpOutcome outcome = solve_lp(lp, tol);
  const auto* optimal = std::get_if<LpOptimal>(&outcome);
  if (optimal == nullptr) {
    throw Error("project_l1: relaxed region is empty");
  }
  return {optimal->point.begin(), optimal->point.begin() + static_cast<std::ptrdiff_t>(n)};
}

}  // namespace sfp
