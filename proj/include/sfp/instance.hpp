#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sfp/lp.hpp"
#include "sfp/matrix.hpp"

namespace sfp {

enum class ProblemKind { kIP, kMIP };

std::string to_string(ProblemKind kind);
ProblemKind parse_problem_kind(const std::string& text);

inline constexpr int kInstanceFormatVersion = 1;
inline constexpr int kDefaultLowerBound = -20;
inline constexpr int kDefaultUpperBound = 20;
inline constexpr double kIntTol = 1e-6;

// min c·x  s.t.  A x <= b,  lb <= x <= ub,  x_j integral where int_mask[j].
struct MipInstance {
  int n = 0;
  int m = 0;
  std::vector<int> a;  // m x n, row-major
  std::vector<int> b;
  std::vector<int> c;
  std::vector<int> int_mask;
  int lower_bound = kDefaultLowerBound;
  int upper_bound = kDefaultUpperBound;
  std::uint64_t seed = 0;
  ProblemKind kind = ProblemKind::kIP;
  // Generator's interior point xi with A xi <= b; empty for hand-written
  // instances.
  std::vector<int> witness;

  int coef(int row, int col) const { return a[static_cast<std::size_t>(row * n + col)]; }

  Matrix constraint_matrix() const;
  std::vector<double> rhs() const;
  std::vector<double> lower_bounds() const;
  std::vector<double> upper_bounds() const;

  // Shape and domain invariants (kind/mask consistency, witness feasible,
  // origin excluded). Throws DataError.
  void validate() const;

  friend bool operator==(const MipInstance&, const MipInstance&) = default;
};

struct FeasibilityReport {
  double constraint_violation = 0.0;  // sum of positive parts of A x - b
  double integrality_violation = 0.0;  // max distance of masked coords to Z
  bool feasible = false;
};

struct GeneratorOptions {
  // Reject draws whose relaxation {x : A x <= b} is unbounded without the
  // box, so only genuinely bounded polyhedra are produced.
  bool require_bounded_relaxation = true;
};

// Random instance: A_ij, c_j ~ U{-10..10}; xi_j, eps_i ~ U{1..10};
// b = A xi + eps; MIP mask entries ~ U{0,1} with at least one integral
// variable. Whole draws are rejected until some b_i < 0 (and, by default,
// the relaxation is bounded). Throws RejectionLimitExceeded after 10,000
// rejected draws.
MipInstance generate(std::uint64_t seed, int n, int m, ProblemKind kind,
                     const GeneratorOptions& options = {});

// True when {d : A d <= 0} = {0}, i.e. {x : A x <= b} is bounded whenever
// nonempty.
bool relaxation_is_bounded(const MipInstance& inst);

// Empty when `inst` satisfies every property the generator guarantees;
// otherwise a description of the first violated one.
std::string generator_invariant_violation(const MipInstance& inst);

FeasibilityReport check(const MipInstance& inst, std::span<const double> x,
                        double feas_tol = 1e-7, double int_tol = kIntTol);

// Rounds masked coordinates to the nearest integer (ties away from zero).
std::vector<double> round_partial(std::span<const double> x,
                                  std::span<const int> int_mask);

// A x - b.
std::vector<double> residual(const MipInstance& inst, std::span<const double> x);

// Continuous relaxation min c·x over P_R ∩ box.
DenseLp relaxation(const MipInstance& inst);

std::vector<double> project_onto_relaxation(const MipInstance& inst,
                                            std::span<const double> anchor);

// Versioned text format; integers only.
void write_instance(const MipInstance& inst, std::ostream& out);
MipInstance read_instance(std::istream& in, const std::string& source = "<stream>");
void save_instance(const MipInstance& inst, const std::filesystem::path& path);
MipInstance load_instance(const std::filesystem::path& path);

// FNV-1a over the serialized form, hex encoded.
std::string instance_hash(const MipInstance& inst);
std::string fnv1a_hex(std::string_view bytes);

}  // namespace sfp
