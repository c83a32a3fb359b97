#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kqrk/matrix.hpp"

namespace kqrk {

struct SvdOptions {
  /// Relative off-diagonal tolerance for a column pair to count as orthogonal.
  double tolerance = 1e-12;
  /// Sweep cap; 0 means 100·max(m, n).
  std::size_t max_sweeps = 0;
};

/// All min(m, n) singular values in descending order.
///
/// One-sided Jacobi (Hestenes). Tall inputs are first reduced to their n×n
/// triangular QR factor, which has the same singular values. Throws
/// ConvergenceFailure if the sweep cap is reached.
std::vector<double> singular_values(const DenseMatrix& a, const SvdOptions& options = {});

/// Same, over a raw row-major buffer (used in hot subset loops).
std::vector<double> singular_values(std::span<const double> row_major, std::size_t rows,
                                    std::size_t cols, const SvdOptions& options = {});

struct SingularExtremes {
  double sigma_max = 0.0;
  /// The n-th singular value; 0 whenever A has fewer rows than columns.
  double sigma_min = 0.0;
};

SingularExtremes singular_extremes(const DenseMatrix& a, const SvdOptions& options = {});

/// inf_{‖x‖=1} ‖A x‖ over x ∈ Rⁿ: σ_n when m ≥ n, otherwise exactly 0.
double smallest_singular_value(const DenseMatrix& a, const SvdOptions& options = {});
double smallest_singular_value(std::span<const double> row_major, std::size_t rows,
                               std::size_t cols, const SvdOptions& options = {});

}  // namespace kqrk
