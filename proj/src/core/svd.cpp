#include "kqrk/svd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kqrk/error.hpp"

namespace kqrk {

namespace {

// Column-major working storage: column j occupies [j*rows, (j+1)*rows).
struct ColumnMajor {
  std::size_t rows;
  std::size_t cols;
  std::vector<double> v;

  double* col(std::size_t j) { return v.data() + j * rows; }
};

ColumnMajor to_column_major(std::span<const double> a, std::size_t rows, std::size_t cols,
                            bool transpose) {
  const std::size_t m = transpose ? cols : rows;
  const std::size_t n = transpose ? rows : cols;
  ColumnMajor w{m, n, std::vector<double>(m * n)};
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      if (transpose)
        w.v[i * m + j] = a[i * cols + j];
      else
        w.v[j * m + i] = a[i * cols + j];
    }
  return w;
}

// Householder QR in place; returns the n×n upper-triangular factor.
ColumnMajor triangular_factor(ColumnMajor w) {
  const std::size_t m = w.rows, n = w.cols;
  for (std::size_t k = 0; k < n; ++k) {
    double* ck = w.col(k);
    double norm = 0.0;
    for (std::size_t i = k; i < m; ++i) norm += ck[i] * ck[i];
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double alpha = ck[k] > 0 ? -norm : norm;
    // v = x - alpha e1, stored over ck[k..m)
    ck[k] -= alpha;
    double vnorm_sq = 0.0;
    for (std::size_t i = k; i < m; ++i) vnorm_sq += ck[i] * ck[i];
    if (vnorm_sq > 0.0) {
      for (std::size_t j = k + 1; j < n; ++j) {
        double* cj = w.col(j);
        double proj = 0.0;
        for (std::size_t i = k; i < m; ++i) proj += ck[i] * cj[i];
        const double f = 2.0 * proj / vnorm_sq;
        for (std::size_t i = k; i < m; ++i) cj[i] -= f * ck[i];
      }
    }
    ck[k] = alpha;
    for (std::size_t i = k + 1; i < m; ++i) ck[i] = 0.0;
  }
  ColumnMajor r{n, n, std::vector<double>(n * n, 0.0)};
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i <= j; ++i) r.v[j * n + i] = w.v[j * m + i];
  return r;
}

}  // namespace

std::vector<double> singular_values(const DenseMatrix& a, const SvdOptions& options) {
  return singular_values(a.data(), a.rows(), a.cols(), options);
}

std::vector<double> singular_values(std::span<const double> row_major, std::size_t rows,
                                    std::size_t cols, const SvdOptions& options) {
  if (rows == 0 || cols == 0 || row_major.size() != rows * cols) {
    throw Error(ErrorKind::InvalidArgument, "bad matrix buffer for SVD");
  }
  const bool transpose = rows < cols;
  ColumnMajor w = to_column_major(row_major, rows, cols, transpose);
  if (w.rows > w.cols) w = triangular_factor(std::move(w));

  const std::size_t m = w.rows, n = w.cols;
  const std::size_t cap =
      options.max_sweeps != 0 ? options.max_sweeps : 100 * std::max(rows, cols);
  const double tol = options.tolerance;

  bool converged = n < 2;
  for (std::size_t sweep = 0; sweep < cap && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      double* cp = w.col(p);
      for (std::size_t q = p + 1; q < n; ++q) {
        double* cq = w.col(q);
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += cp[i] * cp[i];
          beta += cq[i] * cq[i];
          gamma += cp[i] * cq[i];
        }
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double xp = cp[i], xq = cq[i];
          cp[i] = c * xp - s * xq;
          cq[i] = s * xp + c * xq;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) {
    throw Error(ErrorKind::ConvergenceFailure,
                "Jacobi SVD did not converge in " + std::to_string(cap) + " sweeps");
  }

  std::vector<double> sv(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double* cj = w.col(j);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += cj[i] * cj[i];
    sv[j] = std::sqrt(s);
  }
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

SingularExtremes singular_extremes(const DenseMatrix& a, const SvdOptions& options) {
  const auto sv = singular_values(a, options);
  SingularExtremes out;
  out.sigma_max = sv.front();
  out.sigma_min = a.rows() < a.cols() ? 0.0 : sv.back();
  return out;
}

double smallest_singular_value(const DenseMatrix& a, const SvdOptions& options) {
  return smallest_singular_value(a.data(), a.rows(), a.cols(), options);
}

double smallest_singular_value(std::span<const double> row_major, std::size_t rows,
                               std::size_t cols, const SvdOptions& options) {
  if (rows < cols) return 0.0;
  return singular_values(row_major, rows, cols, options).back();
}

}  // namespace kqrk
