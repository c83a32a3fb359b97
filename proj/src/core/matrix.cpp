#include "kqrk/matrix.hpp"

#include <cmath>
#include <string>

#include "kqrk/error.hpp"

namespace kqrk {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries,
                         bool row_normalized)
    : rows_(rows), cols_(cols), data_(std::move(entries)), row_normalized_(row_normalized) {
  if (rows_ == 0 || cols_ == 0) throw Error(ErrorKind::InvalidArgument, "matrix dimensions must be positive");
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorKind::InvalidArgument, "entry count " + std::to_string(data_.size()) +
                                                " does not match " + std::to_string(rows_) + "x" +
                                                std::to_string(cols_));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "matrix entries must be finite");
  }
  if (row_normalized_) {
    for (std::size_t i = 0; i < rows_; ++i) {
      if (std::abs(std::sqrt(row_norm_sq(i)) - 1.0) > kRowNormTolerance) {
        throw Error(ErrorKind::InvalidArgument, "row " + std::to_string(i) + " is not unit norm");
      }
    }
  }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<double> entries;
  std::size_t cols = rows.size() == 0 ? 0 : rows.begin()->size();
  for (const auto& r : rows) {
    if (r.size() != cols) throw Error(ErrorKind::InvalidArgument, "ragged matrix literal");
    entries.insert(entries.end(), r.begin(), r.end());
  }
  *this = DenseMatrix(rows.size(), cols, std::move(entries));
}

DenseMatrix DenseMatrix::zeros(std::size_t rows, std::size_t cols) {
  return DenseMatrix(rows, cols, std::vector<double>(rows * cols, 0.0));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  std::vector<double> e(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) e[i * n + i] = 1.0;
  return DenseMatrix(n, n, std::move(e), true);
}

DenseMatrix DenseMatrix::select_rows(std::span<const std::size_t> indices) const {
  std::vector<double> e;
  e.reserve(indices.size() * cols_);
  for (std::size_t i : indices) {
    if (i >= rows_) throw Error(ErrorKind::IndexOutOfRange, "row index " + std::to_string(i));
    const auto r = row(i);
    e.insert(e.end(), r.begin(), r.end());
  }
  DenseMatrix out;
  out.rows_ = indices.size();
  out.cols_ = cols_;
  out.data_ = std::move(e);
  out.row_normalized_ = row_normalized_;
  return out;
}

DenseMatrix DenseMatrix::transposed() const {
  std::vector<double> t(rows_ * cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t[j * rows_ + i] = data_[i * cols_ + j];
  return DenseMatrix(cols_, rows_, std::move(t));
}

std::vector<double> DenseMatrix::multiply(std::span<const double> x) const {
  if (x.size() != cols_) throw Error(ErrorKind::InvalidArgument, "dimension mismatch in multiply");
  std::vector<double> y(rows_);
  for (std::size_t i = 0; i < rows_; ++i) y[i] = dot(row(i), x);
  return y;
}

double DenseMatrix::row_dot(std::size_t i, std::span<const double> x) const { return dot(row(i), x); }

double DenseMatrix::row_norm_sq(std::size_t i) const {
  const auto r = row(i);
  return dot(r, r);
}

double DenseMatrix::frobenius_sq() const { return dot(data_, data_); }

std::vector<double> DenseMatrix::gram_rows() const {
  std::vector<double> g(rows_ * rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    const auto ri = row(i);
    for (std::size_t j = i; j < rows_; ++j) {
      const double v = dot(ri, row(j));
      g[i * rows_ + j] = v;
      g[j * rows_ + i] = v;
    }
  }
  return g;
}

NormalizedRows row_normalize(const DenseMatrix& a) {
  std::vector<double> entries(a.data().begin(), a.data().end());
  std::vector<double> norms(a.rows());
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double nrm = std::sqrt(a.row_norm_sq(i));
    if (nrm == 0.0) throw Error(ErrorKind::ZeroRow, "row " + std::to_string(i) + " has zero norm");
    norms[i] = nrm;
    for (std::size_t j = 0; j < n; ++j) entries[i * n + j] /= nrm;
  }
  return {DenseMatrix(a.rows(), n, std::move(entries), true), std::move(norms)};
}

double dot(std::span<const double> a, std::span<const double> b) {
  // Four independent accumulators let the compiler vectorize without -ffast-math.
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  const std::size_t n = a.size();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

}  // namespace kqrk
