#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace kqrk {

/// Row-major dense matrix with an optional "row normalized" certificate.
///
/// Entries are always finite. When `row_normalized()` is true every row has
/// Euclidean norm within kRowNormTolerance of one; the constructor checks it.
class DenseMatrix {
 public:
  static constexpr double kRowNormTolerance = 1e-12;

  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries,
              bool row_normalized = false);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix zeros(std::size_t rows, std::size_t cols);
  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool row_normalized() const { return row_normalized_; }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> data() const { return data_; }

  /// Rows `indices` stacked in the given order.
  DenseMatrix select_rows(std::span<const std::size_t> indices) const;

  DenseMatrix transposed() const;

  std::vector<double> multiply(std::span<const double> x) const;
  double row_dot(std::size_t i, std::span<const double> x) const;
  double row_norm_sq(std::size_t i) const;
  double frobenius_sq() const;

  /// A·Aᵀ, row-major m×m.
  std::vector<double> gram_rows() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
  bool row_normalized_ = false;
};

struct NormalizedRows {
  DenseMatrix matrix;
  std::vector<double> norms;
};

/// Scales each row to unit norm; throws ZeroRow(i) for an all-zero row.
NormalizedRows row_normalize(const DenseMatrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace kqrk
