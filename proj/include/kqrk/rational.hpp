#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace kqrk {

/// Exact fraction used for quantile levels and sparsity ratios, so that
/// "q·m is an integer" can be checked without floating-point slop.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den);

  static Rational from_int(std::int64_t v) { return Rational(v, 1); }

  /// Parses "0.8", "4/5", "1" or "1e-2" (decimal forms are converted exactly).
  static Rational parse(std::string_view text);

  /// Nearest k/m to `value` with k clamped to [lo, hi].
  static Rational nearest_feasible(double value, std::size_t m, std::int64_t lo, std::int64_t hi);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  bool is_zero() const { return num_ == 0; }

  /// True when this·m is a whole number.
  bool scales_to_integer(std::size_t m) const;

  /// this·m; throws NonIntegerQuantile when not whole.
  std::size_t count_of(std::size_t m) const;

  std::string str() const;

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  /// Throws InvalidArgument on division by zero.
  friend Rational operator/(const Rational& a, const Rational& b);

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace kqrk
