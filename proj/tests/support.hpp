#pragma once

// Shared helpers for the unit tests. Test-side randomness uses std::mt19937_64
// so that oracles never share a code path with the library's generator.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "doctest.h"
#include "kqrk/error.hpp"
#include "kqrk/matrix.hpp"

namespace testing {

inline kqrk::DenseMatrix gaussian_matrix(std::size_t m, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  std::vector<double> v(m * n);
  for (double& x : v) x = dist(gen);
  return kqrk::DenseMatrix(m, n, std::move(v));
}

inline kqrk::DenseMatrix normalized_gaussian(std::size_t m, std::size_t n, std::uint64_t seed) {
  return kqrk::row_normalize(gaussian_matrix(m, n, seed)).matrix;
}

inline std::vector<double> gaussian_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  std::vector<double> v(n);
  for (double& x : v) x = dist(gen);
  return v;
}

inline std::vector<double> uniform_vector(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(gen);
  return v;
}

inline bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

/// Runs `fn` and reports whether it threw kqrk::Error with the given kind.
inline bool throws_kind(kqrk::ErrorKind kind, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const kqrk::Error& e) {
    return e.kind() == kind;
  }
  return false;
}

/// Double-double accumulator (Knuth two-sum / Dekker product), used by oracles
/// that need more than 53 bits to judge a 1e-12 relative agreement.
struct DD {
  double hi = 0.0;
  double lo = 0.0;

  DD() = default;
  DD(double v) : hi(v), lo(0.0) {}  // NOLINT(google-explicit-constructor)
  DD(double h, double l) : hi(h), lo(l) {}

  static DD two_sum(double a, double b) {
    const double s = a + b;
    const double bb = s - a;
    return {s, (a - (s - bb)) + (b - bb)};
  }
  static DD two_prod(double a, double b) {
    const double p = a * b;
    return {p, std::fma(a, b, -p)};
  }
  static DD renorm(double h, double l) { return two_sum(h, l); }

  friend DD operator+(DD a, DD b) {
    DD s = two_sum(a.hi, b.hi);
    return renorm(s.hi, s.lo + a.lo + b.lo);
  }
  friend DD operator-(DD a, DD b) { return a + DD(-b.hi, -b.lo); }
  friend DD operator*(DD a, DD b) {
    DD p = two_prod(a.hi, b.hi);
    return renorm(p.hi, p.lo + a.hi * b.lo + a.lo * b.hi);
  }
  friend DD operator/(DD a, DD b) {
    const double q1 = a.hi / b.hi;
    const DD r = a - b * DD(q1);
    const double q2 = r.hi / b.hi;
    return renorm(q1, q2);
  }
  double value() const { return hi + lo; }
};

inline DD dd_sqrt(DD a) {
  if (a.hi <= 0.0) return DD(0.0);
  const double s = std::sqrt(a.hi);
  const DD r = a - DD::two_prod(s, s);
  return DD::renorm(s, r.hi / (2.0 * s));
}

}  // namespace testing
