#include "kqrk/sigma_q.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "kqrk/error.hpp"
#include "kqrk/rng.hpp"
#include "kqrk/svd.hpp"

namespace kqrk {

const char* to_string(SigmaMode mode) { return mode == SigmaMode::exact ? "exact" : "sampled"; }

std::uint64_t binomial(std::size_t m, std::size_t k) {
  if (k > m) return 0;
  k = std::min(k, m - k);
  __extension__ unsigned __int128 acc = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    acc = acc * (m - k + i) / i;
    if (acc > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(acc);
}

namespace {

std::size_t subset_size(const DenseMatrix& a, const Rational& q) {
  const std::size_t k = q.count_of(a.rows());
  if (k < 1 || k > a.rows()) {
    throw Error(ErrorKind::InvalidArgument,
                "subset size q·m = " + std::to_string(k) + " outside [1, " + std::to_string(a.rows()) + "]");
  }
  return k;
}

// σ_min of the rows `subset` (ascending) of A, gathered into `buffer`.
double subset_sigma(const DenseMatrix& a, std::span<const std::size_t> subset,
                    std::vector<double>& buffer) {
  const std::size_t n = a.cols();
  if (subset.size() < n) return 0.0;
  if (n == 1) {
    double s = 0.0;
    for (std::size_t i : subset) s += a(i, 0) * a(i, 0);
    return std::sqrt(s);
  }
  buffer.resize(subset.size() * n);
  for (std::size_t r = 0; r < subset.size(); ++r) {
    const auto row = a.row(subset[r]);
    std::copy(row.begin(), row.end(), buffer.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  return smallest_singular_value(buffer, subset.size(), n);
}

// Advances `c` to the next k-combination of [0, m) in lexicographic order.
bool next_combination(std::vector<std::size_t>& c, std::size_t m) {
  const std::size_t k = c.size();
  std::size_t i = k;
  while (i > 0) {
    --i;
    if (c[i] < m - k + i) {
      ++c[i];
      for (std::size_t j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
      return true;
    }
  }
  return false;
}

SigmaQMinResult enumerate_all(const DenseMatrix& a, std::size_t k, SigmaMode mode) {
  std::vector<std::size_t> combo(k);
  std::iota(combo.begin(), combo.end(), std::size_t{0});
  std::vector<double> buffer;
  SigmaQMinResult result;
  result.mode = mode;
  result.is_upper_bound_only = mode == SigmaMode::sampled;
  result.value = std::numeric_limits<double>::infinity();
  do {
    result.value = std::min(result.value, subset_sigma(a, combo, buffer));
    ++result.subsets_examined;
  } while (next_combination(combo, a.rows()));
  return result;
}

}  // namespace

SigmaQMinResult sigma_q_min_exact(const DenseMatrix& a, const Rational& q, std::uint64_t cap) {
  const std::size_t k = subset_size(a, q);
  if (k < a.cols()) return {0.0, SigmaMode::exact, 0, false};
  if (a.cols() == 1) {
    std::vector<double> magnitude(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) magnitude[i] = std::abs(a(i, 0));
    std::vector<std::size_t> order(a.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return magnitude[x] < magnitude[y]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
    std::vector<double> buffer;
    return {subset_sigma(a, order, buffer), SigmaMode::exact, 1, false};
  }
  const std::uint64_t total = binomial(a.rows(), k);
  if (total > cap) {
    throw Error(ErrorKind::TooManySubsets, "C(" + std::to_string(a.rows()) + ", " + std::to_string(k) +
                                               ") exceeds enumeration cap " + std::to_string(cap));
  }
  return enumerate_all(a, k, SigmaMode::exact);
}

SigmaQMinResult sigma_q_min_sampled(const DenseMatrix& a, const Rational& q, std::uint64_t samples,
                                    std::uint64_t seed) {
  const std::size_t k = subset_size(a, q);
  if (samples == 0) throw Error(ErrorKind::InvalidArgument, "sample count must be positive");
  if (k < a.cols()) return {0.0, SigmaMode::sampled, 0, true};

  const std::uint64_t total = binomial(a.rows(), k);
  if (samples >= total) return enumerate_all(a, k, SigmaMode::sampled);

  const Rng base = Rng(seed).split("sigma_q_min_sampled");
  std::vector<std::size_t> pool(a.rows());
  std::vector<double> buffer;
  SigmaQMinResult result{std::numeric_limits<double>::infinity(), SigmaMode::sampled, 0, true};
  for (std::uint64_t s = 0; s < samples; ++s) {
    // Each sample owns its stream, so chunked or parallel evaluation would agree.
    Rng rng = base.split(s);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng.below(a.rows() - i);
      std::swap(pool[i], pool[j]);
    }
    std::span<std::size_t> subset(pool.data(), k);
    std::sort(subset.begin(), subset.end());
    result.value = std::min(result.value, subset_sigma(a, subset, buffer));
    ++result.subsets_examined;
  }
  return result;
}

}  // namespace kqrk
