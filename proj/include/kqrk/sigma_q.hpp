#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "kqrk/matrix.hpp"
#include "kqrk/rational.hpp"

namespace kqrk {

enum class SigmaMode { exact, sampled };

const char* to_string(SigmaMode mode);

/// min over |I| = q·m of σ_min(A_I), or an estimate of it.
///
/// A sampled value is a minimum over some of the subsets only, so it can only
/// overestimate the true minimum; `is_upper_bound_only` records that.
struct SigmaQMinResult {
  double value = 0.0;
  SigmaMode mode = SigmaMode::exact;
  std::uint64_t subsets_examined = 0;
  bool is_upper_bound_only = false;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 2'000'000;

/// C(m, k), saturating at UINT64_MAX.
std::uint64_t binomial(std::size_t m, std::size_t k);

/// Exact value by enumeration of all C(m, q·m) subsets. Two shortcuts are exact
/// without enumeration: q·m < n gives 0 (every A_I has a null space), and
/// n = 1 takes the q·m rows of smallest magnitude. Throws TooManySubsets when
/// the enumeration would exceed `cap`.
SigmaQMinResult sigma_q_min_exact(const DenseMatrix& a, const Rational& q,
                                  std::uint64_t cap = kDefaultEnumerationCap);

/// Minimum over `samples` uniformly drawn subsets (deterministic in `seed`).
/// When `samples` covers every subset, all of them are visited once in
/// lexicographic order, which reproduces the exact value bit for bit.
SigmaQMinResult sigma_q_min_sampled(const DenseMatrix& a, const Rational& q, std::uint64_t samples,
                                    std::uint64_t seed);

}  // namespace kqrk
