#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kqrk/rational.hpp"

namespace kqrk {

/// A quantile level q over a multiset of size m. q·m must be a whole number.
struct QuantileSpec {
  Rational q;
  std::size_t m = 0;

  QuantileSpec(Rational level, std::size_t size);

  /// q·m, the size of the lower set L_q.
  std::size_t count() const { return count_; }

 private:
  std::size_t count_ = 0;
};

/// The (q·m)-th smallest element, duplicates counted with multiplicity.
double quantile(std::span<const double> values, const QuantileSpec& spec);

/// Indices whose rank lies in [lo, hi) under the total order (value, index).
///
/// Rank ranges are how the multiset convention is materialized: L_q is the rank
/// range [0, q·m), and the band strictly above the q₀ quantile and at most the
/// q quantile is [q₀·m, q·m). Ties at a threshold go to the lowest indices.
struct RankBand {
  std::vector<std::size_t> indices;
  double lower_threshold = 0.0;  // value at rank lo-1; 0 when lo == 0
  double upper_threshold = 0.0;  // value at rank hi-1
};

/// `work` is scratch space reused across calls; `sorted` orders the result by index.
RankBand rank_band(std::span<const double> values, std::size_t lo, std::size_t hi,
                   std::vector<std::size_t>& work, bool sorted = true);

inline RankBand rank_band(std::span<const double> values, std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> work;
  return rank_band(values, lo, hi, work, true);
}

/// L_q as a sorted index list.
std::vector<std::size_t> lower_set(std::span<const double> values, const QuantileSpec& spec);

}  // namespace kqrk
