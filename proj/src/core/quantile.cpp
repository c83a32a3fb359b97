#include "kqrk/quantile.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "kqrk/error.hpp"

namespace kqrk {

QuantileSpec::QuantileSpec(Rational level, std::size_t size) : q(level), m(size) {
  if (m == 0) throw Error(ErrorKind::InvalidArgument, "quantile of an empty multiset");
  if (q <= Rational(0, 1) || q > Rational(1, 1)) {
    throw Error(ErrorKind::InvalidArgument, "quantile level " + q.str() + " outside (0, 1]");
  }
  count_ = q.count_of(m);
  if (count_ == 0) throw Error(ErrorKind::InvalidArgument, "q·m must be at least 1");
}

double quantile(std::span<const double> values, const QuantileSpec& spec) {
  if (values.size() != spec.m) {
    throw Error(ErrorKind::InvalidArgument, "multiset has " + std::to_string(values.size()) +
                                                " elements, spec expects " + std::to_string(spec.m));
  }
  std::vector<double> copy(values.begin(), values.end());
  const auto kth = copy.begin() + static_cast<std::ptrdiff_t>(spec.count() - 1);
  std::nth_element(copy.begin(), kth, copy.end());
  return *kth;
}

RankBand rank_band(std::span<const double> values, std::size_t lo, std::size_t hi,
                   std::vector<std::size_t>& work, bool sorted) {
  if (lo >= hi || hi > values.size()) {
    throw Error(ErrorKind::EmptyAdmissibleSet, "rank range [" + std::to_string(lo) + ", " +
                                                   std::to_string(hi) + ") over " +
                                                   std::to_string(values.size()) + " values");
  }
  work.resize(values.size());
  std::iota(work.begin(), work.end(), std::size_t{0});
  const auto before = [&values](std::size_t a, std::size_t b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  };
  const auto first = work.begin();
  std::nth_element(first, first + static_cast<std::ptrdiff_t>(hi - 1), work.end(), before);
  RankBand band;
  band.upper_threshold = values[work[hi - 1]];
  if (lo > 0) {
    // Elements left of hi-1 are all ranked below it; partition them again.
    std::nth_element(first, first + static_cast<std::ptrdiff_t>(lo - 1),
                     first + static_cast<std::ptrdiff_t>(hi - 1), before);
    band.lower_threshold = values[work[lo - 1]];
  }
  band.indices.assign(first + static_cast<std::ptrdiff_t>(lo), first + static_cast<std::ptrdiff_t>(hi));
  if (sorted) std::sort(band.indices.begin(), band.indices.end());
  return band;
}

std::vector<std::size_t> lower_set(std::span<const double> values, const QuantileSpec& spec) {
  if (values.size() != spec.m) throw Error(ErrorKind::InvalidArgument, "multiset size mismatch");
  return rank_band(values, 0, spec.count()).indices;
}

}  // namespace kqrk
