#include "kqrk/bounds.hpp"

#include <charconv>
#include <cmath>
#include <initializer_list>
#include <limits>

#include "kqrk/error.hpp"
#include "kqrk/svd.hpp"
#include "kqrk/sysgen.hpp"

namespace kqrk::bounds {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::satisfied: return "satisfied";
    case Verdict::violated: return "violated";
    case Verdict::unknown: return "unknown";
  }
  return "?";
}

SigmaOptions SigmaOptions::parse(std::string_view text) {
  SigmaOptions o;
  if (text == "exact") return o;
  constexpr std::string_view prefix = "sampled:";
  if (text.substr(0, prefix.size()) == prefix) {
    const auto digits = text.substr(prefix.size());
    std::uint64_t n = 0;
    const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (res.ec == std::errc() && res.ptr == digits.data() + digits.size() && n > 0) {
      o.mode = SigmaMode::sampled;
      o.samples = n;
      return o;
    }
  }
  throw Error(ErrorKind::InvalidArgument, "sigma mode must be 'exact' or 'sampled:N' with N > 0, got '" +
                                              std::string(text) + "'");
}

std::string SigmaOptions::str() const {
  return mode == SigmaMode::exact ? "exact" : "sampled:" + std::to_string(samples);
}

RobustParams RobustParams::for_qrk(Rational beta, Rational q) { return {beta, q, std::nullopt}; }

RobustParams RobustParams::for_dqrk(Rational beta, Rational q0, Rational q) { return {beta, q, q0}; }

Rational RobustParams::p() const {
  const Rational width = q0 ? q - *q0 : q;
  return (width - beta) / width;
}

Rational RobustParams::r() const {
  const Rational gap = Rational(1, 1) - q - beta;
  if (gap <= Rational(0, 1)) throw Error(ErrorKind::InvalidRegime, "r needs q + beta < 1");
  return beta / gap;
}

void RobustParams::validate() const {
  const Rational zero(0, 1), one(1, 1);
  const auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::InvalidRegime, what + " (beta = " + beta.str() + ", q = " + q.str() +
                                              (q0 ? ", q0 = " + q0->str() : std::string()) + ")");
  };
  if (beta < zero) fail("beta must be nonnegative");
  if (!(beta < q)) fail("need beta < q");
  if (!(q + beta < one)) fail("need q < 1 - beta");
  if (q0) {
    if (!(beta < *q0)) fail("need beta < q0");
    if (!(*q0 < q)) fail("need q0 < q");
    if (!(q - *q0 > beta)) fail("need q - q0 > beta");
  }
}

void RobustParams::check_counts(std::size_t m) const {
  (void)beta.count_of(m);
  (void)q.count_of(m);
  if (q0) (void)q0->count_of(m);
}

Rational infer_beta(std::span<const double> xi) {
  if (xi.empty()) throw Error(ErrorKind::InvalidArgument, "empty corruption vector");
  return Rational(static_cast<std::int64_t>(sysgen::support_size(xi)), static_cast<std::int64_t>(xi.size()));
}

bool SpectralSummary::exact() const {
  return sigma_q_beta.mode == SigmaMode::exact && (!sigma_q0_beta || sigma_q0_beta->mode == SigmaMode::exact);
}

namespace {

SigmaQMinResult sigma_at(const DenseMatrix& a, const Rational& level, const SigmaOptions& o) {
  if (o.mode == SigmaMode::exact) return sigma_q_min_exact(a, level, o.cap);
  return sigma_q_min_sampled(a, level, o.samples, o.seed);
}

// Neumaier summation.
double csum(std::initializer_list<double> terms) {
  double s = 0.0, c = 0.0;
  for (double t : terms) {
    const double u = s + t;
    c += std::abs(s) >= std::abs(t) ? (s - u) + t : (t - u) + s;
    s = u;
  }
  return s + c;
}

double abs_sum(std::initializer_list<double> terms) {
  double s = 0.0;
  for (double t : terms) s += std::abs(t);
  return s;
}

Verdict judge(double lhs, double rhs, bool exact) {
  if (lhs < rhs) return exact ? Verdict::satisfied : Verdict::unknown;
  return Verdict::violated;
}

// Raw quantities straight from the parameters and singular values, and the
// rewritten ones through p, r and the subset condition numbers.
struct Terms {
  double m, beta, q, q0, width;  // width = q (qRK) or q − q₀
  double gap;                     // 1 − q − β
  double sig, sig2;               // σ_max, σ²_max
  double sq2, sq02;               // σ²_{q−β,min}, σ²_{q₀−β,min}
  // rewritten
  double p, r;
  double kappa_inv_sq, kappa0_inv_sq;
  double khat_inv_sq, khat0_inv_sq;
  bool exact;
};

double inv_sq(double kappa) { return std::isinf(kappa) ? 0.0 : 1.0 / (kappa * kappa); }

Terms terms_for(const SpectralSummary& s, const RobustParams& params) {
  params.validate();
  if (s.m == 0 || !(s.sigma_max > 0.0)) throw Error(ErrorKind::InvalidArgument, "spectral summary is empty");
  Terms t{};
  t.m = static_cast<double>(s.m);
  t.beta = params.beta.to_double();
  t.q = params.q.to_double();
  t.q0 = params.q0 ? params.q0->to_double() : 0.0;
  t.width = t.q - t.q0;
  t.gap = 1.0 - t.q - t.beta;
  t.sig = s.sigma_max;
  t.sig2 = s.sigma_max * s.sigma_max;
  const double sq = s.sigma_q_beta.value;
  t.sq2 = sq * sq;
  const double sq0 = s.sigma_q0_beta ? s.sigma_q0_beta->value : 0.0;
  t.sq02 = sq0 * sq0;

  t.p = params.p().to_double();
  t.r = params.r().to_double();
  const auto safe_div = [](double a, double b) { return b == 0.0 ? std::numeric_limits<double>::infinity() : a / b; };
  t.kappa_inv_sq = inv_sq(safe_div(s.sigma_max, sq));
  t.khat_inv_sq = inv_sq(safe_div(std::sqrt(t.q * t.m), sq));
  if (params.q0) {
    if (!s.sigma_q0_beta) throw Error(ErrorKind::InvalidArgument, "summary lacks the q0 - beta level");
    t.kappa0_inv_sq = inv_sq(safe_div(s.sigma_max, sq0));
    t.khat0_inv_sq = inv_sq(safe_div(std::sqrt(t.q0 * t.m), sq0));
  }
  t.exact = s.exact();
  return t;
}

// 2√β/√(1−q−β) + β/(1−q−β), the raw form of 2√r + r.
double raw_corruption_factor(const Terms& t) { return 2.0 * std::sqrt(t.beta) / std::sqrt(t.gap) + t.beta / t.gap; }

void finish(RateBound& b, bool exact) {
  b.condition.verdict = judge(b.condition.lhs, b.condition.rhs, exact);
  b.condition_rewritten.verdict = judge(b.condition_rewritten.lhs, b.condition_rewritten.rhs, exact);
}

HorizonBound make_horizon(RateBound rate, double coefficient, double noise_sq) {
  HorizonBound h;
  h.rate = rate;
  h.coefficient = coefficient;
  h.noise_sq = noise_sq;
  h.nonpositive_c = !(rate.c > 0.0);
  if (!h.nonpositive_c) h.horizon = coefficient * noise_sq / rate.c;
  h.coefficient_below_two = coefficient < 2.0;
  return h;
}

RateBound qrk_eh_rate(const Terms& t) {
  RateBound b;
  const double a1 = (t.q - t.beta) * t.sq2 / (t.q * t.q * t.m);
  const double a2 = -t.beta / t.q;
  const double a3 = -2.0 * t.sig2 * t.beta / (t.q * t.m * t.gap);
  const double a4 = -4.0 * t.sig * t.beta / (t.q * std::sqrt(t.m) * std::sqrt(t.gap));
  b.c = csum({a1, a2, a3, a4});
  b.magnitude = abs_sum({a1, a2, a3, a4});
  b.c_rewritten = csum({t.p * t.khat_inv_sq, -(t.beta + 2.0 * t.sig2 * t.r / t.m +
                                               4.0 * t.sig * std::sqrt(t.beta * t.r) / std::sqrt(t.m)) /
                                                 t.q});
  b.condition = {(t.q / (t.q - t.beta)) * (t.beta * t.m / t.sig2 + 2.0 * t.beta / t.gap +
                                           4.0 * t.beta * std::sqrt(t.m) / (t.sig * std::sqrt(t.gap))),
                 t.sq2 / t.sig2, Verdict::unknown};
  b.condition_rewritten = {(1.0 / t.p) * (t.beta * t.m / t.sig2 + 2.0 * t.r +
                                          4.0 * std::sqrt(t.beta * t.m) * std::sqrt(t.r) / t.sig),
                           t.kappa_inv_sq, Verdict::unknown};
  finish(b, t.exact);
  return b;
}

RateBound dqrk_eh_rate(const Terms& t) {
  RateBound b;
  const double a1 = (t.width - t.beta) * t.sq2 / (t.width * t.q * t.m);
  const double a2 = -t.beta / t.width;
  const double a3 = -2.0 * t.sig2 * t.beta / (t.width * t.m * t.gap);
  const double a4 = -4.0 * t.sig * t.beta / (t.width * std::sqrt(t.m) * std::sqrt(t.gap));
  b.c = csum({a1, a2, a3, a4});
  b.magnitude = abs_sum({a1, a2, a3, a4});
  b.c_rewritten = csum({t.p * t.khat_inv_sq, -(t.beta + 2.0 * t.sig2 * t.r / t.m +
                                               4.0 * t.sig * std::sqrt(t.beta * t.r) / std::sqrt(t.m)) /
                                                 t.width});
  b.condition = {(t.q / (t.width - t.beta)) * (t.beta * t.m / t.sig2 + 2.0 * t.beta / t.gap +
                                               4.0 * t.beta * std::sqrt(t.m) / (t.sig * std::sqrt(t.gap))),
                 t.sq2 / t.sig2, Verdict::unknown};
  b.condition_rewritten = {(t.q / (t.width * t.p)) * (t.beta * t.m / t.sig2 + 2.0 * t.r +
                                                      4.0 * std::sqrt(t.beta * t.m) * std::sqrt(t.r) / t.sig),
                           t.kappa_inv_sq, Verdict::unknown};
  finish(b, t.exact);
  return b;
}

void require_qrk(const RobustParams& p) {
  if (p.is_dqrk()) throw Error(ErrorKind::InvalidArgument, "expected single-quantile parameters");
}

void require_dqrk(const RobustParams& p) {
  if (!p.is_dqrk()) throw Error(ErrorKind::InvalidArgument, "expected band parameters with q0");
}

double eps_order(std::span<const double> epsilon, std::size_t j) {
  return j > epsilon.size() ? 0.0 : sysgen::ordered_magnitude(epsilon, j);
}

}  // namespace

SpectralSummary summarize(const DenseMatrix& a, const RobustParams& params, const SigmaOptions& options) {
  params.validate();
  params.check_counts(a.rows());
  if (options.mode == SigmaMode::sampled && options.samples == 0) {
    throw Error(ErrorKind::InvalidArgument, "sampled mode needs a positive sample count");
  }
  SpectralSummary s = summarize_extremes(a);
  s.sigma_q_beta = sigma_at(a, params.q - params.beta, options);
  if (params.q0) s.sigma_q0_beta = sigma_at(a, *params.q0 - params.beta, options);
  return s;
}

SpectralSummary summarize_extremes(const DenseMatrix& a) {
  SpectralSummary s;
  s.m = a.rows();
  s.n = a.cols();
  const auto ext = singular_extremes(a);
  s.sigma_max = ext.sigma_max;
  s.sigma_min = ext.sigma_min;
  s.frobenius_sq = a.frobenius_sq();
  return s;
}

RkHorizon rk_horizon(const SpectralSummary& s, std::span<const double> epsilon, std::span<const double> row_norms) {
  if (!(s.sigma_min >= 1e-12 * s.sigma_max) || s.sigma_min == 0.0) {
    throw Error(ErrorKind::FullRankViolation, "matrix is rank deficient (sigma_min = " + std::to_string(s.sigma_min) + ")");
  }
  if (epsilon.size() != s.m) throw Error(ErrorKind::InvalidArgument, "corruption vector length differs from m");
  if (!row_norms.empty() && row_norms.size() != s.m) throw Error(ErrorKind::InvalidArgument, "row norm count differs from m");
  double worst = 0.0;
  for (std::size_t j = 0; j < s.m; ++j) {
    const double w = row_norms.empty() ? 1.0 : row_norms[j] * row_norms[j];
    worst = std::max(worst, epsilon[j] * epsilon[j] / w);
  }
  const double smin2 = s.sigma_min * s.sigma_min;
  return {1.0 - smin2 / s.frobenius_sq, s.frobenius_sq / smin2 * worst};
}

RateBound qrk_rate_original(const SpectralSummary& s, const RobustParams& params) {
  require_qrk(params);
  const Terms t = terms_for(s, params);
  RateBound b;
  const double a1 = (t.q - t.beta) * t.sq2 / (t.q * t.q * t.m);
  const double a2 = -(t.sig2 / (t.q * t.m)) * raw_corruption_factor(t);
  b.c = csum({a1, a2});
  b.magnitude = abs_sum({a1, a2});
  b.c_rewritten = csum({t.p * t.khat_inv_sq, -(t.sig2 / (t.q * t.m)) * (2.0 * std::sqrt(t.r) + t.r)});
  b.condition = {(t.q / (t.q - t.beta)) * raw_corruption_factor(t), t.sq2 / t.sig2, Verdict::unknown};
  b.condition_rewritten = {(1.0 / t.p) * (2.0 * std::sqrt(t.r) + t.r), t.kappa_inv_sq, Verdict::unknown};
  finish(b, t.exact);
  return b;
}

RateBound qrk_rate_alternative(const SpectralSummary& s, const RobustParams& params) {
  require_qrk(params);
  const Terms t = terms_for(s, params);
  RateBound b;
  const double a1 = (t.q - t.beta) * t.sq2 / (t.q * t.q * t.m);
  const double a2 = -t.beta / t.q;
  const double a3 = -2.0 * t.sig2 * t.beta / (t.q * t.m * t.gap);
  b.c = csum({a1, a2, a3});
  b.magnitude = abs_sum({a1, a2, a3});
  b.c_rewritten = csum({t.p * t.khat_inv_sq, -(t.beta + 2.0 * t.sig2 * t.r / t.m) / t.q});
  b.condition = {(t.q / (t.q - t.beta)) * (t.beta * t.m / t.sig2 + 2.0 * t.beta / t.gap), t.sq2 / t.sig2,
                 Verdict::unknown};
  b.condition_rewritten = {(1.0 / t.p) * (t.beta * t.m / t.sig2 + 2.0 * t.r), t.kappa_inv_sq, Verdict::unknown};
  finish(b, t.exact);
  return b;
}

RateBound dqrk_rate_original(const SpectralSummary& s, const RobustParams& params) {
  require_dqrk(params);
  const Terms t = terms_for(s, params);
  RateBound b;
  const double a1 = (t.width - t.beta) * t.sq2 / (t.width * t.q * t.m);
  const double a2 = (t.width - t.beta) * t.sq02 / (t.width * t.q0 * t.q * t.m * t.m);
  const double a3 = -(t.sig2 / (t.width * t.m)) * raw_corruption_factor(t);
  b.c = csum({a1, a2, a3});
  b.magnitude = abs_sum({a1, a2, a3});
  b.c_rewritten = csum({t.p * t.khat_inv_sq, t.p * t.khat0_inv_sq / (t.q * t.m),
                        -(t.sig2 / (t.width * t.m)) * (2.0 * std::sqrt(t.r) + t.r)});
  b.condition = {(t.q / (t.width - t.beta)) * raw_corruption_factor(t), (t.sq2 + t.sq02 / (t.q0 * t.m)) / t.sig2,
                 Verdict::unknown};
  b.condition_rewritten = {(t.q / (t.width * t.p)) * (2.0 * std::sqrt(t.r) + t.r),
                           t.kappa_inv_sq + t.kappa0_inv_sq / (t.q0 * t.m), Verdict::unknown};
  finish(b, t.exact);
  return b;
}

RateBound dqrk_rate_alternative(const SpectralSummary& s, const RobustParams& params) {
  require_dqrk(params);
  const Terms t = terms_for(s, params);
  RateBound b;
  const double a1 = (t.width - t.beta) * t.sq2 / (t.width * t.q * t.m);
  const double a2 = (t.width - t.beta) * t.sq02 / (t.width * t.q0 * t.q * t.m * t.m);
  const double a3 = -t.beta / t.width;
  const double a4 = -2.0 * t.sig2 * t.beta / (t.width * t.m * t.gap);
  b.c = csum({a1, a2, a3, a4});
  b.magnitude = abs_sum({a1, a2, a3, a4});
  b.c_rewritten = csum({t.p * t.khat_inv_sq, t.p * t.khat0_inv_sq / (t.q * t.m),
                        -(t.beta + 2.0 * t.sig2 * t.r / t.m) / t.width});
  b.condition = {(t.q / (t.width - t.beta)) * (t.beta * t.m / t.sig2 + 2.0 * t.beta / t.gap),
                 (t.sq2 + t.sq02 / (t.q0 * t.m)) / t.sig2, Verdict::unknown};
  b.condition_rewritten = {(t.q / (t.width * t.p)) * (t.beta * t.m / t.sig2 + 2.0 * t.r),
                           t.kappa_inv_sq + t.kappa0_inv_sq / (t.q0 * t.m), Verdict::unknown};
  finish(b, t.exact);
  return b;
}

namespace {

RateComparison compare(const Terms& t, double shared) {
  RateComparison c;
  c.alpha1 = 1.0 - shared + (t.beta + 2.0 * t.sig2 * t.r / t.m) / t.width;
  c.alpha2 = 1.0 - shared + (t.sig2 / (t.width * t.m)) * (2.0 * std::sqrt(t.r) + t.r);
  c.r_below_4 = t.r < 4.0;
  const double denom = 2.0 * std::sqrt(t.beta) * std::sqrt(t.gap) - t.beta;
  c.sigma_max_sq_threshold = denom > 0.0 ? t.beta * t.m * t.gap / denom : std::numeric_limits<double>::infinity();
  c.hypotheses_hold = c.r_below_4 && t.sig2 > c.sigma_max_sq_threshold;
  c.alpha1_lt_alpha2 = c.alpha1 < c.alpha2;
  return c;
}

}  // namespace

RateComparison compare_qrk_rates(const SpectralSummary& s, const RobustParams& params) {
  require_qrk(params);
  const Terms t = terms_for(s, params);
  return compare(t, t.p * t.khat_inv_sq);
}

RateComparison compare_dqrk_rates(const SpectralSummary& s, const RobustParams& params) {
  require_dqrk(params);
  const Terms t = terms_for(s, params);
  return compare(t, t.p * (t.khat_inv_sq + t.khat0_inv_sq / (t.q * t.m)));
}

HorizonBound qrk_error_horizon(const SpectralSummary& s, const RobustParams& params, double eta_inf) {
  require_qrk(params);
  if (!(eta_inf >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise level must be nonnegative");
  const Terms t = terms_for(s, params);
  return make_horizon(qrk_eh_rate(t), 2.0 * t.r * (1.0 - t.q) / t.q + 1.0, eta_inf * eta_inf);
}

HorizonBound qrk_general_horizon(const SpectralSummary& s, const RobustParams& params,
                                 std::span<const double> epsilon) {
  if (epsilon.size() != s.m) throw Error(ErrorKind::InvalidArgument, "corruption vector length differs from m");
  const std::size_t k = params.beta.count_of(s.m);
  return qrk_error_horizon(s, params, eps_order(epsilon, k + 1));
}

HorizonBound dqrk_error_horizon(const SpectralSummary& s, const RobustParams& params, double eta_inf) {
  require_dqrk(params);
  if (!(eta_inf >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise level must be nonnegative");
  const Terms t = terms_for(s, params);
  return make_horizon(dqrk_eh_rate(t), 2.0 * t.r * (1.0 - t.q) / t.width + 1.0, eta_inf * eta_inf);
}

EhComparison eh_comparison_condition(const SpectralSummary& s, const RobustParams& params,
                                     std::span<const double> epsilon) {
  if (epsilon.size() != s.m) throw Error(ErrorKind::InvalidArgument, "corruption vector length differs from m");
  const double top = sysgen::ordered_magnitude(epsilon, 1);
  if (top == 0.0) throw Error(ErrorKind::ZeroCorruption, "corruption is identically zero; comparison is vacuous");
  if (!(s.sigma_min > 0.0)) throw Error(ErrorKind::FullRankViolation, "sigma_min is zero");
  const std::size_t k = params.beta.count_of(s.m);
  const HorizonBound h = qrk_error_horizon(s, params, 0.0);

  EhComparison out;
  out.lhs = eps_order(epsilon, k + 1) / top;
  if (h.nonpositive_c) return out;  // rhs undefined, verdict unknown
  out.rhs = std::sqrt(h.rate.c * static_cast<double>(s.m) / (s.sigma_min * s.sigma_min * h.coefficient));
  out.qrk_beats_rk = judge(out.lhs, *out.rhs, s.exact());
  return out;
}

TimeVaryingComparison timevar_constants(const SpectralSummary& s, const RobustParams& params) {
  require_qrk(params);
  if (params.beta.is_zero()) throw Error(ErrorKind::InvalidRegime, "time-varying constants need beta > 0");
  const Terms t = terms_for(s, params);
  TimeVaryingComparison c;
  c.s = std::sqrt((1.0 - t.beta) / t.beta);
  const double r = t.r, sv = c.s;
  const double tail = (t.sig / (t.q * t.m)) * (1.0 / std::sqrt(t.beta * t.m)) * (r + r * r * sv);
  c.phi = csum({t.khat_inv_sq * t.p, -(t.sig2 / (t.q * t.m)) * (2.0 * r * sv + r * r * sv * sv), -tail});
  c.zeta = tail + r * r / (t.q * t.beta * t.m * t.m);
  c.coefficient = 1.0 + c.zeta * t.m * t.m;
  c.ours_coefficient = 2.0 * r * (1.0 - t.q) / t.q + 1.0;
  c.m_limit = 1.0 / (4.0 * std::sqrt(t.beta) * std::sqrt(t.gap)) +
              std::sqrt(1.0 - t.beta) / (4.0 * std::pow(std::sqrt(t.gap), 3));
  c.m_condition = t.m < c.m_limit;
  const double denom = std::sqrt(t.beta) * std::sqrt(t.gap) - t.beta;
  c.sigma_max_sq_threshold =
      denom > 0.0 ? (t.beta * t.m / 2.0) * (t.gap / denom) : std::numeric_limits<double>::infinity();
  c.sigma_condition = r < 1.0 && t.sig2 > c.sigma_max_sq_threshold;
  c.c_error_horizon = qrk_eh_rate(t).c;
  c.phi_below_c = c.phi < c.c_error_horizon;
  return c;
}

bool coefficient_ratio_bound_holds(double beta, double q) {
  const double gap = 1.0 - q - beta;
  const double r = beta / gap;
  const double ours = 2.0 * r * (1.0 - q) / q + 1.0;
  const double bounded = 0.5 * (r * (1.0 - beta) * (1.0 - beta) / (q * gap) + 1.0);
  return ours <= 4.0 * bounded;
}

QraskComparison qrask_coefficient_comparison(const SpectralSummary& s, const RobustParams& params) {
  require_qrk(params);
  if (params.beta.is_zero()) throw Error(ErrorKind::InvalidRegime, "comparison needs beta > 0");
  const Terms t = terms_for(s, params);
  QraskComparison c;
  const double r = t.r;
  c.bounded_part = 0.5 * (r * (1.0 - t.beta) * (1.0 - t.beta) / (t.q * t.gap) + 1.0);
  c.qrask_coefficient = (2.0 * r * (1.0 - t.beta) / (t.q * std::sqrt(t.beta))) *
                            (1.0 + r * std::sqrt((1.0 - t.beta) / t.beta)) *
                            std::sqrt(static_cast<double>(s.n) / t.m) * t.sig +
                        c.bounded_part;
  c.ours_coefficient = 2.0 * r * (1.0 - t.q) / t.q + 1.0;
  c.ratio_bound_holds = c.ours_coefficient <= 4.0 * c.bounded_part;
  return c;
}

namespace {

using nlohmann::json;

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json opt_num(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

json to_json(const SigmaQMinResult& r) {
  return {{"value", num(r.value)},
          {"mode", to_string(r.mode)},
          {"subsets_examined", r.subsets_examined},
          {"upper_bound_only", r.is_upper_bound_only}};
}

json to_json(const Condition& c) {
  return {{"lhs", num(c.lhs)}, {"rhs", num(c.rhs)}, {"verdict", to_string(c.verdict)}};
}

json to_json(const RateBound& b) {
  return {{"C", num(b.c)},
          {"C_rewritten", num(b.c_rewritten)},
          {"magnitude", num(b.magnitude)},
          {"condition", to_json(b.condition)},
          {"condition_rewritten", to_json(b.condition_rewritten)}};
}

json to_json(const HorizonBound& h) {
  return {{"rate", to_json(h.rate)},
          {"coefficient", num(h.coefficient)},
          {"noise_sq", num(h.noise_sq)},
          {"horizon", opt_num(h.horizon)},
          {"nonpositive_c", h.nonpositive_c},
          {"coefficient_below_two", h.coefficient_below_two}};
}

json to_json(const RateComparison& c) {
  return {{"alpha1", num(c.alpha1)},
          {"alpha2", num(c.alpha2)},
          {"r_below_4", c.r_below_4},
          {"sigma_max_sq_threshold", num(c.sigma_max_sq_threshold)},
          {"hypotheses_hold", c.hypotheses_hold},
          {"alpha1_lt_alpha2", c.alpha1_lt_alpha2}};
}

// Runs one bound; a library error becomes an entry instead of aborting the report.
template <class F>
void add(json& out, const std::string& tag, F&& fn) {
  json entry;
  try {
    entry = fn();
  } catch (const Error& e) {
    entry = {{"error", to_string(e.kind())}, {"message", e.what()}};
  }
  entry["tag"] = tag;
  out.push_back(std::move(entry));
}

}  // namespace

nlohmann::json bound_report(const SpectralSummary& s, const RobustParams& params, const ReportInputs& inputs) {
  params.validate();
  const RobustParams single = RobustParams::for_qrk(params.beta, params.q);

  json spectrum = {{"m", s.m},
                   {"n", s.n},
                   {"sigma_max", num(s.sigma_max)},
                   {"sigma_min", num(s.sigma_min)},
                   {"frobenius_sq", num(s.frobenius_sq)},
                   {"sigma_q_minus_beta_min", to_json(s.sigma_q_beta)}};
  if (s.sigma_q0_beta) spectrum["sigma_q0_minus_beta_min"] = to_json(*s.sigma_q0_beta);

  json p = {{"beta", params.beta.str()},
            {"q", params.q.str()},
            {"p", params.p().str()},
            {"r", params.r().str()},
            {"p_single", single.p().str()}};
  if (params.q0) p["q0"] = params.q0->str();

  std::optional<double> eta = inputs.eta_inf;
  if (!eta && inputs.epsilon && inputs.epsilon->size() == s.m) {
    eta = eps_order(*inputs.epsilon, params.beta.count_of(s.m) + 1);
  }

  json bounds = json::array();
  add(bounds, "qrk.rate.original", [&] { return to_json(qrk_rate_original(s, single)); });
  add(bounds, "qrk.rate.alternative", [&] { return to_json(qrk_rate_alternative(s, single)); });
  add(bounds, "qrk.rate.comparison", [&] { return to_json(compare_qrk_rates(s, single)); });
  if (eta) add(bounds, "qrk.error_horizon", [&] { return to_json(qrk_error_horizon(s, single, *eta)); });
  if (inputs.epsilon) {
    const auto& eps = *inputs.epsilon;
    add(bounds, "qrk.general_horizon", [&] { return to_json(qrk_general_horizon(s, single, eps)); });
    add(bounds, "rk.error_horizon", [&] {
      const auto rk = rk_horizon(s, eps);
      return json{{"decay", num(rk.decay)}, {"horizon", num(rk.horizon)}};
    });
    add(bounds, "qrk.vs_rk.horizon_condition", [&] {
      const auto c = eh_comparison_condition(s, single, eps);
      return json{{"lhs", num(c.lhs)}, {"rhs", opt_num(c.rhs)}, {"verdict", to_string(c.qrk_beats_rk)}};
    });
  }
  if (!params.beta.is_zero()) {
    add(bounds, "qrk.vs_time_varying", [&] {
      const auto c = timevar_constants(s, single);
      return json{{"s", num(c.s)},
                  {"phi", num(c.phi)},
                  {"zeta", num(c.zeta)},
                  {"coefficient", num(c.coefficient)},
                  {"ours_coefficient", num(c.ours_coefficient)},
                  {"m_limit", num(c.m_limit)},
                  {"m_condition", c.m_condition},
                  {"sigma_max_sq_threshold", num(c.sigma_max_sq_threshold)},
                  {"sigma_condition", c.sigma_condition},
                  {"C_error_horizon", num(c.c_error_horizon)},
                  {"phi_below_C", c.phi_below_c}};
    });
    add(bounds, "qrk.vs_qrask", [&] {
      const auto c = qrask_coefficient_comparison(s, single);
      return json{{"qrask_coefficient", num(c.qrask_coefficient)},
                  {"ours_coefficient", num(c.ours_coefficient)},
                  {"bounded_part", num(c.bounded_part)},
                  {"ratio_bound_holds", c.ratio_bound_holds}};
    });
  }
  if (params.is_dqrk()) {
    add(bounds, "dqrk.rate.original", [&] { return to_json(dqrk_rate_original(s, params)); });
    add(bounds, "dqrk.rate.alternative", [&] { return to_json(dqrk_rate_alternative(s, params)); });
    add(bounds, "dqrk.rate.comparison", [&] { return to_json(compare_dqrk_rates(s, params)); });
    if (eta) add(bounds, "dqrk.error_horizon", [&] { return to_json(dqrk_error_horizon(s, params, *eta)); });
  }

  json report = {{"schema_version", kReportSchemaVersion},
                 {"params", p},
                 {"spectrum", spectrum},
                 {"condition_mode", s.exact() ? "exact" : "sampled"},
                 {"eta_inf", opt_num(eta)},
                 {"bounds", bounds}};
  if (params.is_dqrk()) {
    report["start_hypothesis"] = !inputs.start_on_hyperplane
                                     ? "unknown"
                                     : (*inputs.start_on_hyperplane ? "satisfied" : "violated");
  }
  return report;
}

}  // namespace kqrk::bounds
