#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "kqrk/bounds.hpp"
#include "kqrk/solvers.hpp"
#include "kqrk/sysgen.hpp"
#include "support.hpp"

using namespace kqrk;
using namespace kqrk::bounds;
using testing::DD;
using testing::dd_sqrt;
using testing::throws_kind;

namespace {

DD dd(const Rational& v) { return DD(static_cast<double>(v.num())) / DD(static_cast<double>(v.den())); }

bool close_to(double value, double oracle, double scale, double tol = 1e-12) {
  return std::abs(value - oracle) <= tol * std::max(scale, std::abs(oracle));
}

// Extended-precision re-derivations from raw σ values.
struct Oracle {
  DD m, beta, q, q0, gap, sig, sig2, sq2, sq02;

  Oracle(const SpectralSummary& s, const RobustParams& p) {
    m = DD(static_cast<double>(s.m));
    beta = dd(p.beta);
    q = dd(p.q);
    q0 = p.q0 ? dd(*p.q0) : DD(0.0);
    gap = DD(1.0) - q - beta;
    sig = DD(s.sigma_max);
    sig2 = sig * sig;
    sq2 = DD(s.sigma_q_beta.value) * DD(s.sigma_q_beta.value);
    if (s.sigma_q0_beta) sq02 = DD(s.sigma_q0_beta->value) * DD(s.sigma_q0_beta->value);
  }

  DD factor() const { return DD(2.0) * dd_sqrt(beta) / dd_sqrt(gap) + beta / gap; }

  double qrk_original() const {
    return ((q - beta) * sq2 / (q * q * m) - sig2 / (q * m) * factor()).value();
  }
  double qrk_alternative() const {
    return ((q - beta) * sq2 / (q * q * m) - beta / q - DD(2.0) * sig2 * beta / (q * m * gap)).value();
  }
  double qrk_horizon_c() const {
    return ((q - beta) * sq2 / (q * q * m) - beta / q - DD(2.0) * sig2 * beta / (q * m * gap) -
            DD(4.0) * sig * beta / (q * dd_sqrt(m) * dd_sqrt(gap)))
        .value();
  }
  DD w() const { return q - q0; }
  DD band_gain() const {
    return (w() - beta) * (sq2 / (w() * q * m) + sq02 / (w() * q0 * q * m * m));
  }
  double dqrk_original() const { return (band_gain() - sig2 / (w() * m) * factor()).value(); }
  double dqrk_alternative() const {
    return (band_gain() - beta / w() - DD(2.0) * sig2 * beta / (w() * m * gap)).value();
  }
  double dqrk_horizon_c() const {
    return ((w() - beta) * sq2 / (w() * q * m) - beta / w() - DD(2.0) * sig2 * beta / (w() * m * gap) -
            DD(4.0) * sig * beta / (w() * dd_sqrt(m) * dd_sqrt(gap)))
        .value();
  }
};

DenseMatrix ones_column(std::size_t m) { return DenseMatrix(m, 1, std::vector<double>(m, 1.0), true); }

// Summary assembled by hand, for formulas that only read σ values.
SpectralSummary synthetic(std::size_t m, std::size_t n, double sigma_max, double sigma_q) {
  SpectralSummary s;
  s.m = m;
  s.n = n;
  s.sigma_max = sigma_max;
  s.sigma_min = sigma_q;
  s.frobenius_sq = static_cast<double>(m);
  s.sigma_q_beta.value = sigma_q;
  s.sigma_q0_beta = s.sigma_q_beta;
  return s;
}

const RobustParams kExpQ = RobustParams::for_qrk(Rational(1, 20), Rational(4, 5));
const RobustParams kExpD = RobustParams::for_dqrk(Rational(1, 20), Rational(3, 5), Rational(4, 5));

// (m, β·m, q·m) triples for small exhaustive sweeps with n = 2.
struct SmallCase {
  std::size_t m;
  std::int64_t b, q0, q;
};
const SmallCase kSmall[] = {{10, 1, 3, 6}, {11, 1, 3, 6}, {12, 1, 4, 7}, {13, 1, 4, 7}, {14, 1, 4, 8}};

RobustParams small_qrk(const SmallCase& c) {
  const auto m = static_cast<std::int64_t>(c.m);
  return RobustParams::for_qrk(Rational(c.b, m), Rational(c.q, m));
}

RobustParams small_dqrk(const SmallCase& c) {
  const auto m = static_cast<std::int64_t>(c.m);
  return RobustParams::for_dqrk(Rational(c.b, m), Rational(c.q0, m), Rational(c.q, m));
}

void visit_verdicts(const nlohmann::json& j, const std::function<void(const std::string&)>& fn) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "verdict" && it.value().is_string()) fn(it.value().get<std::string>());
      visit_verdicts(it.value(), fn);
    }
  } else if (j.is_array()) {
    for (const auto& v : j) visit_verdicts(v, fn);
  }
}

}  // namespace

TEST_CASE("parameter derivations") {
  CHECK(kExpQ.p() == Rational(15, 16));
  CHECK(kExpQ.p().to_double() == 0.9375);
  CHECK(kExpQ.r() == Rational(1, 3));
  CHECK(kExpD.p() == Rational(3, 4));
  CHECK(kExpD.r() == Rational(1, 3));

  CHECK(throws_kind(ErrorKind::InvalidRegime, [] { RobustParams::for_qrk(Rational(1, 5), Rational(1, 5)).validate(); }));
  CHECK(throws_kind(ErrorKind::InvalidRegime, [] { RobustParams::for_qrk(Rational(1, 5), Rational(4, 5)).validate(); }));
  CHECK(throws_kind(ErrorKind::InvalidRegime,
                    [] { RobustParams::for_dqrk(Rational(1, 10), Rational(1, 20), Rational(1, 2)).validate(); }));
  CHECK(throws_kind(ErrorKind::InvalidRegime,
                    [] { RobustParams::for_dqrk(Rational(1, 10), Rational(9, 20), Rational(1, 2)).validate(); }));
  CHECK(throws_kind(ErrorKind::NonIntegerQuantile, [] { kExpQ.check_counts(30); }));
  CHECK_NOTHROW(kExpD.check_counts(100));

  const std::vector<double> xi{0, 3, 0, 0, -1, 0, 0, 0, 0, 0};
  CHECK(infer_beta(xi) == Rational(1, 5));

  CHECK(SigmaOptions::parse("exact").mode == SigmaMode::exact);
  const auto sampled = SigmaOptions::parse("sampled:250");
  CHECK(sampled.mode == SigmaMode::sampled);
  CHECK(sampled.samples == 250);
  CHECK(sampled.str() == "sampled:250");
  for (const char* bad : {"sampled:", "sampled:0", "sampled:x", "approx"}) {
    CHECK(throws_kind(ErrorKind::InvalidArgument, [&] { (void)SigmaOptions::parse(bad); }));
  }
}

TEST_CASE("plain RK horizon") {
  SUBCASE("identity with a unit spike gives n") {
    for (std::size_t n : {1u, 3u, 7u}) {
      const auto a = DenseMatrix::identity(n);
      const auto s = summarize_extremes(a);
      std::vector<double> eps(n, 0.0);
      eps[0] = 1.0;
      const auto h = rk_horizon(s, eps);
      CHECK(h.horizon == doctest::Approx(static_cast<double>(n)).epsilon(1e-12));
      CHECK(h.decay == doctest::Approx(1.0 - 1.0 / static_cast<double>(n)).epsilon(1e-12));
      const std::vector<double> zero(n, 0.0);
      CHECK(rk_horizon(s, zero).horizon == 0.0);
    }
  }
  SUBCASE("row norms divide the corruption") {
    const DenseMatrix a{{2, 0}, {0, 1}, {1, 1}};
    const auto s = summarize_extremes(a);
    const std::vector<double> eps{3, 1, 1};
    const std::vector<double> norms{2, 1, std::sqrt(2.0)};
    const double smin2 = s.sigma_min * s.sigma_min;
    CHECK(rk_horizon(s, eps, norms).horizon == doctest::Approx(7.0 / smin2 * 2.25).epsilon(1e-12));
  }
  SUBCASE("rank deficiency is refused") {
    const DenseMatrix a{{1, 1}, {2, 2}, {3, 3}};
    const auto s = summarize_extremes(a);
    const std::vector<double> eps{1, 0, 0};
    CHECK(throws_kind(ErrorKind::FullRankViolation, [&] { (void)rk_horizon(s, eps); }));
  }
  SUBCASE("bounds the empirical horizon of noisy RK") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      sysgen::GenSpec g;
      g.m = 200;
      g.n = 20;
      g.noise_stddev = 1.0;
      g.seed = seed;
      const auto prob = sysgen::generate(g);
      const auto s = summarize_extremes(prob.a);
      const auto eps = prob.epsilon();
      const auto bound = rk_horizon(s, eps);
      auto cfg = solvers::default_config(solvers::Method::rk);
      cfg.iterations = 1500;
      cfg.seed = seed;
      const auto trace = solvers::run(prob, cfg);
      CHECK(solvers::horizon_estimate(trace).value <= bound.horizon);
    }
  }
}

TEST_CASE("single-quantile rate constants against an extended-precision oracle") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto a = testing::gaussian_matrix(12, 2, seed);
    const auto p = RobustParams::for_qrk(Rational(1, 12), Rational(9, 12));
    const auto s = summarize(a, p);
    REQUIRE(s.exact());
    const Oracle o(s, p);

    const auto orig = qrk_rate_original(s, p);
    CHECK(close_to(orig.c, o.qrk_original(), orig.magnitude));
    CHECK(close_to(orig.c_rewritten, o.qrk_original(), orig.magnitude));
    const auto alt = qrk_rate_alternative(s, p);
    CHECK(close_to(alt.c, o.qrk_alternative(), alt.magnitude));
    CHECK(close_to(alt.c_rewritten, o.qrk_alternative(), alt.magnitude));
    const auto eh = qrk_error_horizon(s, p, 1.0);
    CHECK(close_to(eh.rate.c, o.qrk_horizon_c(), eh.rate.magnitude));
    CHECK(close_to(eh.rate.c_rewritten, o.qrk_horizon_c(), eh.rate.magnitude));
  }
}

TEST_CASE("band rate constants against an extended-precision oracle") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto a = testing::gaussian_matrix(12, 2, 100 + seed);
    const auto p = RobustParams::for_dqrk(Rational(1, 12), Rational(4, 12), Rational(8, 12));
    const auto s = summarize(a, p);
    REQUIRE(s.sigma_q0_beta);
    REQUIRE(s.exact());
    const Oracle o(s, p);

    const auto orig = dqrk_rate_original(s, p);
    CHECK(close_to(orig.c, o.dqrk_original(), orig.magnitude));
    CHECK(close_to(orig.c_rewritten, o.dqrk_original(), orig.magnitude));
    const auto alt = dqrk_rate_alternative(s, p);
    CHECK(close_to(alt.c, o.dqrk_alternative(), alt.magnitude));
    CHECK(close_to(alt.c_rewritten, o.dqrk_alternative(), alt.magnitude));
    const auto eh = dqrk_error_horizon(s, p, 1.0);
    CHECK(close_to(eh.rate.c, o.dqrk_horizon_c(), eh.rate.magnitude));
    CHECK(close_to(eh.rate.c_rewritten, o.dqrk_horizon_c(), eh.rate.magnitude));
  }
  CHECK(throws_kind(ErrorKind::InvalidArgument, [] {
    const auto s = synthetic(10, 1, 3.0, 1.0);
    (void)dqrk_rate_original(s, RobustParams::for_qrk(Rational(1, 10), Rational(1, 2)));
  }));
}

TEST_CASE("zero corruption collapses the penalties") {
  const auto a = testing::gaussian_matrix(10, 2, 5);
  const auto p = RobustParams::for_qrk(Rational(0, 1), Rational(7, 10));
  const auto s = summarize(a, p);
  const double sq2 = s.sigma_q_beta.value * s.sigma_q_beta.value;
  const double gain = sq2 / (0.7 * 10.0);
  CHECK(qrk_rate_original(s, p).c == doctest::Approx(gain).epsilon(1e-13));
  const auto alt = qrk_rate_alternative(s, p);
  CHECK(alt.c == doctest::Approx(gain).epsilon(1e-13));
  CHECK(alt.condition_rewritten.lhs == 0.0);
  CHECK(alt.condition_rewritten.verdict == Verdict::satisfied);
  CHECK(qrk_error_horizon(s, p, 0.0).rate.c == doctest::Approx(gain).epsilon(1e-13));

  const auto pd = RobustParams::for_dqrk(Rational(0, 1), Rational(3, 10), Rational(7, 10));
  const auto sd = summarize(a, pd);
  const double s02 = sd.sigma_q0_beta->value * sd.sigma_q0_beta->value;
  const double band = sq2 / (0.7 * 10.0) + s02 / (0.3 * 0.7 * 100.0);
  CHECK(dqrk_rate_original(sd, pd).c == doctest::Approx(band).epsilon(1e-13));
  CHECK(dqrk_rate_alternative(sd, pd).c == doctest::Approx(band).epsilon(1e-13));
}

TEST_CASE("alternative constant on a block-identity matrix") {
  // Five copies of e1 over five copies of e2: any 7 rows keep at least two of
  // each, so σ_{q−β,min} = √2 while σ_max = √5.
  std::vector<double> entries;
  for (int i = 0; i < 10; ++i) {
    entries.push_back(i < 5 ? 1.0 : 0.0);
    entries.push_back(i < 5 ? 0.0 : 1.0);
  }
  const DenseMatrix a(10, 2, entries, true);
  const auto p = RobustParams::for_qrk(Rational(1, 10), Rational(8, 10));
  const auto s = summarize(a, p);
  CHECK(s.sigma_q_beta.value == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(s.sigma_max == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
  // p = 7/8, r = 1: C = (7/8)(2/8) − (5/4)(1/10 + 2·5/10) = −37/32.
  const auto alt = qrk_rate_alternative(s, p);
  CHECK(alt.c == doctest::Approx(-37.0 / 32.0).epsilon(1e-12));
  CHECK(alt.c_rewritten == doctest::Approx(-37.0 / 32.0).epsilon(1e-12));
  CHECK(alt.condition.verdict == Verdict::violated);
  CHECK(alt.condition_rewritten.verdict == Verdict::violated);
}

TEST_CASE("experiment parameters on a 40x4 instance") {
  const auto a = testing::normalized_gaussian(40, 4, 3);
  const auto s = summarize(a, kExpQ, SigmaOptions::parse("sampled:500"));
  CHECK_FALSE(s.exact());
  const auto orig = qrk_rate_original(s, kExpQ);
  const auto alt = qrk_rate_alternative(s, kExpQ);
  const auto cmp = compare_qrk_rates(s, kExpQ);
  CHECK(cmp.alpha1 == doctest::Approx(1.0 - alt.c).epsilon(1e-12));
  CHECK(cmp.alpha2 == doctest::Approx(1.0 - orig.c).epsilon(1e-12));
  CHECK(cmp.r_below_4);
  CHECK(orig.condition.verdict != Verdict::satisfied);
  CHECK(alt.condition.verdict != Verdict::satisfied);
  if (cmp.hypotheses_hold) CHECK(cmp.alpha1_lt_alpha2);
}

TEST_CASE("rate comparison hypotheses") {
  SUBCASE("r at least four disables the comparison") {
    const auto p = RobustParams::for_qrk(Rational(1, 5), Rational(3, 4));
    CHECK(p.r() == Rational(4, 1));
    const auto cmp = compare_qrk_rates(synthetic(20, 2, 100.0, 1.0), p);
    CHECK_FALSE(cmp.r_below_4);
    CHECK_FALSE(cmp.hypotheses_hold);
  }
  SUBCASE("threshold at the experiment parameters") {
    const auto s = synthetic(1000, 200, 40.0, 1.0);
    const auto cmp = compare_qrk_rates(s, kExpQ);
    const DD beta(0.05), gap(0.15), m(1000.0);
    const double expected = (beta * m * gap / (DD(2.0) * dd_sqrt(beta) * dd_sqrt(gap) - beta)).value();
    CHECK(cmp.sigma_max_sq_threshold == doctest::Approx(expected).epsilon(1e-13));
    CHECK(cmp.hypotheses_hold == (1600.0 > expected));
    CHECK(cmp.alpha1_lt_alpha2);
  }
  SUBCASE("exhaustive small instances") {
    int single = 0, band = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      for (const auto& c : kSmall) {
        const auto a = testing::gaussian_matrix(c.m, 2, seed * 31 + c.m);
        const auto pq = small_qrk(c);
        const auto sq = summarize(a, pq);
        const auto cq = compare_qrk_rates(sq, pq);
        if (cq.hypotheses_hold) {
          ++single;
          CHECK(cq.alpha1_lt_alpha2);
        }
        const auto pd = small_dqrk(c);
        const auto sd = summarize(a, pd);
        const auto cd = compare_dqrk_rates(sd, pd);
        if (cd.hypotheses_hold) {
          ++band;
          CHECK(cd.alpha1_lt_alpha2);
        }
      }
    }
    MESSAGE("hypotheses held on " << single << " single and " << band << " band instances");
    CHECK(single >= 50);
    CHECK(band >= 50);
  }
}

TEST_CASE("raw and rewritten forms agree and conditions track the sign of C") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (const auto& c : kSmall) {
      const auto a = seed % 2 ? testing::gaussian_matrix(c.m, 2, seed) : testing::normalized_gaussian(c.m, 1, seed);
      const auto pq = small_qrk(c);
      const auto pd = small_dqrk(c);
      const auto sq = summarize(a, pq);
      const auto sd = summarize(a, pd);
      const RateBound rates[] = {qrk_rate_original(sq, pq),           qrk_rate_alternative(sq, pq),
                                 qrk_error_horizon(sq, pq, 1.0).rate, dqrk_rate_original(sd, pd),
                                 dqrk_rate_alternative(sd, pd),       dqrk_error_horizon(sd, pd, 1.0).rate};
      for (const auto& r : rates) {
        CHECK(std::abs(r.c - r.c_rewritten) <= 1e-12 * r.magnitude);
        CHECK(r.condition.verdict == r.condition_rewritten.verdict);
        if (std::abs(r.c) > 1e-9 * r.magnitude) {
          CHECK((r.condition.verdict == Verdict::satisfied) == (r.c > 0.0));
        }
      }
      // The horizon constant pays an extra positive term.
      CHECK(qrk_error_horizon(sq, pq, 1.0).rate.c < qrk_rate_alternative(sq, pq).c);
      CHECK(dqrk_error_horizon(sd, pd, 1.0).rate.c < dqrk_rate_alternative(sd, pd).c);
    }
  }
}

TEST_CASE("horizon coefficients") {
  const auto s = synthetic(100, 2, 10.0, 1.0);
  const auto h = qrk_error_horizon(s, kExpQ, 1.0);
  CHECK(h.coefficient == doctest::Approx(7.0 / 6.0).epsilon(1e-14));
  CHECK(h.coefficient_below_two);
  const auto hd = dqrk_error_horizon(s, kExpD, 1.0);
  CHECK(hd.coefficient == doctest::Approx(5.0 / 3.0).epsilon(1e-14));
  // This instance is far from certified: C is negative and the horizon stays undefined.
  CHECK(h.nonpositive_c);
  CHECK_FALSE(h.horizon.has_value());
  CHECK(throws_kind(ErrorKind::InvalidArgument, [&] { (void)qrk_error_horizon(s, kExpQ, -1.0); }));
}

TEST_CASE("certified single-column instance") {
  // 100 rows of ±1 with β = 1/100, q = 4/5: σ_{q−β,min} = √79, σ_max = 10.
  const auto a = ones_column(100);
  const auto p = RobustParams::for_qrk(Rational(1, 100), Rational(4, 5));
  const auto s = summarize(a, p);
  CHECK(s.sigma_q_beta.value == doctest::Approx(std::sqrt(79.0)).epsilon(1e-13));
  const Oracle o(s, p);

  const auto h0 = qrk_error_horizon(s, p, 0.0);
  CHECK(h0.rate.c == doctest::Approx(o.qrk_horizon_c()).epsilon(1e-13));
  CHECK(h0.rate.c > 0.7);
  CHECK(h0.rate.condition.verdict == Verdict::satisfied);
  REQUIRE(h0.horizon);
  CHECK(*h0.horizon == 0.0);

  SUBCASE("general horizon uses the (βm+1)-th magnitude") {
    std::vector<double> sparse(100, 0.0);
    sparse[17] = 50.0;
    CHECK(*qrk_general_horizon(s, p, sparse).horizon == 0.0);
    const std::vector<double> ones(100, 1.0);
    const auto full = qrk_general_horizon(s, p, ones);
    CHECK(*full.horizon == doctest::Approx(full.coefficient / full.rate.c).epsilon(1e-14));
  }
  SUBCASE("qRK beats RK once a single entry dominates") {
    std::vector<double> eps(100, 1.0);
    const double rhs = std::sqrt(h0.rate.c * 100.0 / (100.0 * h0.coefficient));
    int flips = 0;
    Verdict prev = Verdict::violated;
    for (double scale : {0.0, 0.05, 0.1, 0.5, 1.0, 10.0, 100.0}) {
      eps[0] = 1.0 + scale;
      const auto c = eh_comparison_condition(s, p, eps);
      REQUIRE(c.rhs);
      CHECK(*c.rhs == doctest::Approx(rhs).epsilon(1e-12));
      CHECK(c.lhs == doctest::Approx(1.0 / (1.0 + scale)).epsilon(1e-15));
      CHECK(c.qrk_beats_rk == (c.lhs < rhs ? Verdict::satisfied : Verdict::violated));
      flips += c.qrk_beats_rk != prev;
      prev = c.qrk_beats_rk;
    }
    CHECK(flips == 1);
    CHECK(prev == Verdict::satisfied);
    std::vector<double> sparse(100, 0.0);
    sparse[3] = -2.0;
    const auto c = eh_comparison_condition(s, p, sparse);
    CHECK(c.lhs == 0.0);
    CHECK(c.qrk_beats_rk == Verdict::satisfied);
    const std::vector<double> zero(100, 0.0);
    CHECK(throws_kind(ErrorKind::ZeroCorruption, [&] { (void)eh_comparison_condition(s, p, zero); }));
  }
}

TEST_CASE("generated corruption ranks match a sort and the canonical split") {
  sysgen::GenSpec g;
  g.m = 100;
  g.n = 1;
  g.beta = Rational(1, 20);
  g.corruption_scale = 100.0;
  g.noise_stddev = 1.0;
  g.seed = 44;
  const auto prob = sysgen::generate(g);
  const auto eps = prob.epsilon();
  std::vector<double> mags(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) mags[i] = std::abs(eps[i]);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  const auto split = sysgen::canonical_decomposition(eps, g.beta);

  const auto p = RobustParams::for_qrk(g.beta, Rational(4, 5));
  const auto s = synthetic(100, 1, 10.0, 9.0);
  const auto general = qrk_general_horizon(s, p, eps);
  const auto direct = qrk_error_horizon(s, p, norm_inf(split.eta));
  CHECK(general.noise_sq == mags[5] * mags[5]);
  CHECK(general.noise_sq == direct.noise_sq);
  CHECK(general.rate.c == direct.rate.c);
}

TEST_CASE("empirical limiting error stays under certified horizons") {
  sysgen::GenSpec g;
  g.m = 100;
  g.n = 1;
  g.beta = Rational(1, 100);
  g.corruption_scale = 100.0;
  g.noise_stddev = 1.0;
  const auto pq = RobustParams::for_qrk(g.beta, Rational(4, 5));
  const auto pd = RobustParams::for_dqrk(g.beta, Rational(2, 5), Rational(4, 5));

  double sum_q = 0.0, sum_d = 0.0, bound_q = 0.0, bound_d = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    g.seed = seed;
    const auto prob = sysgen::generate(g);
    const double eta = norm_inf(prob.eta);
    const auto sq = summarize(prob.a, pq);
    const auto sd = summarize(prob.a, pd);
    const auto hq = qrk_error_horizon(sq, pq, eta);
    const auto hd = dqrk_error_horizon(sd, pd, eta);
    REQUIRE(hq.rate.condition.verdict == Verdict::satisfied);
    REQUIRE(hd.rate.condition.verdict == Verdict::satisfied);
    bound_q += *hq.horizon / 20.0;
    bound_d += *hd.horizon / 20.0;

    auto cfg = solvers::default_config(solvers::Method::qrk);
    cfg.q = pq.q;
    cfg.iterations = 600;
    cfg.seed = seed;
    sum_q += solvers::horizon_estimate(solvers::run(prob, cfg)).value / 20.0;
    cfg = solvers::default_config(solvers::Method::dqrk);
    cfg.q0 = *pd.q0;
    cfg.q = pd.q;
    cfg.iterations = 600;
    cfg.seed = seed;
    sum_d += solvers::horizon_estimate(solvers::run(prob, cfg)).value / 20.0;
  }
  MESSAGE("qRK mean " << sum_q << " vs mean bound " << bound_q << "; dqRK " << sum_d << " vs " << bound_d);
  CHECK(sum_q <= bound_q);
  CHECK(sum_d <= bound_d);
}

TEST_CASE("time-varying comparison constants") {
  CHECK(throws_kind(ErrorKind::InvalidRegime, [] {
    (void)timevar_constants(synthetic(10, 1, 3.0, 1.0), RobustParams::for_qrk(Rational(0, 1), Rational(1, 2)));
  }));

  SUBCASE("desk-size matrix at the experiment parameters") {
    const auto a = testing::normalized_gaussian(5000, 20, 12);
    const auto s = summarize(a, kExpQ, SigmaOptions::parse("sampled:1"));
    const auto t = timevar_constants(s, kExpQ);
    CHECK(t.ours_coefficient == doctest::Approx(7.0 / 6.0).epsilon(1e-14));
    CHECK(t.coefficient > 100.0 * t.ours_coefficient);
    CHECK(t.s == doctest::Approx(std::sqrt(19.0)).epsilon(1e-14));
    // Oracle for ζ and φ.
    const DD sig(s.sigma_max), m(5000.0), beta(0.05), q(0.8), r = DD(1.0) / DD(3.0), sv = dd_sqrt(DD(19.0));
    const DD tail = sig / (q * m) * (DD(1.0) / dd_sqrt(beta * m)) * (r + r * r * sv);
    const DD zeta = tail + r * r / (q * beta * m * m);
    CHECK(t.zeta == doctest::Approx(zeta.value()).epsilon(1e-13));
    const DD sq(s.sigma_q_beta.value);
    const DD phi = DD(15.0) / DD(16.0) * sq * sq / (q * m) -
                   sig * sig / (q * m) * (DD(2.0) * r * sv + r * r * sv * sv) - tail;
    CHECK(std::abs(t.phi - phi.value()) <= 1e-12 * (std::abs(phi.value()) + tail.value()));
  }
  SUBCASE("our coefficient never exceeds theirs on the grid") {
    for (std::size_t m : {4u, 5u, 10u, 50u, 200u, 5000u}) {
      for (int bi = 1; bi <= 20; ++bi) {
        for (int qi = 1; qi < 100; ++qi) {
          const Rational beta(bi, 100), q(qi, 100);
          if (!(beta < q) || !(q + beta < Rational(1, 1))) continue;
          const auto p = RobustParams::for_qrk(beta, q);
          for (double sig : {0.5, 1.0, 10.0}) {
            const auto t = timevar_constants(synthetic(m, 1, sig, 0.1), p);
            CHECK(t.ours_coefficient <= t.coefficient);
          }
        }
      }
    }
  }
  SUBCASE("crafted instance meeting both side conditions") {
    // m = 100, β = 1/100, q = 97/100: m lies below the size limit and r = 1/2.
    // φ and C share the p·κ̂⁻² term, so a sampled σ_{q−β,min} suffices.
    const auto a = testing::normalized_gaussian(100, 2, 9);
    const auto p = RobustParams::for_qrk(Rational(1, 100), Rational(97, 100));
    const auto s = summarize(a, p, SigmaOptions::parse("sampled:20"));
    const auto t = timevar_constants(s, p);
    CHECK(t.m_condition);
    CHECK(t.m_limit > 100.0);
    CHECK(t.sigma_condition);
    CHECK(t.phi_below_c);
    CHECK(t.phi < t.c_error_horizon);
  }
}

TEST_CASE("qRaSK coefficient comparison") {
  const auto s = synthetic(5000, 2500, 1.7, 0.5);
  const auto c = qrask_coefficient_comparison(s, kExpQ);
  CHECK(c.ours_coefficient == doctest::Approx(7.0 / 6.0).epsilon(1e-14));
  CHECK(4.0 * c.bounded_part == doctest::Approx(7.014).epsilon(1e-4));
  const double exact_bounded = 0.5 * ((1.0 / 3.0) * 0.9025 / (0.8 * 0.15) + 1.0);
  CHECK(c.bounded_part == doctest::Approx(exact_bounded).epsilon(1e-14));
  CHECK(c.ratio_bound_holds);
  CHECK(c.qrask_coefficient > c.bounded_part);
  CHECK(throws_kind(ErrorKind::InvalidRegime, [] {
    (void)qrask_coefficient_comparison(synthetic(10, 1, 3.0, 1.0), RobustParams::for_qrk(Rational(0, 1), Rational(1, 2)));
  }));

  int checked = 0;
  for (int bi = 1; bi <= 200; ++bi) {
    const double beta = bi / 1000.0;
    for (int qi = 1; qi < 1000; ++qi) {
      const double q = qi / 1000.0;
      if (!(beta < q) || !(q + beta < 1.0)) continue;
      CHECK_UNARY(coefficient_ratio_bound_holds(beta, q));
      ++checked;
    }
  }
  CHECK(checked > 150000);
  for (double beta : {1e-6, 1e-4, 1e-2}) CHECK(coefficient_ratio_bound_holds(beta, 0.5));
  for (double beta : {0.01, 0.1, 0.2, 0.3}) CHECK(coefficient_ratio_bound_holds(beta, 1.0 - 2.0 * beta));
}

TEST_CASE("sampled summaries never certify a hypothesis") {
  int seen = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (const auto* cas : {&kSmall[0], &kSmall[2]}) {
      const auto a = seed % 2 ? testing::normalized_gaussian(cas->m, 1, seed) : testing::gaussian_matrix(cas->m, 2, seed);
      const auto pd = small_dqrk(*cas);
      // Enough samples to visit every subset still counts as sampled.
      const auto s = summarize(a, pd, SigmaOptions::parse("sampled:100000"));
      const auto exact = summarize(a, pd);
      CHECK(s.sigma_q_beta.value == exact.sigma_q_beta.value);
      ReportInputs in;
      std::vector<double> eps(cas->m, 0.5);
      eps[0] = 40.0;
      in.epsilon = eps;
      const auto report = bound_report(s, pd, in);
      CHECK(report["condition_mode"] == "sampled");
      visit_verdicts(report, [&](const std::string& v) {
        ++seen;
        CHECK(v != "satisfied");
      });
      const auto exact_report = bound_report(exact, pd, in);
      CHECK(exact_report["condition_mode"] == "exact");
    }
  }
  CHECK(seen > 100);
}

TEST_CASE("bound report layout") {
  const auto a = ones_column(100);
  const auto p = RobustParams::for_dqrk(Rational(1, 100), Rational(2, 5), Rational(4, 5));
  const auto s = summarize(a, p);
  ReportInputs in;
  std::vector<double> eps(100, 0.25);
  eps[7] = 30.0;
  in.epsilon = eps;
  in.start_on_hyperplane = false;
  const auto r = bound_report(s, p, in);
  CHECK(r["schema_version"] == kReportSchemaVersion);
  CHECK(r["params"]["p"] == "39/40");
  CHECK(r["params"]["r"] == "1/19");
  CHECK(r["start_hypothesis"] == "violated");
  CHECK(r["eta_inf"].get<double>() == 0.25);
  std::vector<std::string> tags;
  for (const auto& b : r["bounds"]) tags.push_back(b["tag"]);
  for (const char* t : {"qrk.rate.original", "qrk.rate.alternative", "qrk.rate.comparison", "qrk.error_horizon",
                        "qrk.general_horizon", "rk.error_horizon", "qrk.vs_rk.horizon_condition",
                        "qrk.vs_time_varying", "qrk.vs_qrask", "dqrk.rate.original", "dqrk.rate.alternative",
                        "dqrk.rate.comparison", "dqrk.error_horizon"}) {
    CHECK_MESSAGE(std::count(tags.begin(), tags.end(), t) == 1, t);
  }
  for (const auto& b : r["bounds"]) {
    if (b["tag"] == "qrk.error_horizon") {
      CHECK(b["rate"]["condition"]["verdict"] == "satisfied");
      CHECK(b["horizon"].is_number());
    }
    if (b["tag"] == "dqrk.error_horizon") CHECK(b["horizon"].is_number());
  }

  // Failing pieces become error entries.
  ReportInputs zero;
  zero.epsilon = std::vector<double>(100, 0.0);
  const auto rz = bound_report(s, RobustParams::for_qrk(Rational(1, 100), Rational(4, 5)), zero);
  bool found = false;
  for (const auto& b : rz["bounds"]) {
    if (b["tag"] == "qrk.vs_rk.horizon_condition") {
      found = true;
      CHECK(b["error"] == "ZeroCorruption");
    }
  }
  CHECK(found);
  CHECK_FALSE(rz.contains("start_hypothesis"));
}

TEST_CASE("summaries") {
  const auto a = testing::gaussian_matrix(30, 3, 2);
  CHECK(throws_kind(ErrorKind::TooManySubsets, [&] {
    (void)summarize(a, RobustParams::for_qrk(Rational(1, 30), Rational(16, 30)));
  }));
  CHECK(throws_kind(ErrorKind::NonIntegerQuantile, [&] { (void)summarize(a, kExpQ); }));
  const auto s = summarize(a, RobustParams::for_qrk(Rational(1, 30), Rational(16, 30)), SigmaOptions::parse("sampled:50"));
  CHECK(s.sigma_q_beta.is_upper_bound_only);
  CHECK(s.sigma_q_beta.value <= s.sigma_max);
  CHECK(s.sigma_q_beta.value <= s.sigma_min);
  CHECK(s.frobenius_sq == doctest::Approx(a.frobenius_sq()));
}
