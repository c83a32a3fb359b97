#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kqrk/matrix.hpp"
#include "kqrk/rational.hpp"
#include "kqrk/sigma_q.hpp"

namespace kqrk::bounds {

/// Whether a bound's hypothesis holds for the instance. A sampled σ_{q,min}
/// overestimates the true value and every hypothesis here needs it large, so a
/// sampled evaluation can refute a hypothesis but never confirm one.
enum class Verdict { satisfied, violated, unknown };
const char* to_string(Verdict v);

struct SigmaOptions {
  SigmaMode mode = SigmaMode::exact;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  std::uint64_t cap = kDefaultEnumerationCap;

  /// "exact" or "sampled:N".
  static SigmaOptions parse(std::string_view text);
  std::string str() const;
};

/// β, q and optionally q₀ with the derived p and r.
struct RobustParams {
  Rational beta;
  Rational q;
  std::optional<Rational> q0;

  static RobustParams for_qrk(Rational beta, Rational q);
  static RobustParams for_dqrk(Rational beta, Rational q0, Rational q);

  bool is_dqrk() const { return q0.has_value(); }

  /// Worst-case non-corrupt share of the admissible set:
  /// (q−β)/q, or (q−q₀−β)/(q−q₀) for the band method.
  Rational p() const;
  /// β/(1−q−β).
  Rational r() const;

  /// Throws InvalidRegime unless β < q < 1−β (and β < q₀ < q, q−q₀ > β).
  void validate() const;
  /// Throws NonIntegerQuantile unless β·m, q·m (and q₀·m) are whole.
  void check_counts(std::size_t m) const;
};

/// Minimal β for a concrete corruption vector: ‖ξ‖₀/m.
Rational infer_beta(std::span<const double> xi);

struct SpectralSummary {
  std::size_t m = 0;
  std::size_t n = 0;
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  double frobenius_sq = 0.0;
  SigmaQMinResult sigma_q_beta;                  // level q − β
  std::optional<SigmaQMinResult> sigma_q0_beta;  // level q₀ − β, band method only

  /// True when every σ_{·,min} value is exact.
  bool exact() const;
};

SpectralSummary summarize(const DenseMatrix& a, const RobustParams& params, const SigmaOptions& options = {});
/// σ_max, σ_min and ‖A‖²_F only, enough for the plain RK horizon.
SpectralSummary summarize_extremes(const DenseMatrix& a);

struct Condition {
  double lhs = 0.0;
  double rhs = 0.0;
  Verdict verdict = Verdict::unknown;
};

/// A decay constant C evaluated twice: once from raw singular values and once
/// through p, r, κ_q and κ̂_q. `magnitude` is the sum of absolute term values,
/// the natural scale for comparing the two evaluations.
struct RateBound {
  double c = 0.0;
  double c_rewritten = 0.0;
  double magnitude = 0.0;
  Condition condition;
  Condition condition_rewritten;
};

struct HorizonBound {
  RateBound rate;
  double coefficient = 0.0;  // multiplies ‖η‖²_∞ (or ε²_(βm+1))
  double noise_sq = 0.0;
  /// coefficient·noise_sq/C; absent when C ≤ 0.
  std::optional<double> horizon;
  bool nonpositive_c = false;
  /// coefficient < 2, expected whenever q > 1/2 and the hypothesis holds.
  bool coefficient_below_two = false;
};

struct RkHorizon {
  double decay = 0.0;
  double horizon = 0.0;
};

/// Plain RK: decay 1 − σ²_min/‖A‖²_F and radius (‖A‖²_F/σ²_min)·max_j ε_j²/‖a_j‖².
/// `row_norms` are the norms of A's rows (empty: all one). Throws
/// FullRankViolation when σ_min < 1e-12·σ_max.
RkHorizon rk_horizon(const SpectralSummary& s, std::span<const double> epsilon,
                     std::span<const double> row_norms = {});

RateBound qrk_rate_original(const SpectralSummary& s, const RobustParams& p);
RateBound qrk_rate_alternative(const SpectralSummary& s, const RobustParams& p);
RateBound dqrk_rate_original(const SpectralSummary& s, const RobustParams& p);
RateBound dqrk_rate_alternative(const SpectralSummary& s, const RobustParams& p);

struct RateComparison {
  double alpha1 = 0.0;  // alternative bound's decay factor
  double alpha2 = 0.0;  // original bound's decay factor
  bool r_below_4 = false;
  /// βm(1−q−β)/(2√β√(1−q−β) − β); infinite when r ≥ 4.
  double sigma_max_sq_threshold = 0.0;
  bool hypotheses_hold = false;
  bool alpha1_lt_alpha2 = false;
};

RateComparison compare_qrk_rates(const SpectralSummary& s, const RobustParams& p);
RateComparison compare_dqrk_rates(const SpectralSummary& s, const RobustParams& p);

HorizonBound qrk_error_horizon(const SpectralSummary& s, const RobustParams& p, double eta_inf);
/// Same constant, with ε_(βm+1) (the (βm+1)-th largest |ε_i|) in place of ‖η‖_∞.
HorizonBound qrk_general_horizon(const SpectralSummary& s, const RobustParams& p, std::span<const double> epsilon);
HorizonBound dqrk_error_horizon(const SpectralSummary& s, const RobustParams& p, double eta_inf);

struct EhComparison {
  double lhs = 0.0;            // ε_(βm+1)/ε_(1)
  std::optional<double> rhs;   // √(C m / (σ²_min·coefficient)); absent when C ≤ 0
  Verdict qrk_beats_rk = Verdict::unknown;
};

/// Sufficient condition for the qRK horizon bound to undercut the RK one.
/// Throws ZeroCorruption when ε = 0.
EhComparison eh_comparison_condition(const SpectralSummary& s, const RobustParams& p,
                                     std::span<const double> epsilon);

struct TimeVaryingComparison {
  double s = 0.0;  // √((1−β)/β)
  double phi = 0.0;
  double zeta = 0.0;
  double coefficient = 0.0;       // 1 + ζm²
  double ours_coefficient = 0.0;  // 2r(1−q)/q + 1
  double m_limit = 0.0;           // 1/(4√β√(1−q−β)) + √(1−β)/(4√(1−q−β)³)
  bool m_condition = false;
  double sigma_max_sq_threshold = 0.0;  // (βm/2)(1−q−β)/(√β√(1−q−β) − β)
  bool sigma_condition = false;         // r < 1 and σ²_max above the threshold
  double c_error_horizon = 0.0;
  bool phi_below_c = false;
};

/// Constants of the time-varying-corruption analysis, evaluated for fixed
/// corruption. Throws InvalidRegime when β = 0.
TimeVaryingComparison timevar_constants(const SpectralSummary& s, const RobustParams& p);

struct QraskComparison {
  double qrask_coefficient = 0.0;
  double ours_coefficient = 0.0;
  double bounded_part = 0.0;  // ½(r(1−β)²/(q(1−q−β)) + 1)
  bool ratio_bound_holds = false;  // ours ≤ 4·bounded_part
};

QraskComparison qrask_coefficient_comparison(const SpectralSummary& s, const RobustParams& p);
/// Parameter-only form of the inequality (no spectrum needed).
bool coefficient_ratio_bound_holds(double beta, double q);

inline constexpr int kReportSchemaVersion = 1;

struct ReportInputs {
  std::optional<std::vector<double>> epsilon;  // η + ξ, enables horizon comparisons
  std::optional<double> eta_inf;               // defaults to ε_(βm+1) when ε is given
  std::optional<bool> start_on_hyperplane;     // band-method start hypothesis
};

/// Every applicable bound for one instance, keyed by descriptive tags.
nlohmann::json bound_report(const SpectralSummary& s, const RobustParams& p, const ReportInputs& inputs = {});

}  // namespace kqrk::bounds
