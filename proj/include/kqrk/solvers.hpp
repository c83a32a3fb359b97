#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kqrk/matrix.hpp"
#include "kqrk/quantile.hpp"
#include "kqrk/rational.hpp"
#include "kqrk/rng.hpp"
#include "kqrk/sysgen.hpp"

namespace kqrk::solvers {

enum class Method { rk, qrk, dqrk };
enum class InitPolicy { zero, given, project_first };
enum class ResidualMode { full, incremental };

const char* to_string(Method m);
Method parse_method(std::string_view name);
const char* to_string(InitPolicy p);
const char* to_string(ResidualMode r);

struct SolverConfig {
  Method method = Method::rk;
  Rational q0{0, 1};  // dqRK only
  Rational q{1, 1};   // qRK and dqRK
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  InitPolicy init = InitPolicy::zero;
  std::vector<double> x0;  // used by `given`, and as the start point for `project_first` when set
  bool record_diagnostics = false;
  /// `incremental` updates r ← r − t·(AAᵀ)e_i in O(m) per step and recomputes
  /// the residual in full every `resync_interval` steps.
  ResidualMode residuals = ResidualMode::full;
  std::size_t resync_interval = 1000;

  /// Throws InvalidArgument / NonIntegerQuantile for a system with m rows.
  void validate(std::size_t m, std::size_t n) const;
};

/// Config for `method` with the init policy its convergence theory assumes
/// (project-first for dqRK, zero otherwise).
SolverConfig default_config(Method method);

/// A (possibly non-normalized) system with per-row weights precomputed.
class System {
 public:
  System(const DenseMatrix& a, std::span<const double> b);

  const DenseMatrix& matrix() const { return *a_; }
  std::span<const double> rhs() const { return b_; }
  std::size_t rows() const { return a_->rows(); }
  std::size_t cols() const { return a_->cols(); }
  double row_norm_sq(std::size_t i) const { return row_norm_sq_[i]; }
  bool uniform_rows() const { return uniform_rows_; }

  /// b − A x
  std::vector<double> residual(std::span<const double> x) const;

  /// Row drawn with probability ‖a_i‖² / Σ_{j∈candidates} ‖a_j‖².
  std::size_t sample_row(std::span<const std::size_t> candidates, Rng& rng) const;
  std::size_t sample_any_row(Rng& rng) const;

 private:
  const DenseMatrix* a_;
  std::span<const double> b_;
  std::vector<double> row_norm_sq_;
  std::vector<double> cumulative_;  // prefix sums of row_norm_sq_
  bool uniform_rows_ = false;
};

inline constexpr double kNoQuantile = std::numeric_limits<double>::quiet_NaN();

struct StepInfo {
  std::size_t index = 0;
  double residual = 0.0;  // r_i before the step
  double q0_value = kNoQuantile;
  double q_value = kNoQuantile;
  std::size_t admissible_size = 0;
};

/// Projects x onto the hyperplane ⟨a_i, x⟩ = b_i.
StepInfo project_onto_row(const System& sys, std::span<double> x, std::size_t i);

/// One randomized Kaczmarz step.
StepInfo rk_step(const System& sys, std::span<double> x, Rng& rng);

/// Quantile-filtered step: rows are admissible when their scaled residual
/// |r_j|/‖a_j‖² is in L_q. |I| = q·m exactly.
StepInfo qrk_step(const System& sys, std::span<double> x, const Rational& q, Rng& rng);

/// Band-filtered step: admissible rows have scaled residual ranks in
/// [q₀·m, q·m), i.e. above the q₀ quantile and at most the q quantile.
StepInfo dqrk_step(const System& sys, std::span<double> x, const Rational& q0, const Rational& q,
                   Rng& rng);

/// Sorted admissible set for the current x (lo_level = 0 for qRK).
RankBand admissible_set(const System& sys, std::span<const double> x, const Rational& lo_level,
                        const Rational& hi_level);

/// ‖a_i‖²-scaled absolute residuals, the values the quantiles are taken over.
std::vector<double> scaled_abs_residuals(const System& sys, std::span<const double> residual);

/// Observed quantile Q at x_k next to its two theoretical upper bounds:
///   sparse: σ_max‖x_k − x*‖ / (√m √(1−q−β))               (valid when η = 0)
///   noisy:  sparse + √(1−q)‖η‖_∞ / √(1−q−β)
struct QuantileDiagnostic {
  double q_observed = 0.0;
  double bound_sparse = 0.0;
  double bound_noisy = 0.0;
  /// Floating-point allowance for comparing q_observed against the bounds.
  double rounding_slack = 0.0;

  bool sparse_holds() const { return q_observed <= bound_sparse + rounding_slack; }
  bool noisy_holds() const { return q_observed <= bound_noisy + rounding_slack; }
};

QuantileDiagnostic quantile_diagnostic(std::span<const double> x_k, const sysgen::CorruptedProblem& problem,
                                       const Rational& q, const Rational& beta, double sigma_max);
/// Infers β = ‖ξ‖₀/m and computes σ_max(A).
QuantileDiagnostic quantile_diagnostic(std::span<const double> x_k, const sysgen::CorruptedProblem& problem,
                                       const Rational& q);

struct RunTrace {
  Method method = Method::rk;
  /// Index k is the state x_k, k = 0..iterations. Empty without ground truth.
  std::vector<double> sq_errors;
  std::vector<double> residual_norms;
  /// chosen_indices[k] is the row used to go from x_k to x_{k+1}.
  std::vector<std::size_t> chosen_indices;
  std::vector<double> q0_values;
  std::vector<double> q_values;
  std::vector<std::size_t> admissible_sizes;
  std::vector<double> final_x;
  /// Whether x_0 satisfied ⟨x_0, a_i⟩ = b_i for some i (dqRK theory assumes it).
  bool start_on_hyperplane = false;

  std::vector<QuantileDiagnostic> diagnostics;  // per state when enabled
  std::size_t diagnostic_violations = 0;

  std::size_t iterations() const { return chosen_indices.size(); }
};

struct RunOptions {
  std::span<const double> x_star;  // empty: no error tracking
  /// Precomputed A·Aᵀ for incremental residuals; computed on demand if null.
  const std::vector<double>* gram = nullptr;
  /// Diagnostics context; required when config.record_diagnostics is set.
  const sysgen::CorruptedProblem* problem = nullptr;
  std::optional<Rational> beta;       // defaults to ‖ξ‖₀/m
  std::optional<double> sigma_max;    // computed when absent
};

RunTrace run(const DenseMatrix& a, std::span<const double> b, const SolverConfig& config,
             const RunOptions& options = {});

/// Runs on a generated problem, tracking ‖x_k − x*‖².
RunTrace run(const sysgen::CorruptedProblem& problem, const SolverConfig& config,
             const std::vector<double>* gram = nullptr);

/// The RNG stream `run` draws row choices from, for reproducing steps by hand.
Rng step_stream(std::uint64_t seed);

struct HorizonEstimate {
  double value = 0.0;
  std::size_t window = 0;
};

/// Max of the last `window` squared errors.
HorizonEstimate horizon_estimate(const RunTrace& trace, std::size_t window = 100);
HorizonEstimate horizon_estimate(std::span<const double> sq_errors, std::size_t window = 100);

/// Trace CSV: k,sq_error,residual_norm,chosen_index,Q0,Q. Row k is
/// the state x_k; chosen_index is the row that produced x_k (blank for k = 0).
std::string trace_to_csv(const RunTrace& trace);

}  // namespace kqrk::solvers
