#include "kqrk/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kqrk/error.hpp"
#include "kqrk/io.hpp"
#include "kqrk/svd.hpp"

namespace kqrk::solvers {

const char* to_string(Method m) {
  switch (m) {
    case Method::rk: return "rk";
    case Method::qrk: return "qrk";
    case Method::dqrk: return "dqrk";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "rk" || name == "RK") return Method::rk;
  if (name == "qrk" || name == "qRK") return Method::qrk;
  if (name == "dqrk" || name == "dqRK") return Method::dqrk;
  throw Error(ErrorKind::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

const char* to_string(InitPolicy p) {
  switch (p) {
    case InitPolicy::zero: return "zero";
    case InitPolicy::given: return "given";
    case InitPolicy::project_first: return "project-first";
  }
  return "?";
}

const char* to_string(ResidualMode r) { return r == ResidualMode::full ? "full" : "incremental"; }

void SolverConfig::validate(std::size_t m, std::size_t n) const {
  if (m == 0 || n == 0) throw Error(ErrorKind::InvalidArgument, "empty system");
  if (method != Method::rk) {
    if (q <= Rational(0, 1) || q > Rational(1, 1)) throw Error(ErrorKind::InvalidArgument, "q must lie in (0, 1]");
    if (q.count_of(m) == 0) throw Error(ErrorKind::InvalidArgument, "q·m must be at least 1");
  }
  if (method == Method::dqrk) {
    if (q0 <= Rational(0, 1)) throw Error(ErrorKind::InvalidArgument, "q0 must be positive");
    if (q0 >= q) throw Error(ErrorKind::InvalidArgument, "q0 must be below q");
    q0.count_of(m);
  }
  if (init == InitPolicy::given && x0.size() != n) {
    throw Error(ErrorKind::InvalidArgument, "x0 has length " + std::to_string(x0.size()) + ", expected " +
                                                std::to_string(n));
  }
  if (init == InitPolicy::project_first && !x0.empty() && x0.size() != n) {
    throw Error(ErrorKind::InvalidArgument, "x0 length mismatch");
  }
  for (double v : x0)
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "x0 has a non-finite entry");
  if (residuals == ResidualMode::incremental && resync_interval == 0) {
    throw Error(ErrorKind::InvalidArgument, "resync interval must be positive");
  }
}

SolverConfig default_config(Method method) {
  SolverConfig c;
  c.method = method;
  c.init = method == Method::dqrk ? InitPolicy::project_first : InitPolicy::zero;
  return c;
}

System::System(const DenseMatrix& a, std::span<const double> b) : a_(&a), b_(b) {
  if (b.size() != a.rows()) {
    throw Error(ErrorKind::InvalidArgument, "b has length " + std::to_string(b.size()) + ", expected " +
                                                std::to_string(a.rows()));
  }
  row_norm_sq_.resize(a.rows());
  cumulative_.resize(a.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    row_norm_sq_[i] = a.row_norm_sq(i);
    if (!(row_norm_sq_[i] > 0.0)) throw Error(ErrorKind::ZeroRow, "row " + std::to_string(i) + " is zero");
    total += row_norm_sq_[i];
    cumulative_[i] = total;
  }
  uniform_rows_ = a.row_normalized() ||
                  std::all_of(row_norm_sq_.begin(), row_norm_sq_.end(), [&](double v) { return v == row_norm_sq_[0]; });
}

std::vector<double> System::residual(std::span<const double> x) const {
  std::vector<double> r(rows());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b_[i] - a_->row_dot(i, x);
  return r;
}

std::size_t System::sample_row(std::span<const std::size_t> candidates, Rng& rng) const {
  if (candidates.empty()) throw Error(ErrorKind::EmptyAdmissibleSet, "no admissible rows");
  if (uniform_rows_) return candidates[rng.below(candidates.size())];
  double total = 0.0;
  for (std::size_t i : candidates) total += row_norm_sq_[i];
  const double u = rng.uniform01() * total;
  double acc = 0.0;
  for (std::size_t i : candidates) {
    acc += row_norm_sq_[i];
    if (u < acc) return i;
  }
  return candidates.back();
}

std::size_t System::sample_any_row(Rng& rng) const {
  if (uniform_rows_) return rng.below(rows());
  const double u = rng.uniform01() * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return it == cumulative_.end() ? rows() - 1 : static_cast<std::size_t>(it - cumulative_.begin());
}

std::vector<double> scaled_abs_residuals(const System& sys, std::span<const double> residual) {
  std::vector<double> out(residual.size());
  const bool normalized = sys.matrix().row_normalized();
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = normalized ? std::abs(residual[j]) : std::abs(residual[j]) / sys.row_norm_sq(j);
  }
  return out;
}

namespace {

struct Scratch {
  std::vector<double> scaled;
  std::vector<std::size_t> work;
};

struct Levels {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

Levels levels_for(Method method, const Rational& q0, const Rational& q, std::size_t m) {
  switch (method) {
    case Method::rk: return {0, m};
    case Method::qrk: return {0, q.count_of(m)};
    case Method::dqrk: return {q0.count_of(m), q.count_of(m)};
  }
  return {0, m};
}

void axpy_row(const System& sys, std::span<double> x, std::size_t i, double t) {
  const auto row = sys.matrix().row(i);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] += t * row[j];
}

// Picks a row for the given state and projects onto it. Shared by the public
// single-step functions and `run`, so that both consume the RNG identically.
StepInfo choose_and_project(const System& sys, std::span<double> x, std::span<const double> residual,
                            Method method, Levels lv, Rng& rng, Scratch& s) {
  StepInfo info;
  if (method == Method::rk) {
    info.index = sys.sample_any_row(rng);
    info.admissible_size = sys.rows();
  } else {
    s.scaled = scaled_abs_residuals(sys, residual);
    const RankBand band = rank_band(s.scaled, lv.lo, lv.hi, s.work, false);
    info.q_value = band.upper_threshold;
    if (method == Method::dqrk) info.q0_value = band.lower_threshold;
    info.admissible_size = band.indices.size();
    info.index = sys.sample_row(band.indices, rng);
  }
  info.residual = residual[info.index];
  axpy_row(sys, x, info.index, info.residual / sys.row_norm_sq(info.index));
  return info;
}

void check_x(const System& sys, std::span<const double> x) {
  if (x.size() != sys.cols()) throw Error(ErrorKind::InvalidArgument, "x has the wrong length");
}

}  // namespace

StepInfo project_onto_row(const System& sys, std::span<double> x, std::size_t i) {
  check_x(sys, x);
  if (i >= sys.rows()) throw Error(ErrorKind::IndexOutOfRange, "row " + std::to_string(i) + " out of range");
  StepInfo info;
  info.index = i;
  info.residual = sys.rhs()[i] - sys.matrix().row_dot(i, x);
  info.admissible_size = 1;
  axpy_row(sys, x, i, info.residual / sys.row_norm_sq(i));
  return info;
}

StepInfo rk_step(const System& sys, std::span<double> x, Rng& rng) {
  check_x(sys, x);
  StepInfo info;
  info.index = sys.sample_any_row(rng);
  info.admissible_size = sys.rows();
  info.residual = sys.rhs()[info.index] - sys.matrix().row_dot(info.index, x);
  axpy_row(sys, x, info.index, info.residual / sys.row_norm_sq(info.index));
  return info;
}

StepInfo qrk_step(const System& sys, std::span<double> x, const Rational& q, Rng& rng) {
  check_x(sys, x);
  SolverConfig c = default_config(Method::qrk);
  c.q = q;
  c.validate(sys.rows(), sys.cols());
  Scratch s;
  const auto r = sys.residual(x);
  return choose_and_project(sys, x, r, Method::qrk, levels_for(Method::qrk, {}, q, sys.rows()), rng, s);
}

StepInfo dqrk_step(const System& sys, std::span<double> x, const Rational& q0, const Rational& q, Rng& rng) {
  check_x(sys, x);
  SolverConfig c = default_config(Method::dqrk);
  c.q0 = q0;
  c.q = q;
  c.validate(sys.rows(), sys.cols());
  Scratch s;
  const auto r = sys.residual(x);
  return choose_and_project(sys, x, r, Method::dqrk, levels_for(Method::dqrk, q0, q, sys.rows()), rng, s);
}

RankBand admissible_set(const System& sys, std::span<const double> x, const Rational& lo_level,
                        const Rational& hi_level) {
  check_x(sys, x);
  const auto scaled = scaled_abs_residuals(sys, sys.residual(x));
  std::vector<std::size_t> work;
  return rank_band(scaled, lo_level.count_of(sys.rows()), hi_level.count_of(sys.rows()), work, true);
}

QuantileDiagnostic quantile_diagnostic(std::span<const double> x_k, const sysgen::CorruptedProblem& problem,
                                       const Rational& q, const Rational& beta, double sigma_max) {
  const std::size_t m = problem.m();
  const double gap = 1.0 - q.to_double() - beta.to_double();
  if (q + beta >= Rational(1, 1)) {
    throw Error(ErrorKind::InvalidRegime, "quantile bound needs q < 1 - beta (q = " + q.str() +
                                              ", beta = " + beta.str() + ")");
  }
  const System sys(problem.a, problem.b);
  check_x(sys, x_k);
  const auto r = sys.residual(x_k);
  const auto scaled = scaled_abs_residuals(sys, r);

  QuantileDiagnostic d;
  d.q_observed = quantile(scaled, QuantileSpec(q, m));
  const double err = std::sqrt(squared_distance(x_k, problem.x_star));
  d.bound_sparse = sigma_max * err / (std::sqrt(static_cast<double>(m)) * std::sqrt(gap));
  d.bound_noisy = d.bound_sparse + std::sqrt(1.0 - q.to_double()) * norm_inf(problem.eta) / std::sqrt(gap);

  // Each residual is an n-term dot product subtracted from b_i, and b_true itself
  // carries the rounding of A x*; both errors are at most (n+1)·eps times the
  // magnitudes involved (rows have unit norm).
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double n1 = static_cast<double>(problem.n() + 1);
  d.rounding_slack = 2.0 * n1 * eps * (norm_inf(problem.b) + norm2(x_k) + norm2(problem.x_star)) +
                     8.0 * eps * d.bound_noisy;
  return d;
}

QuantileDiagnostic quantile_diagnostic(std::span<const double> x_k, const sysgen::CorruptedProblem& problem,
                                       const Rational& q) {
  const Rational beta(static_cast<std::int64_t>(sysgen::support_size(problem.xi)),
                      static_cast<std::int64_t>(problem.m()));
  return quantile_diagnostic(x_k, problem, q, beta, singular_extremes(problem.a).sigma_max);
}

Rng step_stream(std::uint64_t seed) { return Rng(seed).split("steps"); }

RunTrace run(const DenseMatrix& a, std::span<const double> b, const SolverConfig& config,
             const RunOptions& options) {
  const System sys(a, b);
  const std::size_t m = sys.rows(), n = sys.cols();
  config.validate(m, n);
  if (!options.x_star.empty() && options.x_star.size() != n) {
    throw Error(ErrorKind::InvalidArgument, "x* has the wrong length");
  }
  const Levels lv = levels_for(config.method, config.q0, config.q, m);

  RunTrace trace;
  trace.method = config.method;

  std::vector<double> x(n, 0.0);
  if (config.init == InitPolicy::given || (!config.x0.empty() && config.init == InitPolicy::project_first)) {
    x = config.x0;
  }
  if (config.init == InitPolicy::project_first) {
    Rng init_rng = Rng(config.seed).split("init");
    project_onto_row(sys, x, sys.sample_any_row(init_rng));
  }

  std::vector<double> r = sys.residual(x);
  for (std::size_t i = 0; i < m && !trace.start_on_hyperplane; ++i) {
    trace.start_on_hyperplane = std::abs(r[i]) <= 1e-10 * (1.0 + std::abs(b[i]));
  }

  // Diagnostics context.
  Rational beta;
  double sigma_max = 0.0;
  if (config.record_diagnostics) {
    if (config.method == Method::rk) {
      throw Error(ErrorKind::InvalidArgument, "quantile diagnostics need a quantile method");
    }
    if (options.problem == nullptr) throw Error(ErrorKind::InvalidArgument, "diagnostics need the generated problem");
    beta = options.beta.value_or(Rational(static_cast<std::int64_t>(sysgen::support_size(options.problem->xi)),
                                          static_cast<std::int64_t>(m)));
    if (config.q + beta >= Rational(1, 1)) {
      throw Error(ErrorKind::InvalidRegime, "quantile bound needs q < 1 - beta (q = " + config.q.str() +
                                                ", beta = " + beta.str() + ")");
    }
    sigma_max = options.sigma_max.value_or(singular_extremes(a).sigma_max);
  }

  std::vector<double> local_gram;
  const double* gram = nullptr;
  if (config.residuals == ResidualMode::incremental) {
    if (options.gram != nullptr) {
      if (options.gram->size() != m * m) throw Error(ErrorKind::InvalidArgument, "Gram matrix has the wrong size");
      gram = options.gram->data();
    } else {
      local_gram = a.gram_rows();
      gram = local_gram.data();
    }
  }

  const std::size_t K = config.iterations;
  trace.residual_norms.reserve(K + 1);
  trace.chosen_indices.reserve(K);
  trace.q0_values.reserve(K + 1);
  trace.q_values.reserve(K + 1);
  trace.admissible_sizes.reserve(K + 1);
  if (!options.x_star.empty()) trace.sq_errors.reserve(K + 1);

  Rng rng = step_stream(config.seed);
  Scratch scratch;
  for (std::size_t k = 0;; ++k) {
    if (!options.x_star.empty()) trace.sq_errors.push_back(squared_distance(x, options.x_star));
    trace.residual_norms.push_back(norm2(r));
    if (config.record_diagnostics) {
      const auto d = quantile_diagnostic(x, *options.problem, config.q, beta, sigma_max);
      if (!d.noisy_holds()) ++trace.diagnostic_violations;
      trace.diagnostics.push_back(d);
    }
    if (k == K) {
      // Quantiles of the final state, for a trace covering every x_k.
      if (config.method == Method::rk) {
        trace.q0_values.push_back(kNoQuantile);
        trace.q_values.push_back(kNoQuantile);
        trace.admissible_sizes.push_back(m);
      } else {
        scratch.scaled = scaled_abs_residuals(sys, r);
        const RankBand band = rank_band(scratch.scaled, lv.lo, lv.hi, scratch.work, false);
        trace.q0_values.push_back(config.method == Method::dqrk ? band.lower_threshold : kNoQuantile);
        trace.q_values.push_back(band.upper_threshold);
        trace.admissible_sizes.push_back(band.indices.size());
      }
      break;
    }

    const StepInfo info = choose_and_project(sys, x, r, config.method, lv, rng, scratch);
    trace.chosen_indices.push_back(info.index);
    trace.q0_values.push_back(info.q0_value);
    trace.q_values.push_back(info.q_value);
    trace.admissible_sizes.push_back(info.admissible_size);

    if (gram != nullptr && (k + 1) % config.resync_interval != 0) {
      const double t = info.residual / sys.row_norm_sq(info.index);
      const double* g = gram + info.index * m;  // symmetric, so row i is column i
      for (std::size_t j = 0; j < m; ++j) r[j] -= t * g[j];
    } else {
      r = sys.residual(x);
    }
  }
  trace.final_x = std::move(x);
  return trace;
}

RunTrace run(const sysgen::CorruptedProblem& problem, const SolverConfig& config, const std::vector<double>* gram) {
  RunOptions options;
  options.x_star = problem.x_star;
  options.gram = gram;
  options.problem = &problem;
  return run(problem.a, problem.b, config, options);
}

HorizonEstimate horizon_estimate(std::span<const double> sq_errors, std::size_t window) {
  if (sq_errors.empty()) throw Error(ErrorKind::InvalidArgument, "trace has no error history");
  const std::size_t iterations = sq_errors.size() - 1;
  if (window == 0 || window > iterations) {
    throw Error(ErrorKind::WindowTooLarge, "window " + std::to_string(window) + " not in [1, " +
                                               std::to_string(iterations) + "]");
  }
  const auto tail = sq_errors.subspan(sq_errors.size() - window);
  return {*std::max_element(tail.begin(), tail.end()), window};
}

HorizonEstimate horizon_estimate(const RunTrace& trace, std::size_t window) {
  return horizon_estimate(trace.sq_errors, window);
}

std::string trace_to_csv(const RunTrace& trace) {
  const auto num = [](double v) { return std::isnan(v) ? std::string() : io::format_double(v); };
  std::string out = "k,sq_error,residual_norm,chosen_index,Q0,Q\n";
  for (std::size_t k = 0; k < trace.residual_norms.size(); ++k) {
    out += std::to_string(k);
    out += ',';
    if (k < trace.sq_errors.size()) out += io::format_double(trace.sq_errors[k]);
    out += ',';
    out += io::format_double(trace.residual_norms[k]);
    out += ',';
    if (k > 0) out += std::to_string(trace.chosen_indices[k - 1]);
    out += ',';
    out += num(trace.q0_values[k]);
    out += ',';
    out += num(trace.q_values[k]);
    out += '\n';
  }
  return out;
}

}  // namespace kqrk::solvers
