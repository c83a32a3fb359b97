#include "kqrk/sysgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kqrk/error.hpp"
#include "kqrk/rng.hpp"

namespace kqrk::sysgen {

const char* to_string(Ensemble e) { return e == Ensemble::gaussian ? "gaussian" : "uniform"; }

Ensemble parse_ensemble(std::string_view name) {
  if (name == "gaussian") return Ensemble::gaussian;
  if (name == "uniform") return Ensemble::uniform;
  throw Error(ErrorKind::InvalidSpec, "unknown ensemble '" + std::string(name) + "'");
}

void GenSpec::validate() const {
  if (n < 1) throw Error(ErrorKind::InvalidSpec, "n must be at least 1");
  if (m < n) throw Error(ErrorKind::InvalidSpec, "m must be at least n");
  if (beta < Rational(0, 1) || beta > Rational(1, 1)) throw Error(ErrorKind::InvalidSpec, "beta outside [0, 1]");
  if (!beta.scales_to_integer(m)) {
    throw Error(ErrorKind::InvalidSpec, "beta·m must be an integer (beta = " + beta.str() + ", m = " +
                                            std::to_string(m) + ")");
  }
  if (!(corruption_scale >= 0.0) || !std::isfinite(corruption_scale)) {
    throw Error(ErrorKind::InvalidSpec, "corruption scale must be finite and nonnegative");
  }
  if (!(noise_stddev >= 0.0) || !std::isfinite(noise_stddev)) {
    throw Error(ErrorKind::InvalidSpec, "noise stddev must be finite and nonnegative");
  }
}

nlohmann::json to_json(const GenSpec& spec) {
  return {
      {"m", spec.m},
      {"n", spec.n},
      {"ensemble", to_string(spec.ensemble)},
      {"beta", spec.beta.str()},
      {"corruption_scale", spec.corruption_scale},
      {"noise_stddev", spec.noise_stddev},
      {"disjoint_support", spec.disjoint_support},
      {"signed_corruption", spec.signed_corruption},
      {"seed", spec.seed},
  };
}

GenSpec gen_spec_from_json(const nlohmann::json& j) {
  try {
    GenSpec s;
    s.m = j.at("m").get<std::size_t>();
    s.n = j.at("n").get<std::size_t>();
    s.ensemble = parse_ensemble(j.at("ensemble").get<std::string>());
    s.beta = Rational::parse(j.at("beta").get<std::string>());
    s.corruption_scale = j.at("corruption_scale").get<double>();
    s.noise_stddev = j.at("noise_stddev").get<double>();
    s.disjoint_support = j.at("disjoint_support").get<bool>();
    s.signed_corruption = j.value("signed_corruption", false);
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("bad generation spec: ") + e.what());
  }
}

std::vector<double> CorruptedProblem::epsilon() const {
  std::vector<double> e(eta.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = eta[i] + xi[i];
  return e;
}

CorruptedProblem generate(const GenSpec& spec) {
  spec.validate();
  const std::size_t m = spec.m, n = spec.n;
  const Rng root(spec.seed);

  Rng matrix_rng = root.split("matrix");
  std::vector<double> raw(m * n);
  for (double& v : raw) v = spec.ensemble == Ensemble::gaussian ? matrix_rng.normal() : matrix_rng.uniform01();
  auto normalized = row_normalize(DenseMatrix(m, n, std::move(raw)));

  CorruptedProblem p{std::move(normalized.matrix), std::move(normalized.norms), {}, {}, {}, {}, {}};

  Rng x_rng = root.split("x_star");
  p.x_star.resize(n);
  for (double& v : p.x_star) v = x_rng.normal();
  p.b_true = p.a.multiply(p.x_star);

  // Support: partial Fisher-Yates, then ascending so values map to indices in order.
  const std::size_t k = spec.corrupted_count();
  Rng support_rng = root.split("support");
  std::vector<std::size_t> pool(m);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + support_rng.below(m - i)]);
  std::vector<std::size_t> support(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(support.begin(), support.end());

  Rng value_rng = root.split("corruption");
  p.xi.assign(m, 0.0);
  std::vector<char> in_support(m, 0);
  for (std::size_t idx : support) {
    const double lo = spec.signed_corruption ? -spec.corruption_scale : 0.0;
    p.xi[idx] = spec.corruption_scale == 0.0 ? 0.0 : value_rng.uniform(lo, spec.corruption_scale);
    in_support[idx] = 1;
  }

  Rng noise_rng = root.split("noise");
  p.eta.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double z = noise_rng.normal();  // drawn unconditionally to keep the stream aligned
    if (spec.noise_stddev == 0.0 || (spec.disjoint_support && in_support[i])) continue;
    p.eta[i] = spec.noise_stddev * z;
  }

  p.b.resize(m);
  for (std::size_t i = 0; i < m; ++i) p.b[i] = (p.b_true[i] + p.eta[i]) + p.xi[i];
  return p;
}

namespace {

// Indices ordered by decreasing |ε|, ties to the lowest index.
std::vector<std::size_t> magnitude_order(std::span<const double> epsilon, std::size_t count) {
  std::vector<std::size_t> order(epsilon.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto before = [&](std::size_t a, std::size_t b) {
    const double fa = std::abs(epsilon[a]), fb = std::abs(epsilon[b]);
    return fa > fb || (fa == fb && a < b);
  };
  if (count < order.size()) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(), before);
    order.resize(count);
  }
  std::sort(order.begin(), order.end(), before);
  return order;
}

}  // namespace

Decomposition canonical_decomposition(std::span<const double> epsilon, std::size_t count) {
  if (count > epsilon.size()) throw Error(ErrorKind::InvalidArgument, "sparsity count exceeds length");
  Decomposition d{std::vector<double>(epsilon.begin(), epsilon.end()), std::vector<double>(epsilon.size(), 0.0)};
  for (std::size_t idx : magnitude_order(epsilon, count)) {
    d.xi[idx] = epsilon[idx];
    d.eta[idx] = 0.0;
  }
  return d;
}

Decomposition canonical_decomposition(std::span<const double> epsilon, const Rational& beta) {
  return canonical_decomposition(epsilon, beta.count_of(epsilon.size()));
}

double ordered_magnitude(std::span<const double> epsilon, std::size_t j) {
  if (j < 1 || j > epsilon.size()) {
    throw Error(ErrorKind::IndexOutOfRange,
                "order index " + std::to_string(j) + " outside [1, " + std::to_string(epsilon.size()) + "]");
  }
  std::vector<double> mag(epsilon.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(epsilon[i]);
  const auto kth = mag.begin() + static_cast<std::ptrdiff_t>(j - 1);
  std::nth_element(mag.begin(), kth, mag.end(), std::greater<>());
  return *kth;
}

std::size_t support_size(std::span<const double> v) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return x != 0.0; }));
}

VerifyReport verify_problem(const CorruptedProblem& p, const Rational* beta, bool expect_disjoint) {
  VerifyReport r;
  const auto fail = [&r](std::string msg) {
    r.ok = false;
    r.failures.push_back(std::move(msg));
  };
  const std::size_t m = p.m();
  if (p.x_star.size() != p.n() || p.b_true.size() != m || p.eta.size() != m || p.xi.size() != m ||
      p.b.size() != m) {
    fail("vector lengths do not match the matrix dimensions");
    return r;
  }
  if (!p.a.row_normalized()) fail("matrix is not flagged row-normalized");
  const auto ax = p.a.multiply(p.x_star);
  for (std::size_t i = 0; i < m; ++i) {
    if (std::abs(ax[i] - p.b_true[i]) > 1e-10) {
      fail("b_true != A x* at row " + std::to_string(i));
      break;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (p.b[i] != (p.b_true[i] + p.eta[i]) + p.xi[i]) {
      fail("b != b_true + eta + xi at row " + std::to_string(i));
      break;
    }
  }
  if (beta != nullptr && support_size(p.xi) > beta->count_of(m)) {
    fail("xi has " + std::to_string(support_size(p.xi)) + " nonzeros, more than beta·m = " +
         std::to_string(beta->count_of(m)));
  }
  if (expect_disjoint) {
    for (std::size_t i = 0; i < m; ++i) {
      if (p.eta[i] != 0.0 && p.xi[i] != 0.0) {
        fail("supports of eta and xi intersect at row " + std::to_string(i));
        break;
      }
    }
  }
  if (!p.row_norms.empty()) {
    if (p.row_norms.size() != m) fail("row norm count mismatch");
    for (double v : p.row_norms)
      if (!(v > 0.0)) {
        fail("nonpositive row norm");
        break;
      }
  }
  return r;
}

}  // namespace kqrk::sysgen
