#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kqrk/matrix.hpp"
#include "kqrk/rational.hpp"

namespace kqrk::sysgen {

enum class Ensemble { gaussian, uniform };

const char* to_string(Ensemble e);
Ensemble parse_ensemble(std::string_view name);

/// Parameters of one corrupted system b = A x* + η + ξ.
struct GenSpec {
  std::size_t m = 0;
  std::size_t n = 0;
  Ensemble ensemble = Ensemble::gaussian;
  Rational beta{0, 1};
  double corruption_scale = 0.0;
  double noise_stddev = 1.0;
  bool disjoint_support = false;
  /// Corruption values in [-scale, scale] instead of [0, scale].
  bool signed_corruption = false;
  std::uint64_t seed = 0;

  /// Throws InvalidSpec describing the first violated constraint.
  void validate() const;
  std::size_t corrupted_count() const { return beta.count_of(m); }
};

nlohmann::json to_json(const GenSpec& spec);
GenSpec gen_spec_from_json(const nlohmann::json& j);

struct CorruptedProblem {
  DenseMatrix a;  // row-normalized
  std::vector<double> row_norms;  // norms of the raw draw before normalization
  std::vector<double> x_star;
  std::vector<double> b_true;
  std::vector<double> eta;
  std::vector<double> xi;
  std::vector<double> b;

  std::size_t m() const { return a.rows(); }
  std::size_t n() const { return a.cols(); }
  /// η + ξ, the full additive corruption.
  std::vector<double> epsilon() const;
};

/// Deterministic in spec.seed. Each random component (matrix, x*, support,
/// corruption values, noise) is drawn from its own derived stream.
CorruptedProblem generate(const GenSpec& spec);

struct Decomposition {
  std::vector<double> eta;
  std::vector<double> xi;
};

/// ξ takes the `count` largest-magnitude entries of ε (ties to the lowest
/// index) and η = ε − ξ, so the supports are disjoint.
Decomposition canonical_decomposition(std::span<const double> epsilon, std::size_t count);
Decomposition canonical_decomposition(std::span<const double> epsilon, const Rational& beta);

/// ε_(j): the j-th largest |ε_i|, 1-indexed.
double ordered_magnitude(std::span<const double> epsilon, std::size_t j);

/// Number of nonzero entries.
std::size_t support_size(std::span<const double> v);

struct VerifyReport {
  bool ok = true;
  std::vector<std::string> failures;
};

/// Re-checks every CorruptedProblem invariant. `beta`, when given, bounds ‖ξ‖₀.
VerifyReport verify_problem(const CorruptedProblem& p, const Rational* beta = nullptr,
                            bool expect_disjoint = false);

// Bundle directory: matrix.kqrk, x_star.csv, b_true.csv, eta.csv, xi.csv, b.csv
// and manifest.json {kind, spec, row_norms, checksums}.
void save_bundle(const std::filesystem::path& dir, const CorruptedProblem& p, const GenSpec& spec,
                 const std::string& tool_version);

struct LoadedBundle {
  CorruptedProblem problem;
  GenSpec spec;
};

/// Loads a bundle and checks file checksums against the manifest.
LoadedBundle load_bundle(const std::filesystem::path& dir);

}  // namespace kqrk::sysgen
