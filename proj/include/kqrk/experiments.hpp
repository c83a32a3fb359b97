#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kqrk/rational.hpp"
#include "kqrk/solvers.hpp"
#include "kqrk/sysgen.hpp"

namespace kqrk::experiments {

enum class Figure { fig1, fig2, fig3 };
const char* to_string(Figure f);
Figure parse_figure(std::string_view text);

enum class Profile { desk, paper, custom };
const char* to_string(Profile p);

struct ExperimentSpec {
  Figure figure = Figure::fig2;
  Profile profile = Profile::desk;
  std::size_t m = 1000;
  std::size_t n = 200;
  Rational beta{1, 20};
  Rational q0{3, 5};
  Rational q{4, 5};
  double noise_stddev = 1.0;
  /// Corruption scale for fig2; fig1 always uses 0.
  double scale = 100.0;
  std::vector<sysgen::Ensemble> ensembles{sysgen::Ensemble::gaussian, sysgen::Ensemble::uniform};
  std::vector<solvers::Method> methods{solvers::Method::rk, solvers::Method::qrk, solvers::Method::dqrk};
  std::size_t iterations = 20000;
  /// fig1/fig2: trial 0 gives the curves, extra trials add a min/max band.
  std::size_t trials = 1;
  std::vector<double> scales;  // fig3
  std::size_t horizon_window = 100;
  std::uint64_t seed = 1;
  /// Incremental residual updates (exact resync every `resync_interval` steps).
  bool incremental = true;
  std::size_t resync_interval = 1000;

  /// m = 1000, n = 200, 2·10⁴ iterations.
  static ExperimentSpec desk(Figure f);
  /// m = 5000, n = 2500, 5·10⁴ iterations.
  static ExperimentSpec paper(Figure f);

  /// Throws InvalidSpec for empty method lists, empty fig3 scale grids and the like.
  void validate() const;
  sysgen::GenSpec gen_spec(sysgen::Ensemble e, double corruption_scale, std::uint64_t problem_seed) const;
};

nlohmann::json to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const nlohmann::json& j);

/// Problem seed for (group, trial): group is the ensemble index for fig1/fig2
/// and the scale index for fig3. Independent of the figure, so fig2 at scale 0
/// sees exactly fig1's problems.
std::uint64_t problem_seed(std::uint64_t seed, std::size_t group, std::size_t trial);
std::uint64_t solver_seed(std::uint64_t seed, std::size_t group, std::size_t trial);

struct CurveSet {
  sysgen::Ensemble ensemble = sysgen::Ensemble::gaussian;
  /// curves[method] = ‖x_k − x*‖² for k = 0..K, trial 0.
  std::vector<std::vector<double>> curves;
  /// Per-k envelopes over all trials; empty when trials = 1.
  std::vector<std::vector<double>> band_min;
  std::vector<std::vector<double>> band_max;
  /// horizons[trial][method].
  std::vector<std::vector<double>> horizons;
};

struct ScatterPoint {
  double scale = 0.0;
  std::size_t trial = 0;
  solvers::Method method = solvers::Method::rk;
  double ratio = 0.0;    // ε_(1)/ε_((1−q)m+1)
  double horizon = 0.0;  // max squared error over the last window
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<CurveSet> curve_sets;  // fig1/fig2
  std::vector<ScatterPoint> points;  // fig3, ordered by (scale, trial, method)
  /// Not serialized; only run manifests record timings.
  double wall_seconds = 0.0;
};

/// `threads` caps the worker pool; 0 means hardware concurrency. Output does
/// not depend on it.
ExperimentResult run(const ExperimentSpec& spec, std::size_t threads = 1);
ExperimentResult run_fig1(const ExperimentSpec& spec, std::size_t threads = 1);
ExperimentResult run_fig2(const ExperimentSpec& spec, std::size_t threads = 1);
ExperimentResult run_fig3(const ExperimentSpec& spec, std::size_t threads = 1);

/// ε_(1)/ε_((1−q)m+1) of a realized corruption vector.
double corruption_ratio(std::span<const double> epsilon, const Rational& q);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

nlohmann::json to_json(const ExperimentResult& r);
ExperimentResult result_from_json(const nlohmann::json& j);

/// CSV files by name. fig1/fig2: data.csv (ensemble,k,<methods>) plus
/// data_<ensemble>.csv (k,<methods>), horizons.csv, and band_<ensemble>.csv
/// when trials > 1. fig3: data.csv (scale,trial,method,ratio,horizon).
std::map<std::string, std::string> render_csv(const ExperimentResult& r);
std::string render_svg(const ExperimentResult& r);

/// Writes the CSVs, plot.svg and result.json (with `manifest` embedded when
/// given). Returns the written file names.
std::vector<std::string> emit(const ExperimentResult& r, const std::filesystem::path& dir,
                              const nlohmann::json& manifest = nullptr);

}  // namespace kqrk::experiments
