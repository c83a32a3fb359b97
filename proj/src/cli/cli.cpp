#include "kqrk/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "kqrk/bounds.hpp"
#include "kqrk/error.hpp"
#include "kqrk/experiments.hpp"
#include "kqrk/io.hpp"
#include "kqrk/solvers.hpp"
#include "kqrk/sysgen.hpp"
#include "kqrk/version.hpp"

namespace kqrk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kManifestSchemaVersion = 1;

json RunManifest::to_json() const {
  json snap_list = json::array();
  for (const auto& s : snaps) snap_list.push_back({{"flag", s.flag}, {"given", s.given}, {"resolved", s.resolved}});
  json j = {{"kind", "run"},
            {"schema_version", kManifestSchemaVersion},
            {"tool", "kqrk"},
            {"version", kVersion},
            {"build", kBuildHash},
            {"subcommand", subcommand},
            {"argv", argv},
            {"parameters", parameters},
            {"seeds", seeds},
            {"snaps", snap_list},
            {"inputs", inputs},
            {"outputs", outputs},
            {"execution", execution}};
  if (wall_seconds) j["wall_seconds"] = *wall_seconds;
  return j;
}

json RunManifest::embedded() const {
  json j = to_json();
  for (const char* key : {"argv", "outputs", "execution", "wall_seconds", "inputs"}) j.erase(key);
  return j;
}

std::string version_string() { return std::string("kqrk ") + kVersion + " (build " + kBuildHash + ")"; }

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

std::map<std::string, std::map<std::string, std::string>> parse_config(const std::string& text) {
  std::map<std::string, std::map<std::string, std::string>> out;
  std::string section;
  std::istringstream in(text);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const auto where = "config line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorKind::InvalidArgument, where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::InvalidArgument, where + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (key.empty()) throw Error(ErrorKind::InvalidArgument, where + ": empty key");
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    if (!out[section].emplace(key, value).second) {
      throw Error(ErrorKind::InvalidArgument, where + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

namespace {

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> argv;
  std::size_t threads = 1;
  bool strict = false;
  std::string config;
  std::vector<Snap> snaps;
};

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// Moves a level to the nearest k/m with k in [lo, hi], or refuses under --strict.
Rational resolve_level(Context& ctx, const std::string& flag, const std::string& text, std::size_t m, std::int64_t lo,
                       std::int64_t hi) {
  const Rational given = Rational::parse(text);
  const std::string name = flag.substr(2);
  if (given.num() < 0 || given > Rational(1, 1)) {
    throw Error(ErrorKind::InvalidArgument, flag + ": " + name + " must lie in [0, 1], got " + text);
  }
  const auto mm = static_cast<std::int64_t>(m);
  if (given.scales_to_integer(m)) {
    const auto k = static_cast<std::int64_t>(given.count_of(m));
    if (k >= lo && k <= hi) return given;
  }
  const Rational snapped = Rational::nearest_feasible(given.to_double(), m, lo, hi);
  const std::string range = "[" + Rational(lo, mm).str() + ", " + Rational(hi, mm).str() + "]";
  if (ctx.strict) {
    throw Error(ErrorKind::NonIntegerQuantile, flag + ": " + name + "·m must be an integer with " + name + " in " +
                                                   range + " (m = " + std::to_string(m) + "); nearest feasible " +
                                                   name + " = " + fixed4(snapped.to_double()));
  }
  ctx.err << "note: " << flag << " " << text << " snapped to " << fixed4(snapped.to_double()) << " (" << snapped.str()
          << ") so that " << name << "·m is an integer\n";
  ctx.snaps.push_back({flag, text, snapped.str()});
  return snapped;
}

RunManifest new_manifest(const Context& ctx, const std::string& sub) {
  RunManifest man;
  man.subcommand = sub;
  man.argv = ctx.argv;
  man.snaps = ctx.snaps;
  if (!ctx.config.empty()) man.inputs[ctx.config] = io::file_checksum(ctx.config);
  return man;
}

void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(2) + "\n"); }

fs::path manifest_path_for(const fs::path& output) {
  auto p = output;
  p.replace_extension(".manifest.json");
  return p;
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + file.parent_path().string() + ": " + ec.message());
  }
}

std::string problem_checksum(const fs::path& dir) { return io::file_checksum(dir / "manifest.json"); }

// ---- gen ----

struct GenOptions {
  std::size_t m = 0, n = 0;
  std::string beta = "0";
  double scale = 0.0;
  double noise = 1.0;
  std::string ensemble = "gaussian";
  bool disjoint = false;
  bool signed_corruption = false;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen(Context& ctx, const GenOptions& o) {
  sysgen::GenSpec s;
  s.m = o.m;
  s.n = o.n;
  s.ensemble = sysgen::parse_ensemble(o.ensemble);
  if (o.m == 0) throw Error(ErrorKind::InvalidSpec, "--m must be positive");
  s.beta = resolve_level(ctx, "--beta", o.beta, o.m, 0, static_cast<std::int64_t>(o.m) - 1);
  s.corruption_scale = o.scale;
  s.noise_stddev = o.noise;
  s.disjoint_support = o.disjoint;
  s.signed_corruption = o.signed_corruption;
  s.seed = o.seed;
  s.validate();
  const auto p = sysgen::generate(s);
  const fs::path dir(o.out);
  sysgen::save_bundle(dir, p, s, version_string());

  auto bundle = json::parse(io::read_file(dir / "manifest.json"));
  auto man = new_manifest(ctx, "gen");
  man.parameters = sysgen::to_json(s);
  man.seeds = {{"seed", s.seed}};
  for (const auto& [name, sum] : bundle.at("checksums").items()) man.outputs[name] = sum.get<std::string>();
  bundle["run"] = man.to_json();
  write_json(dir / "manifest.json", bundle);
  ctx.out << "wrote problem " << dir.string() << ": m=" << s.m << " n=" << s.n << " beta=" << s.beta.str()
          << " corrupted=" << sysgen::support_size(p.xi) << "\n";
  return kExitOk;
}

// ---- solve ----

struct SolveOptions {
  std::string problem;
  std::string method;
  std::string q = "0.8";
  std::string q0 = "0.6";
  std::size_t iterations = 20000;
  std::uint64_t seed = 0;
  std::string init;
  std::string x0;
  std::string residuals = "incremental";
  std::size_t resync = 1000;
  bool diagnostics = false;
  std::size_t window = 100;
  std::string out;
};

solvers::InitPolicy parse_init(const std::string& s) {
  if (s == "zero") return solvers::InitPolicy::zero;
  if (s == "given") return solvers::InitPolicy::given;
  if (s == "project_first" || s == "project-first") return solvers::InitPolicy::project_first;
  throw Error(ErrorKind::InvalidArgument, "--init must be zero, given or project_first, got '" + s + "'");
}

int cmd_solve(Context& ctx, const SolveOptions& o) {
  const auto loaded = sysgen::load_bundle(o.problem);
  const auto& p = loaded.problem;
  const std::size_t m = p.m();
  const auto mm = static_cast<std::int64_t>(m);
  const auto method = solvers::parse_method(o.method);
  auto cfg = solvers::default_config(method);
  if (method != solvers::Method::rk) cfg.q = resolve_level(ctx, "--q", o.q, m, 1, mm);
  if (method == solvers::Method::dqrk) cfg.q0 = resolve_level(ctx, "--q0", o.q0, m, 1, mm - 1);
  cfg.iterations = o.iterations;
  cfg.seed = o.seed;
  if (!o.init.empty()) cfg.init = parse_init(o.init);
  if (!o.x0.empty()) cfg.x0 = io::vector_from_csv(io::read_file(o.x0));
  if (cfg.init == solvers::InitPolicy::given && o.x0.empty()) {
    throw Error(ErrorKind::InvalidArgument, "--init given needs --x0 FILE");
  }
  if (o.residuals == "incremental") {
    cfg.residuals = solvers::ResidualMode::incremental;
  } else if (o.residuals != "full") {
    throw Error(ErrorKind::InvalidArgument, "--residuals must be full or incremental");
  }
  cfg.resync_interval = o.resync;
  cfg.record_diagnostics = o.diagnostics;
  cfg.validate(m, p.n());
  if (o.window == 0 || o.window > o.iterations) {
    throw Error(ErrorKind::WindowTooLarge, "--window must be in [1, --iters]");
  }

  const auto trace = solvers::run(p, cfg);
  const fs::path out(o.out);
  ensure_parent(out);
  const std::string csv = solvers::trace_to_csv(trace);
  io::write_file(out, csv);

  auto man = new_manifest(ctx, "solve");
  json params = {{"problem", o.problem},
                 {"method", solvers::to_string(method)},
                 {"iterations", cfg.iterations},
                 {"init", solvers::to_string(cfg.init)},
                 {"residuals", solvers::to_string(cfg.residuals)},
                 {"resync_interval", cfg.resync_interval},
                 {"diagnostics", cfg.record_diagnostics},
                 {"window", o.window}};
  if (method != solvers::Method::rk) params["q"] = cfg.q.str();
  if (method == solvers::Method::dqrk) params["q0"] = cfg.q0.str();
  man.parameters = params;
  man.seeds = {{"seed", cfg.seed}};
  man.inputs[o.problem] = problem_checksum(o.problem);
  if (!o.x0.empty()) man.inputs[o.x0] = io::file_checksum(o.x0);
  man.outputs[out.filename().string()] = io::checksum(csv);
  write_json(manifest_path_for(out), man.to_json());

  const auto h = solvers::horizon_estimate(trace, o.window);
  ctx.out << "method " << solvers::to_string(method) << ", " << trace.iterations() << " iterations\n"
          << "final squared error " << io::format_double(trace.sq_errors.back()) << "\n"
          << "horizon estimate (last " << h.window << ") " << io::format_double(h.value) << "\n"
          << "start on a hyperplane: " << (trace.start_on_hyperplane ? "yes" : "no") << "\n";
  if (cfg.record_diagnostics) ctx.out << "quantile diagnostic violations: " << trace.diagnostic_violations << "\n";
  ctx.out << "wrote " << out.string() << "\n";
  return kExitOk;
}

// ---- bounds ----

struct BoundsOptions {
  std::string problem;
  std::string beta;
  std::string q = "0.8";
  std::string q0;
  std::string sigma_mode = "exact";
  std::uint64_t sigma_seed = 0;
  std::uint64_t cap = kDefaultEnumerationCap;
  std::string start = "project_first";
  std::string out;
};

int cmd_bounds(Context& ctx, const BoundsOptions& o) {
  const auto loaded = sysgen::load_bundle(o.problem);
  const auto& p = loaded.problem;
  const std::size_t m = p.m();
  const auto mm = static_cast<std::int64_t>(m);
  const Rational beta = o.beta.empty() ? bounds::infer_beta(p.xi) : resolve_level(ctx, "--beta", o.beta, m, 0, mm - 1);
  const Rational q = resolve_level(ctx, "--q", o.q, m, 1, mm);
  const auto params = o.q0.empty() ? bounds::RobustParams::for_qrk(beta, q)
                                   : bounds::RobustParams::for_dqrk(beta, resolve_level(ctx, "--q0", o.q0, m, 1, mm - 1), q);
  params.validate();
  auto sigma = bounds::SigmaOptions::parse(o.sigma_mode);
  sigma.seed = o.sigma_seed;
  sigma.cap = o.cap;
  if (o.start != "project_first" && o.start != "zero") {
    throw Error(ErrorKind::InvalidArgument, "--start must be project_first or zero");
  }

  bounds::SpectralSummary summary;
  try {
    summary = bounds::summarize(p.a, params, sigma);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::TooManySubsets) throw;
    throw Error(ErrorKind::TooManySubsets, std::string(e.what()) + "; raise --cap or use --sigma-mode sampled:N");
  }
  bounds::ReportInputs inputs;
  inputs.epsilon = p.epsilon();
  if (params.is_dqrk()) inputs.start_on_hyperplane = o.start == "project_first";
  const auto report = bounds::bound_report(summary, params, inputs);

  const fs::path out(o.out);
  ensure_parent(out);
  const std::string text = report.dump(2) + "\n";
  io::write_file(out, text);

  auto man = new_manifest(ctx, "bounds");
  man.parameters = {{"problem", o.problem},
                    {"beta", beta.str()},
                    {"beta_inferred", o.beta.empty()},
                    {"q", q.str()},
                    {"sigma_mode", sigma.str()},
                    {"cap", sigma.cap},
                    {"start", o.start}};
  if (params.q0) man.parameters["q0"] = params.q0->str();
  man.seeds = {{"sigma_seed", sigma.seed}};
  man.inputs[o.problem] = problem_checksum(o.problem);
  man.outputs[out.filename().string()] = io::checksum(text);
  write_json(manifest_path_for(out), man.to_json());

  ctx.out << "condition mode " << report["condition_mode"].get<std::string>() << ", beta " << beta.str() << ", q "
          << q.str();
  if (params.q0) ctx.out << ", q0 " << params.q0->str();
  ctx.out << "\n";
  for (const auto& b : report["bounds"]) {
    ctx.out << "  " << b["tag"].get<std::string>() << ": ";
    if (b.contains("error")) {
      ctx.out << "not applicable (" << b["error"].get<std::string>() << ")\n";
    } else if (b.contains("rate")) {
      ctx.out << "C = " << b["rate"]["C"].dump() << ", hypothesis " << b["rate"]["condition"]["verdict"].get<std::string>()
              << ", horizon " << b["horizon"].dump() << "\n";
    } else if (b.contains("C")) {
      ctx.out << "C = " << b["C"].dump() << ", hypothesis " << b["condition"]["verdict"].get<std::string>() << "\n";
    } else if (b.contains("alpha1")) {
      ctx.out << "alpha1 = " << b["alpha1"].dump() << ", alpha2 = " << b["alpha2"].dump() << ", hypotheses "
              << (b["hypotheses_hold"].get<bool>() ? "hold" : "fail") << "\n";
    } else if (b.contains("verdict")) {
      ctx.out << "verdict " << b["verdict"].get<std::string>() << "\n";
    } else if (b.contains("horizon")) {
      ctx.out << "horizon " << b["horizon"].dump() << "\n";
    } else {
      ctx.out << "see report\n";
    }
  }
  ctx.out << "wrote " << out.string() << "\n";
  return kExitOk;
}

// ---- experiment ----

struct ExperimentOptions {
  std::string figure;
  bool desk = false, paper = false;
  std::optional<std::size_t> m, n, iterations, trials, window, resync;
  std::optional<std::string> beta, q, q0;
  std::optional<double> noise, scale;
  std::optional<std::uint64_t> seed;
  std::vector<double> scales;
  std::vector<std::string> methods, ensembles;
  bool full_residuals = false;
  std::string out;
};

int cmd_experiment(Context& ctx, const ExperimentOptions& o) {
  const auto figure = experiments::parse_figure(o.figure);
  auto s = o.paper ? experiments::ExperimentSpec::paper(figure) : experiments::ExperimentSpec::desk(figure);
  if (o.m || o.n || o.iterations) s.profile = experiments::Profile::custom;
  if (o.m) s.m = *o.m;
  if (o.n) s.n = *o.n;
  if (o.iterations) s.iterations = *o.iterations;
  if (o.trials) s.trials = *o.trials;
  if (o.window) s.horizon_window = *o.window;
  if (o.resync) s.resync_interval = *o.resync;
  if (o.noise) s.noise_stddev = *o.noise;
  if (o.scale) s.scale = *o.scale;
  if (o.seed) s.seed = *o.seed;
  if (!o.scales.empty()) s.scales = o.scales;
  if (!o.methods.empty()) {
    s.methods.clear();
    for (const auto& m : o.methods) s.methods.push_back(solvers::parse_method(m));
  }
  if (!o.ensembles.empty()) {
    s.ensembles.clear();
    for (const auto& e : o.ensembles) s.ensembles.push_back(sysgen::parse_ensemble(e));
  }
  if (o.full_residuals) s.incremental = false;
  if (s.m == 0) throw Error(ErrorKind::InvalidSpec, "--m must be positive");
  const auto mm = static_cast<std::int64_t>(s.m);
  s.beta = resolve_level(ctx, "--beta", o.beta.value_or(s.beta.str()), s.m, 0, mm - 1);
  s.q = resolve_level(ctx, "--q", o.q.value_or(s.q.str()), s.m, 1, mm);
  s.q0 = resolve_level(ctx, "--q0", o.q0.value_or(s.q0.str()), s.m, 1, mm - 1);
  if (figure == experiments::Figure::fig1) s.scale = 0.0;
  s.validate();

  const auto result = experiments::run(s, ctx.threads);
  auto man = new_manifest(ctx, "experiment");
  man.parameters = experiments::to_json(s);
  man.seeds = {{"seed", s.seed}};
  man.execution = {{"threads", ctx.threads}};
  const fs::path dir(o.out);
  const auto written = experiments::emit(result, dir, man.embedded());
  for (const auto& name : written) man.outputs[name] = io::file_checksum(dir / name);
  man.wall_seconds = result.wall_seconds;
  write_json(dir / "manifest.json", man.to_json());

  if (figure == experiments::Figure::fig3) {
    std::vector<double> scale_of_rk, rk;
    std::map<double, std::pair<double, std::size_t>> dq;
    for (const auto& p : result.points) {
      if (p.method == solvers::Method::rk) {
        scale_of_rk.push_back(p.scale);
        rk.push_back(p.horizon);
      } else if (p.method == solvers::Method::dqrk) {
        dq[p.scale].first += p.horizon;
        dq[p.scale].second += 1;
      }
    }
    ctx.out << "fig3: " << result.points.size() << " points\n";
    if (rk.size() >= 2) ctx.out << "  spearman(scale, RK horizon) = " << experiments::spearman(scale_of_rk, rk) << "\n";
    if (!dq.empty()) {
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      for (const auto& [sc, acc] : dq) {
        const double mean = acc.first / static_cast<double>(acc.second);
        lo = std::min(lo, mean);
        hi = std::max(hi, mean);
      }
      ctx.out << "  dqRK mean horizon max/min across scales = " << hi / lo << "\n";
    }
  } else {
    for (const auto& cs : result.curve_sets) {
      ctx.out << experiments::to_string(figure) << " " << sysgen::to_string(cs.ensemble) << " horizons:";
      for (std::size_t mi = 0; mi < s.methods.size(); ++mi) {
        ctx.out << " " << solvers::to_string(s.methods[mi]) << "=" << cs.horizons[0][mi];
      }
      ctx.out << "\n";
    }
  }
  ctx.out << "wrote " << written.size() << " files and manifest.json to " << dir.string() << " in "
          << fixed4(result.wall_seconds) << " s\n";
  return kExitOk;
}

// ---- verify ----

struct VerifyOptions {
  std::string problem;
  std::string dir;
};

std::vector<std::string> verify_bundle(const fs::path& dir, std::ostream& log) {
  std::vector<std::string> failures;
  try {
    const auto loaded = sysgen::load_bundle(dir);
    const auto report = sysgen::verify_problem(loaded.problem, &loaded.spec.beta, loaded.spec.disjoint_support);
    for (const auto& f : report.failures) failures.push_back(dir.string() + ": " + f);
  } catch (const Error& e) {
    failures.push_back(dir.string() + ": " + e.what());
  }
  if (failures.empty()) log << "ok " << dir.string() << " (problem bundle)\n";
  return failures;
}

int cmd_verify(Context& ctx, const VerifyOptions& o) {
  if (o.problem.empty() == o.dir.empty()) throw Error(ErrorKind::InvalidArgument, "give exactly one of --problem and --dir");
  const auto failures = o.problem.empty() ? verify_directory(o.dir, ctx.out) : verify_bundle(o.problem, ctx.out);
  for (const auto& f : failures) ctx.err << "FAIL " << f << "\n";
  return failures.empty() ? kExitOk : kExitRuntime;
}

// ---- config injection ----

bool has_flag(const std::vector<std::string>& args, const std::string& key) {
  const std::string flag = "--" + key;
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

bool truthy(const std::string& key, const std::string& v) {
  std::string l = v;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "true" || l == "yes" || l == "on" || l == "1") return true;
  if (l == "false" || l == "no" || l == "off" || l == "0") return false;
  throw Error(ErrorKind::InvalidArgument, "config key '" + key + "' is a switch; use true or false");
}

// Adds config-file values for every option the command line leaves unset.
std::vector<std::string> apply_config(CLI::App& app, const std::map<std::string, CLI::App*>& subs,
                                      std::vector<std::string> args, std::string& config_path) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty()) return args;
  std::string sub_name;
  for (const auto& a : args) {
    if (subs.count(a)) {
      sub_name = a;
      break;
    }
  }
  const auto sections = parse_config(io::read_file(config_path));
  std::vector<std::string> front, back;
  for (const auto& [section, entries] : sections) {
    if (!section.empty() && !subs.count(section)) {
      throw Error(ErrorKind::InvalidArgument, "config: unknown section [" + section + "]");
    }
    if (!section.empty() && section != sub_name) continue;
    CLI::App* sub = sub_name.empty() ? nullptr : subs.at(sub_name);
    for (const auto& [key, value] : entries) {
      if (key == "config") throw Error(ErrorKind::InvalidArgument, "config files cannot include other config files");
      CLI::Option* opt = sub ? sub->get_option_no_throw("--" + key) : nullptr;
      const bool global = opt == nullptr;
      if (global) opt = app.get_option_no_throw("--" + key);
      if (!opt) {
        throw Error(ErrorKind::InvalidArgument, "config: unknown key '" + key + "'" +
                                                    (sub_name.empty() ? "" : " for subcommand " + sub_name));
      }
      if (has_flag(args, key)) continue;
      auto& dest = global ? front : back;
      if (opt->get_expected_max() == 0) {
        if (truthy(key, value)) dest.push_back("--" + key);
      } else {
        dest.push_back("--" + key);
        dest.push_back(value);
      }
    }
  }
  std::vector<std::string> merged = front;
  merged.insert(merged.end(), args.begin(), args.end());
  merged.insert(merged.end(), back.begin(), back.end());
  return merged;
}

}  // namespace

std::vector<std::string> verify_directory(const fs::path& dir, std::ostream& log) {
  std::vector<std::string> failures;
  if (!fs::is_directory(dir)) return {dir.string() + ": not a directory"};
  std::vector<fs::path> manifests;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() >= 13 && name.compare(name.size() - 13, 13, "manifest.json") == 0) {
      manifests.push_back(entry.path());
    }
  }
  std::sort(manifests.begin(), manifests.end());
  if (manifests.empty()) failures.push_back(dir.string() + ": no manifest found");
  for (const auto& path : manifests) {
    json j;
    try {
      j = json::parse(io::read_file(path));
    } catch (const std::exception& e) {
      failures.push_back(path.string() + ": unreadable manifest: " + e.what());
      continue;
    }
    const std::string kind = j.value("kind", "");
    if (kind == "problem") {
      auto f = verify_bundle(path.parent_path(), log);
      failures.insert(failures.end(), f.begin(), f.end());
      continue;
    }
    if (kind != "run" || !j.contains("outputs")) {
      failures.push_back(path.string() + ": not a run manifest");
      continue;
    }
    std::size_t bad = 0;
    for (const auto& [name, sum] : j["outputs"].items()) {
      const auto file = path.parent_path() / name;
      if (!fs::exists(file)) {
        failures.push_back(path.string() + ": missing output " + name);
        ++bad;
      } else if (io::file_checksum(file) != sum.get<std::string>()) {
        failures.push_back(path.string() + ": checksum mismatch for " + name);
        ++bad;
      }
    }
    if (bad == 0) log << "ok " << path.string() << " (" << j["outputs"].size() << " outputs)\n";
  }
  return failures;
}

int dispatch(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Context ctx{out, err, raw_args, 1, false, {}, {}};
  CLI::App app{"Quantile-based randomized Kaczmarz toolkit", "kqrk"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());
  app.add_option("--threads", ctx.threads, "Worker threads for experiments (0: all cores)")->capture_default_str();
  app.add_flag("--strict", ctx.strict, "Refuse levels needing a snap instead of moving them");
  app.add_option("--config", ctx.config, "key = value file supplying any flag");

  GenOptions go;
  auto* gen = app.add_subcommand("gen", "Generate a corrupted linear system bundle");
  gen->add_option("--m", go.m, "Rows")->required();
  gen->add_option("--n", go.n, "Columns")->required();
  gen->add_option("--beta", go.beta, "Corrupted fraction (snapped to k/m)")->capture_default_str();
  gen->add_option("--scale", go.scale, "Corruption magnitude bound")->capture_default_str();
  gen->add_option("--noise", go.noise, "Noise standard deviation")->capture_default_str();
  gen->add_option("--ensemble", go.ensemble, "gaussian or uniform")->capture_default_str();
  gen->add_flag("--disjoint", go.disjoint, "Keep noise off the corrupted rows");
  gen->add_flag("--signed", go.signed_corruption, "Corruption values in [-scale, scale]");
  gen->add_option("--seed", go.seed, "Seed")->capture_default_str();
  gen->add_option("--out", go.out, "Output directory")->required();

  SolveOptions so;
  auto* solve = app.add_subcommand("solve", "Run RK, qRK or dqRK on a problem bundle");
  solve->add_option("--problem", so.problem, "Problem bundle directory")->required();
  solve->add_option("--method", so.method, "rk, qrk or dqrk")->required();
  solve->add_option("--q", so.q, "Upper quantile level")->capture_default_str();
  solve->add_option("--q0", so.q0, "Lower quantile level (dqrk)")->capture_default_str();
  solve->add_option("--iters", so.iterations, "Iterations")->capture_default_str();
  solve->add_option("--seed", so.seed, "Seed")->capture_default_str();
  solve->add_option("--init", so.init, "zero, given or project_first (default depends on method)");
  solve->add_option("--x0", so.x0, "Start vector CSV");
  solve->add_option("--residuals", so.residuals, "full or incremental")->capture_default_str();
  solve->add_option("--resync", so.resync, "Full residual recompute interval")->capture_default_str();
  solve->add_flag("--diagnostics", so.diagnostics, "Check the observed quantile against its bound each step");
  solve->add_option("--window", so.window, "Horizon estimate window")->capture_default_str();
  solve->add_option("--out", so.out, "Trace CSV path")->required();

  BoundsOptions bo;
  auto* bnd = app.add_subcommand("bounds", "Evaluate the convergence constants for a problem bundle");
  bnd->add_option("--problem", bo.problem, "Problem bundle directory")->required();
  bnd->add_option("--beta", bo.beta, "Assumed corrupted fraction (default: inferred from the bundle)");
  bnd->add_option("--q", bo.q, "Upper quantile level")->capture_default_str();
  bnd->add_option("--q0", bo.q0, "Lower quantile level; enables the band-method bounds");
  bnd->add_option("--sigma-mode", bo.sigma_mode, "exact or sampled:N")->capture_default_str();
  bnd->add_option("--sigma-seed", bo.sigma_seed, "Seed for sampled mode")->capture_default_str();
  bnd->add_option("--cap", bo.cap, "Largest subset count exact mode may enumerate")->capture_default_str();
  bnd->add_option("--start", bo.start, "Band-method start: project_first or zero")->capture_default_str();
  bnd->add_option("--out", bo.out, "Report JSON path")->required();

  ExperimentOptions eo;
  auto* exp = app.add_subcommand("experiment", "Reproduce fig1, fig2 or fig3");
  exp->add_option("figure", eo.figure, "fig1, fig2 or fig3")->required();
  auto* desk_flag = exp->add_flag("--desk", eo.desk, "Desk profile: m=1000, n=200, 2e4 iterations (default)");
  exp->add_flag("--paper", eo.paper, "Paper profile: m=5000, n=2500, 5e4 iterations")->excludes(desk_flag);
  exp->add_option("--m", eo.m, "Rows");
  exp->add_option("--n", eo.n, "Columns");
  exp->add_option("--beta", eo.beta, "Corrupted fraction");
  exp->add_option("--q", eo.q, "Upper quantile level");
  exp->add_option("--q0", eo.q0, "Lower quantile level");
  exp->add_option("--iters", eo.iterations, "Iterations per run");
  exp->add_option("--trials", eo.trials, "Trials per group");
  exp->add_option("--scales", eo.scales, "fig3 corruption scales")->delimiter(',');
  exp->add_option("--scale", eo.scale, "fig2 corruption scale");
  exp->add_option("--noise", eo.noise, "Noise standard deviation");
  exp->add_option("--seed", eo.seed, "Seed");
  exp->add_option("--methods", eo.methods, "Comma-separated methods")->delimiter(',');
  exp->add_option("--ensembles", eo.ensembles, "Comma-separated ensembles")->delimiter(',');
  exp->add_option("--window", eo.window, "Horizon window");
  exp->add_option("--resync", eo.resync, "Full residual recompute interval");
  exp->add_flag("--full-residuals", eo.full_residuals, "Recompute residuals in full every step");
  exp->add_option("--out", eo.out, "Output directory")->required();

  VerifyOptions vo;
  auto* ver = app.add_subcommand("verify", "Check a problem bundle or every manifest in a directory");
  ver->add_option("--problem", vo.problem, "Problem bundle directory");
  ver->add_option("--dir", vo.dir, "Directory of outputs with manifests");

  const std::map<std::string, CLI::App*> subs{
      {"gen", gen}, {"solve", solve}, {"bounds", bnd}, {"experiment", exp}, {"verify", ver}};

  try {
    std::string config_path;
    auto args = apply_config(app, subs, raw_args, config_path);
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
    ctx.config = config_path;
    if (gen->parsed()) return cmd_gen(ctx, go);
    if (solve->parsed()) return cmd_solve(ctx, so);
    if (bnd->parsed()) return cmd_bounds(ctx, bo);
    if (exp->parsed()) return cmd_experiment(ctx, eo);
    if (ver->parsed()) return cmd_verify(ctx, vo);
    return kExitValidation;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "usage error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_validation() ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, out, err);
}

}  // namespace kqrk::cli
