#include "kqrk/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "kqrk/error.hpp"
#include "kqrk/io.hpp"
#include "kqrk/rng.hpp"

namespace kqrk::experiments {

using solvers::Method;

const char* to_string(Figure f) {
  switch (f) {
    case Figure::fig1: return "fig1";
    case Figure::fig2: return "fig2";
    case Figure::fig3: return "fig3";
  }
  return "?";
}

Figure parse_figure(std::string_view text) {
  if (text == "fig1") return Figure::fig1;
  if (text == "fig2") return Figure::fig2;
  if (text == "fig3") return Figure::fig3;
  throw Error(ErrorKind::InvalidSpec, "unknown figure '" + std::string(text) + "' (expected fig1, fig2 or fig3)");
}

const char* to_string(Profile p) {
  switch (p) {
    case Profile::desk: return "desk";
    case Profile::paper: return "paper";
    case Profile::custom: return "custom";
  }
  return "?";
}

namespace {

Profile parse_profile(std::string_view text) {
  if (text == "desk") return Profile::desk;
  if (text == "paper") return Profile::paper;
  if (text == "custom") return Profile::custom;
  throw Error(ErrorKind::InvalidSpec, "unknown profile '" + std::string(text) + "'");
}

void apply_figure_defaults(ExperimentSpec& s) {
  switch (s.figure) {
    case Figure::fig1:
      s.scale = 0.0;
      break;
    case Figure::fig2:
      s.scale = 100.0;
      break;
    case Figure::fig3:
      s.methods = {Method::rk, Method::dqrk};
      s.trials = 15;
      s.scales = {1, 3, 10, 30, 100};
      s.ensembles = {sysgen::Ensemble::gaussian};
      break;
  }
}

}  // namespace

ExperimentSpec ExperimentSpec::desk(Figure f) {
  ExperimentSpec s;
  s.figure = f;
  s.profile = Profile::desk;
  apply_figure_defaults(s);
  return s;
}

ExperimentSpec ExperimentSpec::paper(Figure f) {
  ExperimentSpec s = desk(f);
  s.profile = Profile::paper;
  s.m = 5000;
  s.n = 2500;
  s.iterations = 50000;
  return s;
}

void ExperimentSpec::validate() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidSpec, what); };
  if (methods.empty()) fail("method list is empty");
  if (std::set<Method>(methods.begin(), methods.end()).size() != methods.size()) fail("duplicate method");
  if (ensembles.empty()) fail("ensemble list is empty");
  if (trials == 0) fail("trials must be at least 1");
  if (horizon_window == 0) fail("horizon window must be positive");
  if (iterations < horizon_window) fail("iterations must be at least the horizon window");
  if (!(noise_stddev >= 0.0) || !std::isfinite(noise_stddev)) fail("noise stddev must be finite and nonnegative");
  if (figure == Figure::fig3) {
    if (scales.empty()) fail("fig3 needs a nonempty scale grid");
    for (double s : scales) {
      if (!(s >= 0.0) || !std::isfinite(s)) fail("scales must be finite and nonnegative");
    }
  } else if (!(scale >= 0.0) || !std::isfinite(scale)) {
    fail("corruption scale must be finite and nonnegative");
  }
  if (incremental && resync_interval == 0) fail("resync interval must be positive");
  gen_spec(ensembles.front(), 0.0, 0).validate();
  for (Method m : methods) {
    auto cfg = solvers::default_config(m);
    cfg.q = q;
    cfg.q0 = q0;
    cfg.iterations = iterations;
    cfg.validate(this->m, n);
  }
}

sysgen::GenSpec ExperimentSpec::gen_spec(sysgen::Ensemble e, double corruption_scale, std::uint64_t problem_seed) const {
  sysgen::GenSpec g;
  g.m = m;
  g.n = n;
  g.ensemble = e;
  g.beta = beta;
  g.corruption_scale = corruption_scale;
  g.noise_stddev = noise_stddev;
  g.seed = problem_seed;
  return g;
}

nlohmann::json to_json(const ExperimentSpec& s) {
  nlohmann::json ens = nlohmann::json::array(), meth = nlohmann::json::array();
  for (auto e : s.ensembles) ens.push_back(sysgen::to_string(e));
  for (auto m : s.methods) meth.push_back(solvers::to_string(m));
  return {{"figure", to_string(s.figure)},
          {"profile", to_string(s.profile)},
          {"m", s.m},
          {"n", s.n},
          {"beta", s.beta.str()},
          {"q0", s.q0.str()},
          {"q", s.q.str()},
          {"noise_stddev", s.noise_stddev},
          {"scale", s.scale},
          {"ensembles", ens},
          {"methods", meth},
          {"iterations", s.iterations},
          {"trials", s.trials},
          {"scales", s.scales},
          {"horizon_window", s.horizon_window},
          {"seed", s.seed},
          {"incremental", s.incremental},
          {"resync_interval", s.resync_interval}};
}

ExperimentSpec spec_from_json(const nlohmann::json& j) {
  try {
    ExperimentSpec s;
    s.figure = parse_figure(j.at("figure").get<std::string>());
    s.profile = parse_profile(j.at("profile").get<std::string>());
    s.m = j.at("m").get<std::size_t>();
    s.n = j.at("n").get<std::size_t>();
    s.beta = Rational::parse(j.at("beta").get<std::string>());
    s.q0 = Rational::parse(j.at("q0").get<std::string>());
    s.q = Rational::parse(j.at("q").get<std::string>());
    s.noise_stddev = j.at("noise_stddev").get<double>();
    s.scale = j.at("scale").get<double>();
    s.ensembles.clear();
    for (const auto& e : j.at("ensembles")) s.ensembles.push_back(sysgen::parse_ensemble(e.get<std::string>()));
    s.methods.clear();
    for (const auto& m : j.at("methods")) s.methods.push_back(solvers::parse_method(m.get<std::string>()));
    s.iterations = j.at("iterations").get<std::size_t>();
    s.trials = j.at("trials").get<std::size_t>();
    s.scales = j.at("scales").get<std::vector<double>>();
    s.horizon_window = j.at("horizon_window").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.incremental = j.at("incremental").get<bool>();
    s.resync_interval = j.at("resync_interval").get<std::size_t>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("experiment spec: ") + e.what());
  }
}

std::uint64_t problem_seed(std::uint64_t seed, std::size_t group, std::size_t trial) {
  return Rng(seed).split("problem").split(group).split(trial)();
}

std::uint64_t solver_seed(std::uint64_t seed, std::size_t group, std::size_t trial) {
  return Rng(seed).split("solver").split(group).split(trial)();
}

double corruption_ratio(std::span<const double> epsilon, const Rational& q) {
  const std::size_t m = epsilon.size();
  const std::size_t j = m - q.count_of(m) + 1;
  if (j > m) throw Error(ErrorKind::InvalidArgument, "q = 0 leaves no order statistic");
  return sysgen::ordered_magnitude(epsilon, 1) / sysgen::ordered_magnitude(epsilon, j);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::InvalidArgument, "spearman needs two equal samples of size ≥ 2");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double mean = 0.5 * static_cast<double>(x.size() + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  return sxy / std::sqrt(sxx * syy);
}

namespace {

// Each job writes only its own output slot, so results do not depend on the
// thread count or on scheduling order.
void parallel_for(std::size_t jobs, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, jobs);
  if (threads <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = jobs;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

struct TrialOutput {
  std::vector<std::vector<double>> curves;  // per method
  std::vector<double> horizons;
  double ratio = 0.0;
};

TrialOutput run_trial(const ExperimentSpec& spec, sysgen::Ensemble e, double scale, std::size_t group,
                      std::size_t trial, bool keep_curves) {
  const auto problem = sysgen::generate(spec.gen_spec(e, scale, problem_seed(spec.seed, group, trial)));
  std::vector<double> gram;
  const bool needs_gram = spec.incremental && std::any_of(spec.methods.begin(), spec.methods.end(),
                                                          [](Method m) { return m != Method::rk; });
  if (needs_gram) gram = problem.a.gram_rows();

  TrialOutput out;
  out.ratio = spec.figure == Figure::fig3 ? corruption_ratio(problem.epsilon(), spec.q) : 0.0;
  for (Method m : spec.methods) {
    auto cfg = solvers::default_config(m);
    cfg.q = spec.q;
    cfg.q0 = spec.q0;
    cfg.iterations = spec.iterations;
    cfg.seed = solver_seed(spec.seed, group, trial);
    if (spec.incremental) {
      cfg.residuals = solvers::ResidualMode::incremental;
      cfg.resync_interval = spec.resync_interval;
    }
    auto trace = solvers::run(problem, cfg, needs_gram ? &gram : nullptr);
    out.horizons.push_back(solvers::horizon_estimate(trace, spec.horizon_window).value);
    if (keep_curves) out.curves.push_back(std::move(trace.sq_errors));
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ExperimentResult run_curves(const ExperimentSpec& spec, std::size_t threads) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t groups = spec.ensembles.size(), trials = spec.trials;
  const double scale = spec.figure == Figure::fig1 ? 0.0 : spec.scale;
  std::vector<TrialOutput> slots(groups * trials);
  parallel_for(slots.size(), threads, [&](std::size_t job) {
    const std::size_t g = job / trials, t = job % trials;
    slots[job] = run_trial(spec, spec.ensembles[g], scale, g, t, true);
  });

  ExperimentResult r;
  r.spec = spec;
  for (std::size_t g = 0; g < groups; ++g) {
    CurveSet cs;
    cs.ensemble = spec.ensembles[g];
    cs.curves = slots[g * trials].curves;
    for (std::size_t t = 0; t < trials; ++t) cs.horizons.push_back(slots[g * trials + t].horizons);
    if (trials > 1) {
      cs.band_min = cs.curves;
      cs.band_max = cs.curves;
      for (std::size_t t = 1; t < trials; ++t) {
        const auto& c = slots[g * trials + t].curves;
        for (std::size_t mi = 0; mi < c.size(); ++mi) {
          for (std::size_t k = 0; k < c[mi].size(); ++k) {
            cs.band_min[mi][k] = std::min(cs.band_min[mi][k], c[mi][k]);
            cs.band_max[mi][k] = std::max(cs.band_max[mi][k], c[mi][k]);
          }
        }
      }
    }
    r.curve_sets.push_back(std::move(cs));
  }
  r.wall_seconds = seconds_since(start);
  return r;
}

}  // namespace

ExperimentResult run_fig1(const ExperimentSpec& spec, std::size_t threads) {
  if (spec.figure != Figure::fig1) throw Error(ErrorKind::InvalidSpec, "spec is not for fig1");
  return run_curves(spec, threads);
}

ExperimentResult run_fig2(const ExperimentSpec& spec, std::size_t threads) {
  if (spec.figure != Figure::fig2) throw Error(ErrorKind::InvalidSpec, "spec is not for fig2");
  return run_curves(spec, threads);
}

ExperimentResult run_fig3(const ExperimentSpec& spec, std::size_t threads) {
  if (spec.figure != Figure::fig3) throw Error(ErrorKind::InvalidSpec, "spec is not for fig3");
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t trials = spec.trials;
  std::vector<TrialOutput> slots(spec.scales.size() * trials);
  parallel_for(slots.size(), threads, [&](std::size_t job) {
    const std::size_t si = job / trials, t = job % trials;
    slots[job] = run_trial(spec, spec.ensembles.front(), spec.scales[si], si, t, false);
  });

  ExperimentResult r;
  r.spec = spec;
  for (std::size_t si = 0; si < spec.scales.size(); ++si) {
    for (std::size_t t = 0; t < trials; ++t) {
      const auto& slot = slots[si * trials + t];
      for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
        r.points.push_back({spec.scales[si], t, spec.methods[mi], slot.ratio, slot.horizons[mi]});
      }
    }
  }
  r.wall_seconds = seconds_since(start);
  return r;
}

ExperimentResult run(const ExperimentSpec& spec, std::size_t threads) {
  switch (spec.figure) {
    case Figure::fig1: return run_fig1(spec, threads);
    case Figure::fig2: return run_fig2(spec, threads);
    case Figure::fig3: return run_fig3(spec, threads);
  }
  throw Error(ErrorKind::InvalidSpec, "unknown figure");
}

// ---- serialization ----

inline constexpr int kResultSchemaVersion = 1;

nlohmann::json to_json(const ExperimentResult& r) {
  using nlohmann::json;
  json sets = json::array();
  for (const auto& cs : r.curve_sets) {
    const auto by_method = [&](const std::vector<std::vector<double>>& v) {
      json o = json::object();
      for (std::size_t mi = 0; mi < v.size(); ++mi) o[solvers::to_string(r.spec.methods[mi])] = v[mi];
      return o;
    };
    json entry = {{"ensemble", sysgen::to_string(cs.ensemble)},
                  {"curves", by_method(cs.curves)},
                  {"horizons", cs.horizons}};
    if (!cs.band_min.empty()) {
      entry["band_min"] = by_method(cs.band_min);
      entry["band_max"] = by_method(cs.band_max);
    }
    sets.push_back(std::move(entry));
  }
  json points = json::array();
  for (const auto& p : r.points) {
    points.push_back({{"scale", p.scale},
                      {"trial", p.trial},
                      {"method", solvers::to_string(p.method)},
                      {"ratio", p.ratio},
                      {"horizon", p.horizon}});
  }
  return {{"schema_version", kResultSchemaVersion},
          {"spec", to_json(r.spec)},
          {"curve_sets", sets},
          {"points", points}};
}

ExperimentResult result_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kResultSchemaVersion) {
      throw Error(ErrorKind::FormatError, "unsupported result schema version");
    }
    ExperimentResult r;
    r.spec = spec_from_json(j.at("spec"));
    const auto by_method = [&](const nlohmann::json& o) {
      std::vector<std::vector<double>> v;
      for (Method m : r.spec.methods) v.push_back(o.at(solvers::to_string(m)).get<std::vector<double>>());
      return v;
    };
    for (const auto& e : j.at("curve_sets")) {
      CurveSet cs;
      cs.ensemble = sysgen::parse_ensemble(e.at("ensemble").get<std::string>());
      cs.curves = by_method(e.at("curves"));
      cs.horizons = e.at("horizons").get<std::vector<std::vector<double>>>();
      if (e.contains("band_min")) {
        cs.band_min = by_method(e.at("band_min"));
        cs.band_max = by_method(e.at("band_max"));
      }
      r.curve_sets.push_back(std::move(cs));
    }
    for (const auto& p : j.at("points")) {
      r.points.push_back({p.at("scale").get<double>(), p.at("trial").get<std::size_t>(),
                          solvers::parse_method(p.at("method").get<std::string>()), p.at("ratio").get<double>(),
                          p.at("horizon").get<double>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("experiment result: ") + e.what());
  }
}

// ---- CSV ----

namespace {

std::string method_header(const ExperimentSpec& s) {
  std::string h;
  for (Method m : s.methods) h += std::string(",") + solvers::to_string(m);
  return h;
}

std::string curve_rows(const std::vector<std::vector<double>>& curves, const std::string& prefix) {
  std::string out;
  const std::size_t len = curves.empty() ? 0 : curves.front().size();
  for (std::size_t k = 0; k < len; ++k) {
    out += prefix + std::to_string(k);
    for (const auto& c : curves) out += "," + io::format_double(c[k]);
    out += "\r\n";
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> render_csv(const ExperimentResult& r) {
  std::map<std::string, std::string> files;
  const auto& s = r.spec;
  if (s.figure == Figure::fig3) {
    std::string data = "scale,trial,method,ratio,horizon\r\n";
    for (const auto& p : r.points) {
      data += io::format_double(p.scale) + "," + std::to_string(p.trial) + "," + solvers::to_string(p.method) + "," +
              io::format_double(p.ratio) + "," + io::format_double(p.horizon) + "\r\n";
    }
    files["data.csv"] = std::move(data);
    return files;
  }
  std::string data = "ensemble,k" + method_header(s) + "\r\n";
  std::string horizons = "ensemble,trial" + method_header(s) + "\r\n";
  for (const auto& cs : r.curve_sets) {
    const std::string name = sysgen::to_string(cs.ensemble);
    data += curve_rows(cs.curves, io::csv_field(name) + ",");
    files["data_" + name + ".csv"] = "k" + method_header(s) + "\r\n" + curve_rows(cs.curves, "");
    for (std::size_t t = 0; t < cs.horizons.size(); ++t) {
      horizons += io::csv_field(name) + "," + std::to_string(t);
      for (double h : cs.horizons[t]) horizons += "," + io::format_double(h);
      horizons += "\r\n";
    }
    if (!cs.band_min.empty()) {
      std::string band = "k";
      for (Method m : s.methods) band += std::string(",") + solvers::to_string(m) + "_min," + solvers::to_string(m) + "_max";
      band += "\r\n";
      for (std::size_t k = 0; k < cs.band_min.front().size(); ++k) {
        band += std::to_string(k);
        for (std::size_t mi = 0; mi < cs.band_min.size(); ++mi) {
          band += "," + io::format_double(cs.band_min[mi][k]) + "," + io::format_double(cs.band_max[mi][k]);
        }
        band += "\r\n";
      }
      files["band_" + name + ".csv"] = std::move(band);
    }
  }
  files["data.csv"] = std::move(data);
  files["horizons.csv"] = std::move(horizons);
  return files;
}

// ---- SVG ----

namespace {

const char* method_color(Method m) {
  switch (m) {
    case Method::rk: return "#1f77b4";
    case Method::qrk: return "#d62728";
    case Method::dqrk: return "#2ca02c";
  }
  return "#000000";
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Axis {
  double lo = 0.0, hi = 1.0;  // in plot units (log₁₀ when log)
  bool log = true;
};

// Decade-aligned log axis over the positive finite values.
Axis log_axis(const std::vector<double>& values) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    if (v > 0.0 && std::isfinite(v)) {
      lo = std::min(lo, std::log10(v));
      hi = std::max(hi, std::log10(v));
    }
  }
  if (!std::isfinite(lo)) return {0.0, 1.0, true};
  Axis a{std::floor(lo), std::ceil(hi), true};
  if (a.hi <= a.lo) a.hi = a.lo + 1.0;
  return a;
}

class Panel {
 public:
  Panel(double x, double y, double w, double h, Axis ax, Axis ay) : x_(x), y_(y), w_(w), h_(h), ax_(ax), ay_(ay) {}

  double px(double v) const { return x_ + (map(ax_, v) - ax_.lo) / (ax_.hi - ax_.lo) * w_; }
  double py(double v) const { return y_ + h_ - (map(ay_, v) - ay_.lo) / (ay_.hi - ay_.lo) * h_; }
  bool visible(double xv, double yv) const { return usable(ax_, xv) && usable(ay_, yv); }

  std::string frame(const std::string& title, const std::string& xlabel, const std::string& ylabel) const {
    std::string out;
    out += grid(ax_, true) + grid(ay_, false);
    out += "<rect x=\"" + fmt(x_) + "\" y=\"" + fmt(y_) + "\" width=\"" + fmt(w_) + "\" height=\"" + fmt(h_) +
           "\" fill=\"none\" stroke=\"#000\"/>\n";
    out += "<text x=\"" + fmt(x_ + w_ / 2) + "\" y=\"" + fmt(y_ - 10) + "\" text-anchor=\"middle\" font-size=\"14\">" +
           title + "</text>\n";
    out += "<text x=\"" + fmt(x_ + w_ / 2) + "\" y=\"" + fmt(y_ + h_ + 38) + "\" text-anchor=\"middle\" font-size=\"12\">" +
           xlabel + "</text>\n";
    out += "<text transform=\"translate(" + fmt(x_ - 52) + "," + fmt(y_ + h_ / 2) +
           ") rotate(-90)\" text-anchor=\"middle\" font-size=\"12\">" + ylabel + "</text>\n";
    return out;
  }

 private:
  static double map(const Axis& a, double v) { return a.log ? std::log10(v) : v; }
  static bool usable(const Axis& a, double v) { return std::isfinite(v) && (!a.log || v > 0.0); }

  std::string grid(const Axis& a, bool horizontal_axis) const {
    std::string out;
    const auto line = [&](double pos, const char* color, double width) {
      if (horizontal_axis) {
        out += "<line x1=\"" + fmt(pos) + "\" y1=\"" + fmt(y_) + "\" x2=\"" + fmt(pos) + "\" y2=\"" + fmt(y_ + h_) +
               "\" stroke=\"" + color + "\" stroke-width=\"" + fmt(width) + "\"/>\n";
      } else {
        out += "<line x1=\"" + fmt(x_) + "\" y1=\"" + fmt(pos) + "\" x2=\"" + fmt(x_ + w_) + "\" y2=\"" + fmt(pos) +
               "\" stroke=\"" + color + "\" stroke-width=\"" + fmt(width) + "\"/>\n";
      }
    };
    const auto label = [&](double pos, const std::string& text) {
      if (horizontal_axis) {
        out += "<text x=\"" + fmt(pos) + "\" y=\"" + fmt(y_ + h_ + 16) + "\" text-anchor=\"middle\" font-size=\"10\">" +
               text + "</text>\n";
      } else {
        out += "<text x=\"" + fmt(x_ - 6) + "\" y=\"" + fmt(pos + 3) + "\" text-anchor=\"end\" font-size=\"10\">" + text +
               "</text>\n";
      }
    };
    const auto to_px = [&](double unit) {
      const double f = (unit - a.lo) / (a.hi - a.lo);
      return horizontal_axis ? x_ + f * w_ : y_ + h_ - f * h_;
    };
    if (a.log) {
      const int span = static_cast<int>(a.hi - a.lo);
      const int step = std::max(1, span / 10);
      for (double d = a.lo; d <= a.hi; d += 1.0) {
        if (d < a.hi) {
          for (int k = 2; k <= 9; ++k) line(to_px(d + std::log10(k)), "#eeeeee", 0.5);
        }
        line(to_px(d), "#cccccc", 0.8);
        if (static_cast<int>(d - a.lo) % step == 0) label(to_px(d), "1e" + std::to_string(static_cast<int>(d)));
      }
    } else {
      for (int i = 0; i <= 5; ++i) {
        const double v = a.lo + (a.hi - a.lo) * i / 5.0;
        line(to_px(v), "#cccccc", 0.8);
        label(to_px(v), std::to_string(static_cast<long long>(std::llround(v))));
      }
    }
    return out;
  }

  double x_, y_, w_, h_;
  Axis ax_, ay_;
};

std::string legend(const std::vector<Method>& methods, double x, double y) {
  std::string out;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const double yy = y + 16.0 * static_cast<double>(i);
    out += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(yy) + "\" x2=\"" + fmt(x + 18) + "\" y2=\"" + fmt(yy) +
           "\" stroke=\"" + method_color(methods[i]) + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + fmt(x + 24) + "\" y=\"" + fmt(yy + 4) + "\" font-size=\"11\">" +
           solvers::to_string(methods[i]) + "</text>\n";
  }
  return out;
}

constexpr std::size_t kMaxPolylinePoints = 2000;

std::string curve_panels(const ExperimentResult& r) {
  constexpr double pw = 420, ph = 300, ml = 75, mt = 40, gap = 110;
  const double width = ml + r.curve_sets.size() * (pw + gap);
  std::string body;
  for (std::size_t g = 0; g < r.curve_sets.size(); ++g) {
    const auto& cs = r.curve_sets[g];
    std::vector<double> all;
    for (const auto& c : cs.curves) all.insert(all.end(), c.begin(), c.end());
    const double kmax = cs.curves.empty() ? 1.0 : static_cast<double>(std::max<std::size_t>(cs.curves.front().size(), 2) - 1);
    const Panel panel(ml + g * (pw + gap), mt, pw, ph, Axis{0.0, kmax, false}, log_axis(all));
    body += panel.frame(std::string(to_string(r.spec.figure)) + " " + sysgen::to_string(cs.ensemble), "iteration k",
                        "squared error");
    for (std::size_t mi = 0; mi < cs.curves.size(); ++mi) {
      const auto& c = cs.curves[mi];
      const std::size_t stride = std::max<std::size_t>(1, (c.size() + kMaxPolylinePoints - 1) / kMaxPolylinePoints);
      std::string pts;
      for (std::size_t k = 0; k < c.size(); k += stride) {
        if (!panel.visible(static_cast<double>(k), c[k])) continue;
        pts += fmt(panel.px(static_cast<double>(k))) + "," + fmt(panel.py(c[k])) + " ";
      }
      body += "<polyline fill=\"none\" stroke=\"" + std::string(method_color(r.spec.methods[mi])) +
              "\" stroke-width=\"1.2\" points=\"" + pts + "\"/>\n";
    }
    body += legend(r.spec.methods, ml + g * (pw + gap) + pw - 70, mt + 16);
  }
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" + fmt(mt + ph + 60) +
         "\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n" + body + "</svg>\n";
}

std::string scatter_panel(const ExperimentResult& r) {
  constexpr double pw = 480, ph = 340, ml = 75, mt = 40;
  std::vector<double> xs, ys;
  for (const auto& p : r.points) {
    xs.push_back(p.ratio);
    ys.push_back(p.horizon);
  }
  const Panel panel(ml, mt, pw, ph, log_axis(xs), log_axis(ys));
  std::string body = panel.frame("fig3 horizon against corruption ratio", "largest / ((1-q)m+1)-th largest |corruption|",
                                 "empirical error horizon");
  for (const auto& p : r.points) {
    if (!panel.visible(p.ratio, p.horizon)) continue;
    body += "<circle cx=\"" + fmt(panel.px(p.ratio)) + "\" cy=\"" + fmt(panel.py(p.horizon)) + "\" r=\"3\" fill=\"" +
            method_color(p.method) + "\" fill-opacity=\"0.7\"/>\n";
  }
  body += legend(r.spec.methods, ml + pw - 70, mt + 16);
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(ml + pw + 30) + "\" height=\"" + fmt(mt + ph + 60) +
         "\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n" + body + "</svg>\n";
}

}  // namespace

std::string render_svg(const ExperimentResult& r) {
  return r.spec.figure == Figure::fig3 ? scatter_panel(r) : curve_panels(r);
}

std::vector<std::string> emit(const ExperimentResult& r, const std::filesystem::path& dir,
                              const nlohmann::json& manifest) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::string> written;
  for (const auto& [name, text] : render_csv(r)) {
    io::write_file(dir / name, text);
    written.push_back(name);
  }
  io::write_file(dir / "plot.svg", render_svg(r));
  written.push_back("plot.svg");
  auto j = to_json(r);
  if (!manifest.is_null()) j["manifest"] = manifest;
  io::write_file(dir / "result.json", j.dump(1) + "\n");
  written.push_back("result.json");
  return written;
}

}  // namespace kqrk::experiments
