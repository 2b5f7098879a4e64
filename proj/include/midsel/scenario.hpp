#pragma once
// Scenario configuration: JSON text -> validated ScenarioConfig, plus the
// built-in scenario library.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "midsel/error.hpp"
#include "midsel/hierarchy.hpp"
#include "midsel/moment_track.hpp"
#include "midsel/profiles.hpp"
#include "midsel/selection.hpp"
#include "midsel/solver_fourier.hpp"
#include "midsel/solver_grid.hpp"
#include "midsel/solver_particle.hpp"

namespace midsel {

using json = nlohmann::json;

struct GridRun {
  GridSpec spec;
  GridSolverConfig solver;
};

struct ParticleRun {
  ParticleSolverConfig solver;
  std::vector<std::uint64_t> seeds;
};

struct FourierRun {
  std::string initial = "uniform";  // uniform | gaussian | gamma_inf | profile
  LatticeConfig lattice;
  double t_end = 100.0;
  int record_every = 1;
  double s = 2.5;
};

struct HierarchyRun {
  double dt = 1e-3;
  double t_end = 10.0;
  int K = 8;
  Closure closure = Closure::gaussian;
  int record_every = 100;
};

/// Envelope request. Quantities known only after the run (M0, d0) are
/// filled in by the runner; everything here is a calibration input.
struct EnvelopeConfig {
  std::string kind;            // dirac_stability | improved_rate | m2_lower | ds_bound
  std::string moment = "M2";   // tracked column for moment envelopes
  double delta = 0.0;
  double lambda = 0.0;
  double C = 1.0;
  int k = 1;
  int k0 = 2;
  double s = 2.5;
  double L = 0.0;
  std::optional<double> c;
  double slack = 1.0;  // pass if value <= slack * bound (>= bound / slack for lower bounds)
  double t_min = 0.0;
  double t_max = std::numeric_limits<double>::infinity();
};

struct ScenarioConfig {
  std::string name;
  SelectionRate selection = SelectionRate::constant(0.0);
  InitialProfile initial;
  std::optional<GridRun> grid;
  std::optional<ParticleRun> particle;
  std::optional<FourierRun> fourier;
  std::optional<HierarchyRun> hierarchy;
  std::vector<EnvelopeConfig> envelopes;
  std::vector<json> checks;
  json source;              // the parsed document, for hashing
  std::string origin;       // file path or builtin:<name>
};

namespace detail {

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size() && i < byte; ++i)
    if (text[i] == '\n') ++line;
  return line;
}

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }
  bool has(const char* key) const { return j_.contains(key); }
  std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  T req(const char* key) const {
    if (!j_.contains(key)) throw ConfigError("missing required field '" + where(key) + "'");
    return get<T>(key);
  }
  template <class T>
  T opt(const char* key, T fallback) const {
    return j_.contains(key) ? get<T>(key) : fallback;
  }
  double positive(const char* key) const {
    const double v = req<double>(key);
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("'" + where(key) + "' must be positive, got " + format_number(v));
    return v;
  }
  double positive_or(const char* key, double fallback) const { return has(key) ? positive(key) : fallback; }
  Reader sub(const char* key) const {
    if (!j_.contains(key)) throw ConfigError("missing required section '" + where(key) + "'");
    return Reader(j_.at(key), where(key));
  }
  const json& raw() const { return j_; }

 private:
  template <class T>
  T get(const char* key) const {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("field '" + where(key) + "' has the wrong type");
    }
  }
  const json& j_;
  std::string path_;
};

inline SelectionRate parse_selection(const Reader& r) {
  const auto kind = r.req<std::string>("kind");
  if (kind == "constant") return SelectionRate::constant(r.req<double>("a"));
  if (kind == "affine") return SelectionRate::affine(r.req<double>("a"), r.req<double>("b"), r.req<double>("lower_bound"));
  if (kind == "quadratic") {
    const double c = r.req<double>("c");
    if (!(c >= 0.0)) throw ConfigError("'" + r.where("c") + "' must be >= 0 for a quadratic rate");
    return SelectionRate::quadratic(r.opt<double>("a", 0.0), r.opt<double>("b", 0.0), c);
  }
  if (kind == "lipschitz_table")
    return SelectionRate::lipschitz_table(r.req<std::vector<double>>("x"), r.req<std::vector<double>>("m"));
  throw ConfigError("unknown selection kind '" + kind + "' (custom rates are only available from code)");
}

inline TableProfile read_table_file(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw ConfigError("cannot open profile table " + p.string());
  TableProfile t;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double x, v;
    if (!(ss >> x >> v)) continue;  // header
    t.x.push_back(x);
    t.f.push_back(v);
  }
  return t;
}

inline InitialProfile parse_initial(const Reader& r, const std::filesystem::path& base) {
  InitialProfile p;
  p.mass = r.positive_or("mass", 1.0);
  const auto kind = r.req<std::string>("kind");
  if (kind == "gaussian") {
    p.shape = GaussianProfile{r.req<double>("mean"), r.positive("var")};
  } else if (kind == "uniform") {
    UniformProfile u{r.req<double>("a"), r.req<double>("b")};
    if (!(u.b > u.a)) throw ConfigError("'" + r.where("b") + "' must exceed a");
    p.shape = u;
  } else if (kind == "two_atoms") {
    p.shape = TwoAtomProfile{r.req<double>("x1"), r.req<double>("x2"), r.opt<double>("w1", 0.5)};
  } else if (kind == "table") {
    TableProfile t;
    if (r.has("file")) {
      t = read_table_file(base / r.req<std::string>("file"));
    } else {
      t.x = r.req<std::vector<double>>("x");
      t.f = r.req<std::vector<double>>("f");
    }
    if (t.x.size() < 2 || t.x.size() != t.f.size()) throw ConfigError("profile table needs >= 2 rows of (x, f)");
    for (std::size_t i = 1; i < t.x.size(); ++i)
      if (!(t.x[i] > t.x[i - 1])) throw ConfigError("profile table x must be increasing");
    p.shape = std::move(t);
  } else {
    throw ConfigError("unknown initial profile kind '" + kind + "'");
  }
  return p;
}

inline ConvMethod parse_conv(const std::string& s) {
  if (s == "auto") return ConvMethod::automatic;
  if (s == "direct") return ConvMethod::direct;
  if (s == "fft") return ConvMethod::fft;
  throw ConfigError("unknown convolution method '" + s + "'");
}

inline int positive_int(const Reader& r, const char* key, int fallback) {
  const int v = r.opt<int>(key, fallback);
  if (v < 1) throw ConfigError("'" + r.where(key) + "' must be >= 1");
  return v;
}

}  // namespace detail

/// eta at the initial mean; the quantity the concentration hypotheses test.
inline double initial_eta(const ScenarioConfig& c) {
  return eta(c.selection, profile_mean_var(c.initial.shape).first);
}

/// Load-time hypothesis checks for the envelopes a scenario requests.
inline void validate_hypotheses(const ScenarioConfig& c) {
  for (const auto& e : c.envelopes) {
    if (e.kind == "ds_bound") continue;
    const double xbar0 = profile_mean_var(c.initial.shape).first;
    const double h = eta(c.selection, xbar0);
    if (!(e.delta > 0.0))
      throw HypothesisViolation(e.kind + " envelope needs delta > 0, got " + format_number(e.delta));
    if (!(h > e.delta))
      throw HypothesisViolation("dirac stability hypothesis eta(xbar0) > delta violated for the " + e.kind +
                                " envelope: eta(" + format_number(xbar0) + ") = " + format_number(h) +
                                ", delta = " + format_number(e.delta));
    if (e.kind == "m2_lower" && !(std::ldexp(1.0, 1 - 2 * e.k0) < e.delta))
      throw HypothesisViolation("M2 lower bound needs 2^(1-2 k0) < delta: k0 = " + std::to_string(e.k0) +
                                ", delta = " + format_number(e.delta));
    if (e.kind == "improved_rate") {
      const double cap = std::min(1.0 - std::ldexp(1.0, 1 - 2 * e.k), 0.5 - std::ldexp(1.0, 1 - 2 * e.k0) + e.delta);
      if (!(e.lambda > 0.0 && e.lambda < cap))
        throw HypothesisViolation("improved rate needs 0 < lambda < " + format_number(cap) + ", got " +
                                  format_number(e.lambda));
    }
  }
}

inline ScenarioConfig load_scenario(const json& doc, const std::filesystem::path& base = ".") {
  using detail::Reader;
  Reader r(doc, "");
  ScenarioConfig c;
  c.source = doc;
  c.name = r.req<std::string>("name");
  c.selection = detail::parse_selection(r.sub("selection"));
  c.initial = detail::parse_initial(r.sub("initial"), base);

  if (!r.has("solvers")) throw ConfigError("missing required section 'solvers'");
  Reader s = r.sub("solvers");
  if (s.has("grid")) {
    Reader g = s.sub("grid");
    GridRun run;
    run.spec.n = static_cast<std::size_t>(detail::positive_int(g, "n", 4096));
    run.spec.sigmas = g.positive_or("sigmas", 12.0);
    if (g.has("x_min") || g.has("x_max")) {
      run.spec.x_min = g.req<double>("x_min");
      run.spec.x_max = g.req<double>("x_max");
      if (!(run.spec.x_max > run.spec.x_min)) throw ConfigError("'solvers.grid.x_max' must exceed x_min");
    }
    run.solver.dt = g.positive("dt");
    run.solver.t_end = g.req<double>("t_end");
    if (!(run.solver.t_end >= 0.0)) throw ConfigError("'solvers.grid.t_end' must be >= 0");
    run.solver.record_every = detail::positive_int(g, "record_every", 10);
    run.solver.moment_order = detail::positive_int(g, "moment_order", 8);
    run.solver.conv = detail::parse_conv(g.opt<std::string>("conv", "auto"));
    c.grid = run;
  }
  if (s.has("particle")) {
    Reader p = s.sub("particle");
    ParticleRun run;
    run.solver.dt = p.positive("dt");
    run.solver.t_end = p.req<double>("t_end");
    run.solver.n_target = static_cast<std::size_t>(p.positive("n_target"));
    run.solver.record_every = detail::positive_int(p, "record_every", 10);
    run.solver.moment_order = detail::positive_int(p, "moment_order", 8);
    if (run.solver.dt > 0.2) throw ConfigError("'solvers.particle.dt' must be <= 0.2");
    run.seeds = p.opt<std::vector<std::uint64_t>>("seeds", {1});
    if (run.seeds.empty()) throw ConfigError("'solvers.particle.seeds' must list at least one seed");
    c.particle = run;
  }
  if (s.has("fourier")) {
    Reader f = s.sub("fourier");
    FourierRun run;
    run.initial = f.opt<std::string>("initial", "uniform");
    if (run.initial != "uniform" && run.initial != "gaussian" && run.initial != "gamma_inf" && run.initial != "profile")
      throw ConfigError("unknown 'solvers.fourier.initial' value '" + run.initial + "'");
    run.lattice.xi_min = f.positive_or("xi_min", run.lattice.xi_min);
    run.lattice.xi_max = f.positive_or("xi_max", run.lattice.xi_max);
    run.lattice.per_octave = detail::positive_int(f, "per_octave", run.lattice.per_octave);
    run.lattice.substeps = detail::positive_int(f, "substeps", run.lattice.substeps);
    run.t_end = f.req<double>("t_end");
    run.record_every = detail::positive_int(f, "record_every", 1);
    run.s = f.opt<double>("s", 2.5);
    if (!(run.s > 2.0 && run.s <= 3.0)) throw ConfigError("'solvers.fourier.s' must lie in (2, 3]");
    c.fourier = run;
  }
  if (s.has("hierarchy")) {
    Reader h = s.sub("hierarchy");
    HierarchyRun run;
    run.dt = h.positive("dt");
    run.t_end = h.req<double>("t_end");
    run.K = h.opt<int>("K", 8);
    if (run.K < 4 || run.K % 2) throw ConfigError("'solvers.hierarchy.K' must be even and >= 4");
    const auto cl = h.opt<std::string>("closure", "gaussian");
    if (cl == "gaussian") run.closure = Closure::gaussian;
    else if (cl == "zero") run.closure = Closure::zero;
    else throw ConfigError("unknown closure '" + cl + "'");
    run.record_every = detail::positive_int(h, "record_every", 100);
    if (!c.selection.is_polynomial()) throw ConfigError("the moment hierarchy needs a polynomial selection rate");
    c.hierarchy = run;
  }
  if (!c.grid && !c.particle && !c.fourier && !c.hierarchy) throw ConfigError("'solvers' requests no solver");

  if (r.has("envelopes")) {
    const auto& arr = doc.at("envelopes");
    if (!arr.is_array()) throw ConfigError("'envelopes' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Reader e(arr[i], "envelopes[" + std::to_string(i) + "]");
      EnvelopeConfig ec;
      ec.kind = e.req<std::string>("kind");
      ec.moment = e.opt<std::string>("moment", "M2");
      ec.delta = e.opt<double>("delta", 0.0);
      ec.lambda = e.opt<double>("lambda", 0.0);
      ec.C = e.opt<double>("C", 1.0);
      ec.k = e.opt<int>("k", 1);
      ec.k0 = e.opt<int>("k0", 2);
      ec.s = e.opt<double>("s", 2.5);
      ec.L = e.opt<double>("L", 0.0);
      if (e.has("c")) ec.c = e.req<double>("c");
      ec.slack = e.opt<double>("slack", 1.0);
      ec.t_min = e.opt<double>("t_min", 0.0);
      ec.t_max = e.opt<double>("t_max", std::numeric_limits<double>::infinity());
      if (ec.kind != "dirac_stability" && ec.kind != "improved_rate" && ec.kind != "m2_lower" && ec.kind != "ds_bound")
        throw ConfigError("unknown envelope kind '" + ec.kind + "'");
      if (ec.kind == "ds_bound" ? !c.fourier : !c.grid)
        throw ConfigError("envelope '" + ec.kind + "' needs the " + (ec.kind == "ds_bound" ? "fourier" : "grid") + " solver");
      c.envelopes.push_back(ec);
    }
  }
  if (r.has("checks")) {
    const auto& arr = doc.at("checks");
    if (!arr.is_array()) throw ConfigError("'checks' must be an array");
    for (const auto& ch : arr) {
      if (!ch.is_object() || !ch.contains("kind")) throw ConfigError("every check needs a 'kind'");
      c.checks.push_back(ch);
    }
  }
  validate_hypotheses(c);
  return c;
}

/// Parses JSON text; syntax errors report the line.
inline ScenarioConfig load_scenario_text(const std::string& text, const std::filesystem::path& base = ".") {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error at line " + std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
  }
  return load_scenario(doc, base);
}

inline ScenarioConfig load_scenario_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  auto c = load_scenario_text(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
  c.origin = path.string();
  return c;
}

// ---------------------------------------------------------------------------
// Built-in scenarios.

inline const std::map<std::string, std::string>& builtin_scenario_texts() {
  static const std::map<std::string, std::string> lib = {
      {"constant-m-baseline", R"({
  "name": "constant-m-baseline",
  "selection": {"kind": "constant", "a": 0},
  "initial": {"kind": "gaussian", "mean": 0, "var": 1},
  "solvers": {
    "grid": {"n": 4096, "sigmas": 12, "dt": 0.01, "t_end": 20, "record_every": 10},
    "hierarchy": {"dt": 0.001, "t_end": 20, "K": 8, "closure": "gaussian", "record_every": 100}
  },
  "checks": [
    {"kind": "fit_rate", "solver": "grid", "column": "M2", "window": [5, 20], "target": 0.5, "tol": 0.02},
    {"kind": "fit_rate", "solver": "grid", "column": "rho", "window": [5, 20], "target": -1.0, "tol": 0.01}
  ]
})"},
      {"fourier-uniform-relaxation", R"({
  "name": "fourier-uniform-relaxation",
  "selection": {"kind": "constant", "a": 0},
  "initial": {"kind": "uniform", "a": -1.7320508075688772, "b": 1.7320508075688772},
  "solvers": {
    "fourier": {"initial": "uniform", "xi_min": 1e-10, "xi_max": 64, "per_octave": 64, "substeps": 2,
                "t_end": 100, "record_every": 1, "s": 2.5}
  },
  "envelopes": [
    {"kind": "ds_bound", "s": 2.5, "L": 0, "slack": 1.1}
  ],
  "checks": [
    {"kind": "fit_rate", "solver": "fourier", "column": "d_s", "window": [20, 100], "min_lambda_factor": 0.9}
  ]
})"},
      {"dirac-stability", R"({
  "name": "dirac-stability",
  "selection": {"kind": "quadratic", "a": 0, "b": 0, "c": 1},
  "initial": {"kind": "gaussian", "mean": 0.5, "var": 0.001},
  "solvers": {
    "grid": {"n": 65536, "sigmas": 8, "dt": 0.01, "t_end": 40, "record_every": 10, "moment_order": 8}
  },
  "envelopes": [
    {"kind": "dirac_stability", "moment": "M2", "delta": 0.2},
    {"kind": "dirac_stability", "moment": "M4", "delta": 0.2}
  ],
  "checks": [
    {"kind": "mean_convergence", "t_a": 20, "t_b": 40, "tol": 1e-4},
    {"kind": "r_bound", "xi": [0.1, 0.5, 1.0]}
  ]
})"},
      {"improved-rates", R"({
  "name": "improved-rates",
  "selection": {"kind": "quadratic", "a": 0, "b": 0, "c": 1},
  "initial": {"kind": "gaussian", "mean": 0.5, "var": 0.001},
  "solvers": {
    "grid": {"n": 65536, "sigmas": 8, "dt": 0.01, "t_end": 40, "record_every": 10, "moment_order": 8}
  },
  "envelopes": [
    {"kind": "m2_lower", "C": 0.5, "k0": 3, "delta": 0.2, "t_max": 30}
  ],
  "checks": [
    {"kind": "initial_ratio", "num": "M6", "den": "M2", "max": 0.01},
    {"kind": "fit_rate", "solver": "grid", "column": "M2", "window": [10, 30], "target": 0.5, "tol": 0.05},
    {"kind": "ratio_decreasing", "num": "M4", "den": "M2", "t_from": 1}
  ]
})"},
      {"particle-cross-validation", R"({
  "name": "particle-cross-validation",
  "selection": {"kind": "quadratic", "a": 0, "b": 0, "c": 1},
  "initial": {"kind": "gaussian", "mean": 0.5, "var": 0.001},
  "solvers": {
    "grid": {"n": 65536, "sigmas": 8, "dt": 0.01, "t_end": 10, "record_every": 10, "moment_order": 8},
    "particle": {"n_target": 100000, "dt": 0.01, "t_end": 10, "record_every": 10, "moment_order": 4,
                 "seeds": [1001, 1002, 1003, 1004, 1005, 1006, 1007, 1008, 1009, 1010]}
  },
  "checks": [
    {"kind": "cross_solver", "times": [1, 5, 10], "columns": ["rho", "xbar", "M2"], "sigmas": 3}
  ]
})"},
  };
  return lib;
}

inline std::vector<std::string> builtin_scenario_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : builtin_scenario_texts()) out.push_back(k);
  return out;
}

inline ScenarioConfig builtin_scenario(const std::string& name) {
  const auto& lib = builtin_scenario_texts();
  auto it = lib.find(name);
  if (it == lib.end()) throw ConfigError("no built-in scenario named '" + name + "'");
  auto c = load_scenario_text(it->second);
  c.origin = "builtin:" + name;
  return c;
}

}  // namespace midsel
