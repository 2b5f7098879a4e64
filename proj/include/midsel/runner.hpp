#pragma once
// Executes a ScenarioConfig: runs the requested solvers, evaluates envelopes
// and checks, and writes CSV trajectories, summary.json and MANIFEST.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "midsel/ensemble.hpp"
#include "midsel/error.hpp"
#include "midsel/hierarchy.hpp"
#include "midsel/metrics.hpp"
#include "midsel/moment_track.hpp"
#include "midsel/profiles.hpp"
#include "midsel/scenario.hpp"
#include "midsel/solver_fourier.hpp"
#include "midsel/solver_grid.hpp"
#include "midsel/solver_particle.hpp"

namespace midsel {

struct RunOptions {
  std::optional<std::uint64_t> seed;  // replaces the particle seed list by seed, seed+1, ...
  unsigned threads = 1;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double target = 0.0;
  std::string detail;
};

struct ScenarioResult {
  std::string name;
  std::vector<MomentTrack> grid, fourier, hierarchy;
  std::vector<std::vector<MomentTrack>> particle;
  std::vector<std::uint64_t> seeds;
  std::vector<CheckResult> checks;
  std::optional<double> failure_time;
  std::string failure;
  double wall_seconds = 0.0;

  bool all_pass() const {
    if (failure_time || !failure.empty()) return false;
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  const CheckResult* find(const std::string& prefix) const {
    for (const auto& c : checks)
      if (c.name.rfind(prefix, 0) == 0) return &c;
    return nullptr;
  }
};

/// Value of a named column of a row: t, rho, xbar, M<k>, S<k> or an extra.
inline double column_value(const MomentTrack& r, const std::string& col) {
  if (col == "t") return r.t;
  if (col == "rho") return r.rho;
  if (col == "xbar") return r.xbar;
  if (col.size() > 1 && (col[0] == 'M' || col[0] == 'S') && std::isdigit(static_cast<unsigned char>(col[1]))) {
    const auto k = static_cast<std::size_t>(std::stoul(col.substr(1)));
    const auto& v = col[0] == 'M' ? r.M : r.S;
    if (k < v.size()) return v[k];
  }
  if (auto e = r.extra(col)) return *e;
  throw Error("missing column '" + col + "'");
}

inline const MomentTrack& row_at(const std::vector<MomentTrack>& rows, double t) {
  for (const auto& r : rows)
    if (std::abs(r.t - t) <= 1e-9 * std::max(1.0, std::abs(t))) return r;
  throw Error("no recorded row at t=" + format_number(t));
}

namespace detail {

inline std::function<cplx(double)> fourier_initial(const ScenarioConfig& c, const FourierRun& f) {
  if (f.initial == "uniform") return [](double x) { return cplx(uniform_unit_remainder(x), 0.0); };
  if (f.initial == "gaussian") return [](double x) { return cplx(gaussian_unit_remainder(x), 0.0); };
  if (f.initial == "gamma_inf") return [](double x) { return cplx(gamma_inf_remainder(x), 0.0); };
  GridSpec spec;
  auto g = standardize(discretize(c.initial, spec)).state;
  return [g = std::move(g)](double x) { return char_fn_remainder(g, x); };
}

inline std::string xi_label(double xi) { return format_number(xi); }

}  // namespace detail

class ScenarioRunner {
 public:
  ScenarioRunner(ScenarioConfig cfg, RunOptions opt = {}) : c_(std::move(cfg)), opt_(opt) {}

  ScenarioResult execute() {
    const auto start = std::chrono::steady_clock::now();
    res_ = {};
    res_.name = c_.name;
    try {
      run_solvers();
      apply_envelopes();
      for (const auto& ch : c_.checks) run_check(ch);
    } catch (const SolverAbort& e) {
      res_.failure_time = e.time();
      res_.failure = e.what();
    }
    res_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return std::move(res_);
  }

 private:
  void run_solvers() {
    if (c_.grid) {
      GridSolver solver(c_.selection, discretize(c_.initial, c_.grid->spec), c_.grid->solver);
      std::vector<GridObserver> obs;
      for (const auto& ch : c_.checks)
        if (ch.at("kind") == "r_bound") obs.push_back(r_observer(ch));
      res_.grid = solver.run(obs);
    }
    if (c_.particle) run_particles();
    if (c_.fourier) {
      const auto& f = *c_.fourier;
      LatticeSpectralSolver solver(detail::fourier_initial(c_, f), f.lattice);
      res_.fourier = solver.run(f.t_end, f.record_every, f.s);
    }
    if (c_.hierarchy) {
      const auto& h = *c_.hierarchy;
      MomentODEState s;
      s.closure = h.closure;
      const auto g = discretize(c_.initial, c_.grid ? c_.grid->spec : GridSpec{});
      auto st = centered_stats(g, h.K);
      if (std::holds_alternative<GaussianProfile>(c_.initial.shape)) {
        // Exact Gaussian central moments rather than their quadrature.
        const auto& gp = std::get<GaussianProfile>(c_.initial.shape);
        st.xbar = gp.mean;
        for (int k = 2; k <= h.K; ++k) st.M[k] = k % 2 ? 0.0 : double_factorial(k - 1) * std::pow(gp.var, k / 2);
      }
      s.xbar = st.xbar;
      s.M = st.M;
      res_.hierarchy = integrate(s, c_.selection, h.dt, h.t_end, h.record_every);
    }
  }

  void run_particles() {
    const auto& p = *c_.particle;
    std::vector<std::uint64_t> seeds = p.seeds;
    if (opt_.seed)
      for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = *opt_.seed + i;
    res_.seeds = seeds;
    res_.particle.assign(seeds.size(), {});
    auto one = [&](std::size_t i) {
      std::mt19937_64 rng(seeds[i] ^ 0x9e3779b97f4a7c15ULL);
      auto cfg = p.solver;
      cfg.seed = seeds[i];
      ParticleSolver solver(c_.selection, sample(c_.initial, cfg.n_target, rng), cfg);
      return solver.run();
    };
    const std::size_t width = std::max(1u, opt_.threads);
    for (std::size_t base = 0; base < seeds.size(); base += width) {
      std::vector<std::future<std::vector<MomentTrack>>> jobs;
      for (std::size_t i = base; i < std::min(seeds.size(), base + width); ++i)
        jobs.push_back(std::async(width == 1 ? std::launch::deferred : std::launch::async, one, i));
      for (std::size_t i = 0; i < jobs.size(); ++i) res_.particle[base + i] = jobs[i].get();
    }
  }

  GridObserver r_observer(const json& ch) {
    const auto xis = ch.value("xi", std::vector<double>{0.1, 0.5, 1.0});
    const SelectionRate m = c_.selection;
    return [xis, m](double, const GridDensity& f, MomentTrack& row) {
      const auto [alpha, beta] = lipschitz_decomposition(m, row.xbar);
      for (double xi : xis) {
        double measured = 0.0, bound = 0.0;
        if (row.M[2] > 0.0) {
          measured = std::abs(selection_remainder(f, m, xi));
          bound = r_bound(2, alpha, beta, row.M[2], row.M[4], std::nullopt, xi);
        }
        row.set_extra("R_xi" + detail::xi_label(xi), measured);
        row.set_extra("Rbound_xi" + detail::xi_label(xi), bound);
      }
    };
  }

  void apply_envelopes() {
    for (const auto& e : c_.envelopes) {
      if (e.kind == "ds_bound") {
        auto& rows = res_.fourier;
        const double lam = lambda_s(e.s);
        const double d0 = column_value(rows.front(), "d_s");
        auto env = envelope(DsEnvelope{d0, lam, e.L, e.c.value_or(lam)});
        check_envelope(rows, "d_s", env, e, false, "env_ds_bound");
        continue;
      }
      auto& rows = res_.grid;
      const double M0 = column_value(rows.front(), e.moment);
      const double h = initial_eta(c_);
      std::function<double(double)> env;
      bool lower = false;
      if (e.kind == "dirac_stability") {
        env = envelope(DiracStabilityEnvelope{e.delta, M0, h});
      } else if (e.kind == "improved_rate") {
        env = envelope(ImprovedRateEnvelope{e.lambda, e.C, e.k, e.k0, e.delta});
      } else {
        env = envelope(M2LowerEnvelope{e.C, M0, e.k0, e.delta});
        lower = true;
      }
      check_envelope(rows, e.moment, env, e, lower, "env_" + e.kind + "_" + e.moment);
    }
  }

  void check_envelope(std::vector<MomentTrack>& rows, const std::string& col, const std::function<double(double)>& env,
                      const EnvelopeConfig& e, bool lower, const std::string& column_name) {
    // worst = max value/bound (upper) or max bound/value (lower); pass iff <= slack
    double worst = 0.0, at = 0.0;
    for (auto& r : rows) {
      const double b = env(r.t);
      r.set_extra(column_name, b);
      if (r.t < e.t_min - 1e-12 || r.t > e.t_max + 1e-12) continue;
      const double v = column_value(r, col);
      const double q = lower ? b / v : v / b;
      if (!(q <= worst)) worst = q, at = r.t;
    }
    CheckResult c;
    c.name = "envelope:" + e.kind + ":" + col;
    c.measured = worst;
    c.target = e.slack;
    c.pass = worst <= e.slack;
    c.detail = std::string(lower ? "max bound/value" : "max value/bound") + " = " + format_number(worst) + " at t=" +
               format_number(at);
    res_.checks.push_back(c);
  }

  const std::vector<MomentTrack>& rows_for(const std::string& solver) const {
    if (solver == "grid") return res_.grid;
    if (solver == "fourier") return res_.fourier;
    if (solver == "hierarchy") return res_.hierarchy;
    if (solver == "particle" && !res_.particle.empty()) return res_.particle.front();
    throw ConfigError("check refers to solver '" + solver + "' which did not run");
  }

  void run_check(const json& ch) {
    const std::string kind = ch.at("kind");
    CheckResult c;
    if (kind == "fit_rate") {
      const std::string solver = ch.value("solver", "grid"), col = ch.at("column");
      const auto w = ch.at("window").get<std::vector<double>>();
      const auto fit = fit_rate(rows_for(solver), [&](const MomentTrack& r) { return column_value(r, col); }, w.at(0), w.at(1));
      c.name = "fit_rate:" + solver + ":" + col + "[" + format_number(w[0]) + "," + format_number(w[1]) + "]";
      c.measured = fit.rate;
      if (ch.contains("target")) {
        c.target = ch.at("target");
        const double tol = ch.at("tol");
        c.pass = std::abs(fit.rate - c.target) <= tol;
        c.detail = "rate " + format_number(fit.rate) + " vs " + format_number(c.target) + " +/- " + format_number(tol);
      } else {
        c.target = ch.contains("min") ? ch.at("min").get<double>()
                                      : ch.at("min_lambda_factor").get<double>() * lambda_s(c_.fourier ? c_.fourier->s : 2.5);
        c.pass = fit.rate >= c.target;
        c.detail = "rate " + format_number(fit.rate) + " >= " + format_number(c.target);
      }
      c.detail += ", r2 " + format_number(fit.r2);
    } else if (kind == "mean_convergence") {
      const double ta = ch.at("t_a"), tb = ch.at("t_b"), tol = ch.at("tol");
      const double d = std::abs(row_at(res_.grid, tb).xbar - row_at(res_.grid, ta).xbar);
      c = {"mean_convergence", d <= tol, d, tol, "|xbar(" + format_number(tb) + ") - xbar(" + format_number(ta) + ")| = " + format_number(d)};
    } else if (kind == "initial_ratio") {
      const std::string num = ch.at("num"), den = ch.at("den");
      const double q = column_value(res_.grid.front(), num) / column_value(res_.grid.front(), den);
      const double mx = ch.at("max");
      c = {"initial_ratio:" + num + "/" + den, q <= mx, q, mx, num + "/" + den + " at t=0 is " + format_number(q)};
    } else if (kind == "ratio_decreasing") {
      const std::string num = ch.at("num"), den = ch.at("den");
      const double from = ch.value("t_from", 0.0), to = ch.value("t_to", std::numeric_limits<double>::infinity());
      double prev = std::numeric_limits<double>::infinity(), worst_t = 0.0;
      int violations = 0;
      for (const auto& r : res_.grid) {
        if (r.t < from - 1e-12 || r.t > to + 1e-12) continue;
        const double q = column_value(r, num) / column_value(r, den);
        if (!(q < prev)) {
          if (!violations) worst_t = r.t;
          ++violations;
        }
        prev = q;
      }
      c = {"ratio_decreasing:" + num + "/" + den, violations == 0, static_cast<double>(violations), 0.0,
           violations ? std::to_string(violations) + " non-decreasing steps, first at t=" + format_number(worst_t)
                      : "strictly decreasing"};
    } else if (kind == "r_bound") {
      const auto xis = ch.value("xi", std::vector<double>{0.1, 0.5, 1.0});
      double worst = 0.0, at = 0.0, wxi = 0.0;
      for (const auto& r : res_.grid)
        for (double xi : xis) {
          const double m = column_value(r, "R_xi" + detail::xi_label(xi));
          const double b = column_value(r, "Rbound_xi" + detail::xi_label(xi));
          const double q = b > 0.0 ? m / b : (m > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
          if (q > worst) worst = q, at = r.t, wxi = xi;
        }
      c = {"r_bound", worst <= 1.0, worst, 1.0,
           "max |R|/bound = " + format_number(worst) + " at t=" + format_number(at) + ", xi=" + format_number(wxi)};
    } else if (kind == "cross_solver") {
      const auto times = ch.at("times").get<std::vector<double>>();
      const auto cols = ch.at("columns").get<std::vector<std::string>>();
      const double k = ch.value("sigmas", 3.0);
      if (res_.particle.size() < 2) throw ConfigError("cross_solver check needs at least two particle seeds");
      double worst = 0.0;
      std::string where;
      for (double t : times)
        for (const auto& col : cols) {
          const double g = column_value(row_at(res_.grid, t), col);
          double mean = 0.0, sq = 0.0;
          const double n = static_cast<double>(res_.particle.size());
          for (const auto& run : res_.particle) mean += column_value(row_at(run, t), col);
          mean /= n;
          for (const auto& run : res_.particle) {
            const double d = column_value(row_at(run, t), col) - mean;
            sq += d * d;
          }
          const double sd = std::sqrt(sq / (n - 1.0));
          const double z = sd > 0.0 ? std::abs(mean - g) / sd : (mean == g ? 0.0 : std::numeric_limits<double>::infinity());
          if (z >= worst) worst = z, where = col + " at t=" + format_number(t);
        }
      c = {"cross_solver", worst <= k, worst, k, "max |mean - grid| / seed sd = " + format_number(worst) + " (" + where + ")"};
    } else {
      throw ConfigError("unknown check kind '" + kind + "'");
    }
    res_.checks.push_back(c);
  }

  ScenarioConfig c_;
  RunOptions opt_;
  ScenarioResult res_;
};

inline ScenarioResult execute_scenario(const ScenarioConfig& c, const RunOptions& opt = {}) {
  return ScenarioRunner(c, opt).execute();
}

// ---------------------------------------------------------------------------
// Artifacts.

/// 64-bit FNV-1a, stable across platforms (unlike std::hash).
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const ScenarioConfig& c) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a64(c.source.dump());
  return os.str();
}

inline json tagged(json v, const char* tag) { return json{{"value", std::move(v)}, {"tag", tag}}; }
inline json measured(json v) { return tagged(std::move(v), "measured"); }
inline json calibrated(json v) { return tagged(std::move(v), "calibrated"); }

/// Non-finite doubles become strings so the summary stays valid JSON.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(format_number(v)); }

inline json summary_json(const ScenarioResult& r, const ScenarioConfig& c) {
  json s;
  s["scenario"] = calibrated(r.name);
  s["config_hash"] = calibrated(config_hash(c));
  s["schema_version"] = calibrated(kCsvSchemaVersion);
  s["all_pass"] = measured(r.all_pass());
  s["wall_time_s"] = measured(r.wall_seconds);
  json seeds = json::array();
  for (auto v : r.seeds) seeds.push_back(v);
  s["seeds"] = calibrated(seeds);
  json checks = json::array();
  for (const auto& ch : r.checks)
    checks.push_back(json{{"name", calibrated(ch.name)},
                          {"pass", measured(ch.pass)},
                          {"measured", measured(num(ch.measured))},
                          {"target", calibrated(num(ch.target))},
                          {"detail", measured(ch.detail)}});
  s["checks"] = checks;
  json env = json::array();
  for (const auto& e : c.envelopes)
    env.push_back(json{{"kind", calibrated(e.kind)},
                       {"moment", calibrated(e.moment)},
                       {"delta", calibrated(e.delta)},
                       {"C", calibrated(e.C)},
                       {"k0", calibrated(e.k0)},
                       {"slack", calibrated(e.slack)}});
  s["envelopes"] = env;
  json fits = json::object();
  for (const auto& ch : r.checks)
    if (ch.name.rfind("fit_rate:", 0) == 0) fits[ch.name.substr(9)] = measured(num(ch.measured));
  s["fitted_rates"] = fits;
  if (!r.fourier.empty()) {
    s["d_s_initial"] = measured(num(column_value(r.fourier.front(), "d_s")));
    s["d_s_final"] = measured(num(column_value(r.fourier.back(), "d_s")));
    s["d_s_argmax_xi_final"] = measured(num(column_value(r.fourier.back(), "d_s_argmax")));
  }
  if (r.failure_time) {
    s["failure"] = json{{"time", measured(*r.failure_time)}, {"message", measured(r.failure)}};
  }
  return s;
}

/// True iff every leaf of the document sits in a {"value", "tag"} pair.
inline bool every_field_tagged(const json& j) {
  if (j.is_object()) {
    if (j.contains("tag") && j.contains("value") && j.size() == 2)
      return j["tag"] == "measured" || j["tag"] == "calibrated";
    for (const auto& [k, v] : j.items())
      if (!every_field_tagged(v)) return false;
    return true;
  }
  if (j.is_array()) {
    for (const auto& v : j)
      if (!every_field_tagged(v)) return false;
    return true;
  }
  return false;
}

/// Writes the artifact directory; returns the list of files written.
inline std::vector<std::string> write_artifacts(const ScenarioResult& r, const ScenarioConfig& c,
                                                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::pair<std::string, const std::vector<MomentTrack>*>> csvs;
  if (!r.grid.empty()) csvs.emplace_back("grid.csv", &r.grid);
  if (!r.fourier.empty()) csvs.emplace_back("fourier.csv", &r.fourier);
  if (!r.hierarchy.empty()) csvs.emplace_back("hierarchy.csv", &r.hierarchy);
  for (std::size_t i = 0; i < r.particle.size(); ++i)
    csvs.emplace_back("particle_seed" + std::to_string(r.seeds[i]) + ".csv", &r.particle[i]);

  std::vector<std::string> files;
  std::ostringstream manifest;
  manifest << "schema_version " << kCsvSchemaVersion << '\n'
           << "scenario " << r.name << '\n'
           << "config_hash fnv1a64:" << config_hash(c) << '\n'
           << "input " << (c.origin.empty() ? "inline" : c.origin) << '\n';
  for (const auto& [name, rows] : csvs) {
    write_csv((dir / name).string(), *rows);
    files.push_back(name);
    const auto h = csv_header(rows->front());
    manifest << "output " << name << ' ';
    for (std::size_t i = 0; i < h.size(); ++i) manifest << (i ? "," : "") << h[i];
    manifest << '\n';
  }
  {
    std::ofstream f(dir / "config.json");
    f << c.source.dump(2) << '\n';
    files.push_back("config.json");
    manifest << "output config.json\n";
  }
  {
    std::ofstream f(dir / "summary.json");
    f << summary_json(r, c).dump(2) << '\n';
    files.push_back("summary.json");
    manifest << "output summary.json\n";
  }
  std::ofstream(dir / "MANIFEST") << manifest.str();
  files.push_back("MANIFEST");
  return files;
}

inline ScenarioResult run_scenario(const ScenarioConfig& c, const std::filesystem::path& out_dir,
                                   const RunOptions& opt = {}) {
  auto r = execute_scenario(c, opt);
  write_artifacts(r, c, out_dir);
  return r;
}

}  // namespace midsel
