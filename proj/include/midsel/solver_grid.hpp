#pragma once
// Deterministic solver for  d_t f = B0[f] - m f  on a fixed uniform grid.
// Each step is the frozen-source Duhamel update
//   f' = e^{-m dt} f + phi(m, dt) B0[f],   phi = (1 - e^{-m dt}) / m,
// which keeps f nonnegative for any dt.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "midsel/collision.hpp"
#include "midsel/ensemble.hpp"
#include "midsel/error.hpp"
#include "midsel/moment_track.hpp"
#include "midsel/selection.hpp"

namespace midsel {

/// phi(m, dt) = (1 - e^{-m dt}) / m, equal to dt in the limit m -> 0.
inline double duhamel_phi(double m, double dt) {
  if (std::abs(m) < 1e-12) return dt;
  return -std::expm1(-m * dt) / m;
}

/// S_0..S_k_max about xbar by direct quadrature (any kind of rate).
template <class State>
std::vector<double> selection_moments(const State& s, const SelectionRate& m, double xbar, double rho, int k_max) {
  std::vector<double> S(static_cast<std::size_t>(k_max) + 1, 0.0);
  for_each_atom(s, [&](double x, double w) {
    const double d = x - xbar;
    double p = w * m.difference(x, xbar);
    for (int k = 0; k <= k_max; ++k) {
      S[k] += p;
      p *= d;
    }
  });
  for (double& v : S) v /= rho;
  return S;
}

/// One MomentTrack row for any state: moments up to `order`, S_0..S_order.
template <class State>
MomentTrack make_row(double t, const State& s, const SelectionRate& m, int order) {
  MomentTrack row;
  row.t = t;
  const bool closed = m.is_polynomial();
  auto st = centered_stats(s, closed ? order + 2 : order);
  row.rho = st.rho;
  row.xbar = st.xbar;
  if (closed) {
    row.S = s_closure(m, st.xbar, st.M, order);
    st.M.resize(static_cast<std::size_t>(order) + 1);
  } else {
    row.S = selection_moments(s, m, st.xbar, st.rho, order);
  }
  row.M = std::move(st.M);
  return row;
}

struct GridSolverConfig {
  double dt = 1e-2;
  double t_end = 1.0;
  int record_every = 10;  // steps between rows
  int moment_order = 8;
  ConvMethod conv = ConvMethod::automatic;
};

using GridObserver = std::function<void(double t, const GridDensity&, MomentTrack&)>;

class GridSolver {
 public:
  GridSolver(SelectionRate m, GridDensity f0, GridSolverConfig cfg, double t0 = 0.0)
      : m_(std::move(m)), f_(std::move(f0)), cfg_(cfg), t0_(t0), conv_(cfg.conv) {
    if (!(cfg_.dt > 0.0)) throw ConfigError("grid solver needs dt > 0");
    if (cfg_.record_every < 1) throw ConfigError("record_every must be >= 1");
    if (cfg_.moment_order < 2) throw ConfigError("moment_order must be >= 2");
    detail::require_nonempty(f_);
    for (double v : f_.values)
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("initial grid density must be finite and nonnegative");
    if (!(f_.mass() > 0.0)) throw ConfigError("initial grid density has zero mass");
    decay_.resize(f_.size());
    phi_.resize(f_.size());
    for (std::size_t j = 0; j < f_.size(); ++j) {
      const double mj = m_(f_.x(j));
      decay_[j] = std::exp(-mj * cfg_.dt);
      phi_[j] = duhamel_phi(mj, cfg_.dt);
    }
  }

  double time() const noexcept { return t0_ + static_cast<double>(steps_) * cfg_.dt; }
  long long steps() const noexcept { return steps_; }
  const GridDensity& density() const noexcept { return f_; }
  const SelectionRate& rate() const noexcept { return m_; }
  const GridSolverConfig& config() const noexcept { return cfg_; }

  void step() {
    b0_grid(f_, conv_, scratch_, birth_);
    for (std::size_t j = 0; j < f_.size(); ++j) f_.values[j] = decay_[j] * f_.values[j] + phi_[j] * birth_.values[j];
    ++steps_;
  }

  MomentTrack record() const { return make_row(time(), f_, m_, cfg_.moment_order); }

  /// Steps to t_end, returning a row every record_every steps plus the last.
  std::vector<MomentTrack> run(const std::vector<GridObserver>& observers = {}) {
    std::vector<MomentTrack> rows;
    const long long n = steps_to(cfg_.t_end);
    auto emit = [&] {
      rows.push_back(record());
      for (const auto& obs : observers) obs(rows.back().t, f_, rows.back());
    };
    emit();
    for (long long i = 0; i < n; ++i) {
      step();
      check_finite();
      if ((i + 1) % cfg_.record_every == 0 || i + 1 == n) emit();
    }
    return rows;
  }

  /// Number of steps from the current time to t (rounded to the step grid).
  long long steps_to(double t) const {
    const double span = (t - time()) / cfg_.dt;
    if (span < -1e-9) throw ConfigError("t_end lies before the current time");
    return static_cast<long long>(std::ceil(span - 1e-9));
  }

 private:
  void check_finite() const {
    double rho = 0.0, s1 = 0.0;
    for (std::size_t j = 0; j < f_.size(); ++j) {
      rho += f_.values[j];
      s1 += f_.values[j] * f_.x(j);
    }
    rho *= f_.h;
    if (!std::isfinite(rho) || !std::isfinite(s1)) throw SolverAbort(time(), "non-finite mass or mean in grid solver");
    if (!(rho > 0.0)) throw SolverAbort(time(), "grid population went extinct");
    const double xb = s1 * f_.h / rho;
    double m2 = 0.0;
    for (std::size_t j = 0; j < f_.size(); ++j) {
      const double d = f_.x(j) - xb;
      m2 += f_.values[j] * d * d;
    }
    if (!std::isfinite(m2)) throw SolverAbort(time(), "non-finite second moment in grid solver");
  }

  SelectionRate m_;
  GridDensity f_;
  GridSolverConfig cfg_;
  double t0_;
  long long steps_ = 0;
  SelfConvolver conv_;
  std::vector<double> decay_, phi_, scratch_;
  GridDensity birth_;
};

}  // namespace midsel
