#pragma once
// Fourier distance d_s, the limit profile gamma_inf, distances to a Dirac
// mass, and log-linear decay-rate fits.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "midsel/ensemble.hpp"
#include "midsel/error.hpp"
#include "midsel/moment_track.hpp"
#include "midsel/selection.hpp"

namespace midsel {

inline double gamma_inf_pdf(double x) {
  const double q = 1.0 + x * x;
  return 2.0 / (std::numbers::pi * q * q);
}

inline double gamma_inf_cf(double xi) {
  const double a = std::abs(xi);
  return (1.0 + a) * std::exp(-a);
}

inline double gamma_inf_cf_derivative(double xi) { return -xi * std::exp(-std::abs(xi)); }

struct XiGrid {
  double xi_min = 1e-3;
  double xi_max = 1e3;
  int n_points = 2000;  // per sign
  bool log_spacing = true;
  bool refine = true;

  std::vector<double> points() const {
    if (!(xi_min > 0.0) || !(xi_max > xi_min)) throw DomainError("xi grid needs 0 < xi_min < xi_max");
    if (n_points < 2) throw DomainError("xi grid needs at least 2 points");
    std::vector<double> p(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
      const double u = static_cast<double>(i) / (n_points - 1);
      p[i] = log_spacing ? xi_min * std::pow(xi_max / xi_min, u) : xi_min + u * (xi_max - xi_min);
    }
    return p;
  }
};

struct FourierDistance {
  double value = 0.0;
  double argmax = 0.0;  // signed xi
};

using CfFn = std::function<std::complex<double>(double)>;

/// sup_{xi != 0} |cf1 - cf2| / |xi|^s over the grid, both signs.
/// Throws MomentMismatch when the ratio keeps growing as xi -> 0, i.e. the
/// laws differ in a moment of order below s.
inline FourierDistance fourier_distance(const CfFn& cf1, const CfFn& cf2, double s, const XiGrid& grid = {}) {
  if (!(s > 0.0)) throw DomainError("d_s needs s > 0");
  auto ratio = [&](double xi) { return std::abs(cf1(xi) - cf2(xi)) / std::pow(std::abs(xi), s); };

  const double noise = 64.0 * std::numeric_limits<double>::epsilon();
  for (double sign : {1.0, -1.0}) {
    const double x0 = sign * grid.xi_min, x1 = x0 / 16.0;
    const double d0 = std::abs(cf1(x0) - cf2(x0)), d1 = std::abs(cf1(x1) - cf2(x1));
    if (d1 > noise && ratio(x1) > 2.0 * ratio(x0)) {
      const double k = std::log(d1 / d0) / std::log(1.0 / 16.0);
      const int order = std::clamp(static_cast<int>(std::lround(k)), 0, 2);
      throw MomentMismatch(order, "characteristic functions differ at order " + std::to_string(order) +
                                      " (|diff| ~ |xi|^" + format_number(k) + " as xi -> 0)");
    }
  }

  const auto pts = grid.points();
  FourierDistance best{-1.0, 0.0};
  std::size_t bi = 0;
  double bsign = 1.0;
  for (double sign : {1.0, -1.0})
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double v = ratio(sign * pts[i]);
      if (v > best.value) best = {v, sign * pts[i]}, bi = i, bsign = sign;
    }
  if (grid.refine && pts.size() >= 3) {
    // Golden section between the neighbours of the grid argmax, in ln xi.
    double a = std::log(pts[bi == 0 ? 0 : bi - 1]);
    double b = std::log(pts[std::min(bi + 1, pts.size() - 1)]);
    auto f = [&](double u) { return ratio(bsign * std::exp(u)); };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a), fc = f(c), fd = f(d);
    for (int it = 0; it < 80 && b - a > 1e-14; ++it) {
      if (fc > fd) {
        b = d, d = c, fd = fc;
        c = b - g * (b - a), fc = f(c);
      } else {
        a = c, c = d, fc = fd;
        d = a + g * (b - a), fd = f(d);
      }
    }
    const double u = 0.5 * (a + b), v = f(u);
    if (v > best.value) best = {v, bsign * std::exp(u)};
  }
  return best;
}

/// Characteristic function of a state as a CfFn (the state is copied).
template <class State>
CfFn cf_of(State s) {
  return [st = std::move(s)](double xi) { return char_fn(st, xi); };
}

/// W_p(g, delta_xbar) = M_p^{1/p} about the state's own mean.
template <class State>
double wasserstein_to_dirac(const State& s, int p) {
  if (p != 2 && p != 4) throw DomainError("wasserstein_to_dirac supports p = 2 or 4");
  const auto st = centered_stats(s, p);
  return std::pow(std::max(0.0, st.M[p]), 1.0 / p);
}

struct RateFit {
  double rate = 0.0;  // negated slope of ln y
  double intercept = 0.0;
  double r2 = 1.0;
  int rows = 0;
};

/// Least-squares fit of ln y = intercept - rate t over t in [ta, tb].
inline RateFit fit_rate(std::span<const double> t, std::span<const double> y, double ta, double tb) {
  if (t.size() != y.size()) throw DomainError("fit_rate: t and y differ in length");
  std::vector<double> ts, ls;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < ta || t[i] > tb) continue;
    if (!(y[i] > 0.0)) throw DomainError("fit_rate: nonpositive value " + format_number(y[i]) + " at t=" + format_number(t[i]));
    ts.push_back(t[i]);
    ls.push_back(std::log(y[i]));
  }
  if (ts.size() < 8) throw DomainError("fit_rate needs at least 8 rows in the window, got " + std::to_string(ts.size()));
  const double n = static_cast<double>(ts.size());
  double mt = 0.0, ml = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) mt += ts[i], ml += ls[i];
  mt /= n, ml /= n;
  double stt = 0.0, stl = 0.0, sll = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    stt += (ts[i] - mt) * (ts[i] - mt);
    stl += (ts[i] - mt) * (ls[i] - ml);
    sll += (ls[i] - ml) * (ls[i] - ml);
  }
  if (!(stt > 0.0)) throw DomainError("fit_rate: window has a single time value");
  const double slope = stl / stt;
  RateFit out;
  out.rate = -slope;
  out.intercept = ml - slope * mt;
  out.r2 = sll > 0.0 ? (stl * stl) / (stt * sll) : 1.0;
  out.rows = static_cast<int>(ts.size());
  return out;
}

/// Fit over one column of a moment track.
inline RateFit fit_rate(const std::vector<MomentTrack>& rows, const std::function<double(const MomentTrack&)>& pick,
                        double ta, double tb) {
  std::vector<double> t, y;
  for (const auto& r : rows) t.push_back(r.t), y.push_back(pick(r));
  return fit_rate(t, y, ta, tb);
}

/// The selection remainder R(t, xi) of the rescaled characteristic-function
/// equation, evaluated directly from a state:
///   R = -i S1 xi / sqrt(M2) G - phi^ + S0 G + (S2/M2 - S0) xi G' / 2,
/// with G the transform of the standardised profile and
/// phi = [m(sqrt(M2) x + xbar) - m(xbar)] gamma.
template <class State>
std::complex<double> selection_remainder(const State& s, const SelectionRate& m, double xi) {
  const auto st = centered_stats(s, 2);
  if (!(st.M[2] > 0.0)) throw ConcentrationError("R is undefined for a Dirac mass");
  const double sd = std::sqrt(st.M[2]);
  std::complex<double> G = 0.0, dG = 0.0, phi = 0.0;
  double S0 = 0.0, S1 = 0.0, S2 = 0.0;
  for_each_atom(s, [&](double y, double w) {
    const double p = w / st.rho, d = y - st.xbar, x = d / sd;
    const double dm = m.difference(y, st.xbar);
    const std::complex<double> e = std::polar(1.0, -xi * x);
    G += p * e;
    dG += p * std::complex<double>(0.0, -x) * e;
    phi += p * dm * e;
    S0 += p * dm;
    S1 += p * dm * d;
    S2 += p * dm * d * d;
  });
  const std::complex<double> I(0.0, 1.0);
  return -I * (S1 * xi / sd) * G - phi + S0 * G + 0.5 * (S2 / st.M[2] - S0) * xi * dG;
}

/// Monte Carlo noise ~ n^{-1/2} swamps |xi|^s near zero; refuse d_s on
/// particle data unless the sample is large and the grid stays clear of it.
inline void require_particle_metric_admissible(std::size_t n, double xi_min, double s) {
  const double noise = 1.0 / std::sqrt(static_cast<double>(n));
  if (n < 1000000) throw DomainError("d_s on particle data needs n >= 1e6, got " + std::to_string(n));
  const double floor = 10.0 * std::pow(noise, 1.0 / s);
  if (xi_min < floor)
    throw DomainError("d_s on particle data needs xi_min >= " + format_number(floor) + ", got " + format_number(xi_min));
}

}  // namespace midsel
