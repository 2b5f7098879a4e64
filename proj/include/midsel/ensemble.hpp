#pragma once
// The two state representations: weighted atoms and a density on a uniform
// grid. Everything downstream goes through for_each_atom, so the moment and
// characteristic-function code is shared.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "midsel/error.hpp"

namespace midsel {

/// f(x_j) on x_j = x_min + j h. Quadrature is h * sum (cell rule).
struct GridDensity {
  double x_min = 0.0;
  double h = 1.0;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double x(std::size_t j) const noexcept { return x_min + static_cast<double>(j) * h; }
  double x_max() const noexcept { return x(values.empty() ? 0 : values.size() - 1); }
  double mass() const noexcept {
    return h * std::accumulate(values.begin(), values.end(), 0.0);
  }
};

/// Atoms with normalised weights; the total mass rho is kept apart so that
/// weights stay O(1) however much the population grows or shrinks.
struct ParticleEnsemble {
  std::vector<double> positions;
  std::vector<double> weights;
  double mass = 1.0;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return positions.size(); }

  void normalize() {
    double s = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(s > 0.0) || !std::isfinite(s)) throw DegenerateState("ensemble weights sum to " + std::to_string(s));
    for (double& w : weights) w /= s;
  }

  static ParticleEnsemble atoms(std::vector<double> x, std::vector<double> w, double mass = 1.0) {
    if (x.size() != w.size()) throw DomainError("positions and weights differ in length");
    ParticleEnsemble e{std::move(x), std::move(w), mass, 0};
    e.normalize();
    return e;
  }
};

// Calls fn(x, mass_of_atom) for every atom; grid nodes count as atoms h f_j.
template <class F>
void for_each_atom(const GridDensity& g, F&& fn) {
  for (std::size_t j = 0; j < g.size(); ++j)
    if (g.values[j] != 0.0) fn(g.x(j), g.h * g.values[j]);
}

template <class F>
void for_each_atom(const ParticleEnsemble& p, F&& fn) {
  for (std::size_t j = 0; j < p.size(); ++j)
    if (p.weights[j] != 0.0) fn(p.positions[j], p.mass * p.weights[j]);
}

namespace detail {
inline void require_nonempty(const GridDensity& g) {
  if (g.values.empty()) throw DomainError("empty grid density");
  if (!(g.h > 0.0)) throw DomainError("grid spacing must be positive");
}
inline void require_nonempty(const ParticleEnsemble& p) {
  if (p.positions.empty()) throw DomainError("empty particle ensemble");
  if (p.weights.size() != p.positions.size()) throw DomainError("positions and weights differ in length");
}
}  // namespace detail

/// mu_0 .. mu_{k_max}
template <class State>
std::vector<double> raw_moments(const State& s, int k_max) {
  if (k_max < 0) throw DomainError("k_max must be nonnegative");
  detail::require_nonempty(s);
  std::vector<double> mu(static_cast<std::size_t>(k_max) + 1, 0.0);
  for_each_atom(s, [&](double x, double w) {
    double p = w;
    for (int k = 0; k <= k_max; ++k) {
      mu[k] += p;
      p *= x;
    }
  });
  return mu;
}

struct CenteredStats {
  double rho = 0.0;
  double xbar = 0.0;
  std::vector<double> M;  // M[0] = 1, M[1] = 0, M[k] for k <= k_max
  double M2() const { return M.size() > 2 ? M[2] : 0.0; }
};

template <class State>
CenteredStats centered_stats(const State& s, int k_max) {
  if (k_max < 1) throw DomainError("centered stats need k_max >= 1");
  detail::require_nonempty(s);
  double rho = 0.0, first = 0.0;
  for_each_atom(s, [&](double x, double w) {
    rho += w;
    first += w * x;
  });
  if (!(rho > 0.0)) throw DegenerateState("state has mass " + std::to_string(rho));
  CenteredStats out;
  out.rho = rho;
  out.xbar = first / rho;
  out.M.assign(static_cast<std::size_t>(k_max) + 1, 0.0);
  const double xb = out.xbar;
  for_each_atom(s, [&](double x, double w) {
    const double d = x - xb;
    double p = w * d * d;
    for (int k = 2; k <= k_max; ++k) {
      out.M[k] += p;
      p *= d;
    }
  });
  for (int k = 2; k <= k_max; ++k) out.M[k] /= rho;
  out.M[0] = 1.0;
  out.M[1] = 0.0;
  return out;
}

/// Normalised characteristic function  sum w e^{-i xi x} / sum w.
template <class State>
std::complex<double> char_fn(const State& s, double xi) {
  detail::require_nonempty(s);
  double re = 0.0, im = 0.0, rho = 0.0;
  for_each_atom(s, [&](double x, double w) {
    rho += w;
    re += w * std::cos(xi * x);
    im -= w * std::sin(xi * x);
  });
  if (!(rho > 0.0)) throw DegenerateState("characteristic function of a zero-mass state");
  return {re / rho, im / rho};
}

/// e^{-iy} - 1 + iy + y^2/2 without cancellation near y = 0.
inline std::complex<double> cf_taylor_remainder(double y) {
  if (std::abs(y) < 0.5) {
    // Series sum_{n>=3} (-iy)^n / n!
    std::complex<double> term = std::complex<double>(0.0, 1.0) * (y * y * y / 6.0);  // (-iy)^3/3! = i y^3/6
    std::complex<double> sum = term;
    for (int n = 4; n < 30; ++n) {
      term *= std::complex<double>(0.0, -y) / static_cast<double>(n);
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  return std::complex<double>(std::cos(y) - 1.0 + 0.5 * y * y, -std::sin(y) + y);
}

/// cf(xi) - (1 - xi^2/2) for a standardised state, accurate at small xi where
/// the plain difference cancels. Only meaningful for mean 0 / variance 1 states.
template <class State>
std::complex<double> char_fn_remainder(const State& s, double xi) {
  detail::require_nonempty(s);
  std::complex<double> acc = 0.0;
  double rho = 0.0;
  for_each_atom(s, [&](double x, double w) {
    rho += w;
    acc += w * cf_taylor_remainder(xi * x);
  });
  if (!(rho > 0.0)) throw DegenerateState("characteristic function of a zero-mass state");
  return acc / rho;
}

/// d/dxi of the normalised characteristic function.
template <class State>
std::complex<double> char_fn_derivative(const State& s, double xi) {
  detail::require_nonempty(s);
  std::complex<double> acc = 0.0;
  double rho = 0.0;
  for_each_atom(s, [&](double x, double w) {
    rho += w;
    acc += w * std::complex<double>(0.0, -x) * std::polar(1.0, -xi * x);
  });
  return acc / rho;
}

template <class State>
struct Standardized {
  State state;
  double xbar;
  double M2;
};

/// Mean 0, variance 1, unit mass version of the state.
inline Standardized<ParticleEnsemble> standardize(const ParticleEnsemble& p) {
  auto st = centered_stats(p, 2);
  if (!(st.M[2] > 0.0)) throw ConcentrationError("variance is zero; the profile is a Dirac mass");
  const double sd = std::sqrt(st.M[2]);
  ParticleEnsemble out = p;
  for (double& x : out.positions) x = (x - st.xbar) / sd;
  out.mass = 1.0;
  out.normalize();
  return {std::move(out), st.xbar, st.M[2]};
}

inline Standardized<GridDensity> standardize(const GridDensity& g) {
  auto st = centered_stats(g, 2);
  if (!(st.M[2] > 0.0)) throw ConcentrationError("variance is zero; the profile is a Dirac mass");
  const double sd = std::sqrt(st.M[2]);
  GridDensity out;
  out.x_min = (g.x_min - st.xbar) / sd;
  out.h = g.h / sd;
  out.values.resize(g.size());
  const double scale = sd / st.rho;
  for (std::size_t j = 0; j < g.size(); ++j) out.values[j] = g.values[j] * scale;
  return {std::move(out), st.xbar, st.M[2]};
}

using AnyState = std::variant<GridDensity, ParticleEnsemble>;

}  // namespace midsel
