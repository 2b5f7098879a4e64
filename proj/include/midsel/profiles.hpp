#pragma once
// Initial conditions and how they are put on a grid or sampled into atoms.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <tuple>
#include <type_traits>
#include <string>
#include <variant>
#include <vector>

#include "midsel/ensemble.hpp"
#include "midsel/error.hpp"

namespace midsel {

struct GaussianProfile {
  double mean = 0.0;
  double var = 1.0;
};
struct UniformProfile {
  double a = -1.0;
  double b = 1.0;
};
struct TwoAtomProfile {
  double x1 = -1.0;
  double x2 = 1.0;
  double w1 = 0.5;  // weight of x1
};
/// Tabulated density, linearly interpolated and zero outside [x.front(), x.back()].
struct TableProfile {
  std::vector<double> x;
  std::vector<double> f;
};

using ProfileShape = std::variant<GaussianProfile, UniformProfile, TwoAtomProfile, TableProfile>;

struct InitialProfile {
  ProfileShape shape = GaussianProfile{};
  double mass = 1.0;
};

inline double table_density(const TableProfile& t, double x) {
  if (t.x.size() < 2 || x < t.x.front() || x > t.x.back()) return 0.0;
  auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
  std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - t.x.begin()), t.x.size() - 1);
  double w = (x - t.x[i - 1]) / (t.x[i] - t.x[i - 1]);
  return t.f[i - 1] + w * (t.f[i] - t.f[i - 1]);
}

/// Mean and variance of the normalised profile.
inline std::pair<double, double> profile_mean_var(const ProfileShape& s) {
  return std::visit(
      [](const auto& p) -> std::pair<double, double> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianProfile>) {
          return {p.mean, p.var};
        } else if constexpr (std::is_same_v<T, UniformProfile>) {
          return {0.5 * (p.a + p.b), (p.b - p.a) * (p.b - p.a) / 12.0};
        } else if constexpr (std::is_same_v<T, TwoAtomProfile>) {
          double m = p.w1 * p.x1 + (1 - p.w1) * p.x2;
          return {m, p.w1 * (1 - p.w1) * (p.x2 - p.x1) * (p.x2 - p.x1)};
        } else {
          GridDensity g{p.x.front(), 0.0, {}};
          // Fine resampling is enough for a default extent.
          const std::size_t n = 4096;
          g.h = (p.x.back() - p.x.front()) / static_cast<double>(n - 1);
          for (std::size_t j = 0; j < n; ++j) g.values.push_back(table_density(p, g.x(j)));
          auto st = centered_stats(g, 2);
          return {st.xbar, st.M[2]};
        }
      },
      s);
}

struct GridSpec {
  std::size_t n = 4096;
  double x_min = 0.0;
  double x_max = 0.0;  // x_min == x_max means "pick a default extent"
  double sigmas = 12.0;
};

/// Default half-width: the support for compact profiles, `sigmas` standard
/// deviations for Gaussians. B0 never widens the support, so the initial
/// extent is enough for all time.
inline std::pair<double, double> default_extent(const ProfileShape& s, double sigmas) {
  return std::visit(
      [&](const auto& p) -> std::pair<double, double> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianProfile>) {
          const double w = sigmas * std::sqrt(p.var);
          return {p.mean - w, p.mean + w};
        } else if constexpr (std::is_same_v<T, UniformProfile>) {
          const double pad = 1e-3 * (p.b - p.a);
          return {p.a - pad, p.b + pad};
        } else if constexpr (std::is_same_v<T, TwoAtomProfile>) {
          return {std::min(p.x1, p.x2), std::max(p.x1, p.x2)};
        } else {
          return {p.x.front(), p.x.back()};
        }
      },
      s);
}

/// Grid version of the profile with total mass prof.mass (h * sum rule).
/// Gaussians and tables are point-sampled, uniforms are cell averages and
/// atoms are snapped to the nearest node.
inline GridDensity discretize(const InitialProfile& prof, GridSpec spec) {
  if (spec.n < 3) throw ConfigError("grid needs at least 3 nodes");
  if (!(prof.mass > 0.0)) throw ConfigError("initial mass must be positive");
  if (spec.x_min == spec.x_max) std::tie(spec.x_min, spec.x_max) = default_extent(prof.shape, spec.sigmas);
  if (!(spec.x_max > spec.x_min)) throw ConfigError("grid extent must satisfy x_min < x_max");
  GridDensity g;
  g.x_min = spec.x_min;
  g.h = (spec.x_max - spec.x_min) / static_cast<double>(spec.n - 1);
  g.values.assign(spec.n, 0.0);
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianProfile>) {
          if (!(p.var > 0.0)) throw ConfigError("gaussian variance must be positive");
          for (std::size_t j = 0; j < g.size(); ++j) {
            const double z = (g.x(j) - p.mean);
            g.values[j] = std::exp(-0.5 * z * z / p.var);
          }
        } else if constexpr (std::is_same_v<T, UniformProfile>) {
          if (!(p.b > p.a)) throw ConfigError("uniform profile needs a < b");
          for (std::size_t j = 0; j < g.size(); ++j) {
            const double lo = std::max(p.a, g.x(j) - 0.5 * g.h);
            const double hi = std::min(p.b, g.x(j) + 0.5 * g.h);
            g.values[j] = std::max(0.0, hi - lo);
          }
        } else if constexpr (std::is_same_v<T, TwoAtomProfile>) {
          if (!(p.w1 >= 0.0 && p.w1 <= 1.0)) throw ConfigError("atom weight must lie in [0, 1]");
          auto node = [&](double x) {
            double r = std::round((x - g.x_min) / g.h);
            return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(g.size() - 1)));
          };
          g.values[node(p.x1)] += p.w1;
          g.values[node(p.x2)] += 1.0 - p.w1;
        } else {
          for (std::size_t j = 0; j < g.size(); ++j) g.values[j] = std::max(0.0, table_density(p, g.x(j)));
        }
      },
      prof.shape);
  const double m = g.mass();
  if (!(m > 0.0)) throw ConfigError("initial profile has no mass on the grid");
  for (double& v : g.values) v *= prof.mass / m;
  return g;
}

/// n equally weighted draws (two-atom profiles give two weighted atoms).
template <class Rng>
ParticleEnsemble sample(const InitialProfile& prof, std::size_t n, Rng& rng) {
  if (n == 0) throw ConfigError("particle count must be positive");
  ParticleEnsemble e;
  e.mass = prof.mass;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianProfile>) {
          std::normal_distribution<double> d(p.mean, std::sqrt(p.var));
          for (std::size_t i = 0; i < n; ++i) e.positions.push_back(d(rng));
        } else if constexpr (std::is_same_v<T, UniformProfile>) {
          std::uniform_real_distribution<double> d(p.a, p.b);
          for (std::size_t i = 0; i < n; ++i) e.positions.push_back(d(rng));
        } else if constexpr (std::is_same_v<T, TwoAtomProfile>) {
          e.positions = {p.x1, p.x2};
          e.weights = {p.w1, 1.0 - p.w1};
        } else {
          std::piecewise_linear_distribution<double> d(p.x.begin(), p.x.end(), p.f.begin());
          for (std::size_t i = 0; i < n; ++i) e.positions.push_back(d(rng));
        }
      },
      prof.shape);
  if (e.weights.empty()) e.weights.assign(e.positions.size(), 1.0);
  e.normalize();
  return e;
}

}  // namespace midsel
