#pragma once
// The midpoint reproduction operator B0[f](x): offspring sit at the mean of
// two parents drawn from f/rho.

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "midsel/convolution.hpp"
#include "midsel/ensemble.hpp"
#include "midsel/error.hpp"

namespace midsel {

/// Grid form. Pairs whose index sum is odd land on a half node; their mass is
/// split evenly between the two neighbours, which keeps mass and mean exact.
inline void b0_grid(const GridDensity& f, SelfConvolver& conv, std::vector<double>& scratch, GridDensity& out) {
  detail::require_nonempty(f);
  out.x_min = f.x_min;
  out.h = f.h;
  out.values.assign(f.size(), 0.0);
  const double rho = f.mass();
  if (rho == 0.0) return;
  if (!(rho > 0.0)) throw DomainError("b0_grid on a state of mass " + std::to_string(rho));
  conv(f.values, scratch);
  const double scale = f.h / rho;
  const std::size_t n = f.size();
  for (std::size_t j = 0; j < n; ++j) {
    double v = scratch[2 * j];
    if (j > 0) v += 0.5 * scratch[2 * j - 1];
    if (j + 1 < n) v += 0.5 * scratch[2 * j + 1];
    out.values[j] = scale * v;
  }
}

inline GridDensity b0_grid(const GridDensity& f, ConvMethod method = ConvMethod::automatic) {
  SelfConvolver conv(method);
  std::vector<double> scratch;
  GridDensity out;
  b0_grid(f, conv, scratch, out);
  return out;
}

/// n offspring positions (z1 + z2)/2, parents drawn independently with
/// probability proportional to weight. Self-pairing is allowed.
template <class Rng>
std::vector<double> b0_sample(const ParticleEnsemble& p, std::size_t n, Rng& rng) {
  if (p.positions.empty()) throw DomainError("b0_sample on an empty ensemble");
  if (n == 0) throw DomainError("b0_sample needs n >= 1");
  std::discrete_distribution<std::size_t> pick(p.weights.begin(), p.weights.end());
  std::vector<double> out(n);
  for (auto& y : out) {
    const std::size_t a = pick(rng);
    const std::size_t b = pick(rng);
    y = 0.5 * (p.positions[a] + p.positions[b]);
  }
  return out;
}

/// Exact raw moments of B0[nu] from those of nu:
///   mu_k(B0 nu) = sum_j C(k,j) mu_j mu_{k-j} / (2^k mu_0).
inline std::vector<double> b0_moment_map(std::span<const double> mu) {
  if (mu.empty() || !(mu[0] > 0.0)) throw DomainError("b0_moment_map needs mu_0 > 0");
  std::vector<double> nu(mu.size());
  double pow2 = 1.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    double acc = 0.0, binom = 1.0;
    for (std::size_t j = 0; j <= k; ++j) {
      acc += binom * mu[j] * mu[k - j];
      binom = binom * static_cast<double>(k - j) / static_cast<double>(j + 1);
    }
    nu[k] = acc / (pow2 * mu[0]);
    pow2 *= 2.0;
  }
  return nu;
}

}  // namespace midsel
