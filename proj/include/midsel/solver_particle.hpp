#pragma once
// Weighted-particle solver for the same dynamics. Selection acts on weights
// deterministically; births add a fixed number of atoms per step placed by
// sampling B0; systematic resampling keeps the ensemble size bounded.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "midsel/collision.hpp"
#include "midsel/ensemble.hpp"
#include "midsel/error.hpp"
#include "midsel/moment_track.hpp"
#include "midsel/selection.hpp"
#include "midsel/solver_grid.hpp"

namespace midsel {

/// Sum w / max w.
inline double effective_sample_size(const std::vector<double>& w) {
  if (w.empty()) return 0.0;
  const double mx = *std::max_element(w.begin(), w.end());
  if (!(mx > 0.0)) return 0.0;
  return std::accumulate(w.begin(), w.end(), 0.0) / mx;
}

/// Systematic resampling to n equally weighted atoms; the mass is untouched.
template <class Rng>
void resample(ParticleEnsemble& e, std::size_t n, Rng& rng) {
  if (e.positions.empty()) throw DomainError("resample on an empty ensemble");
  if (n == 0) throw DomainError("resample to zero atoms");
  const double total = std::accumulate(e.weights.begin(), e.weights.end(), 0.0);
  if (!(total > 0.0)) throw DegenerateState("resample with zero total weight");
  const double stride = total / static_cast<double>(n);
  std::uniform_real_distribution<double> U(0.0, stride);
  double u = U(rng);
  std::vector<double> out;
  out.reserve(n);
  double cum = e.weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double target = u + static_cast<double>(i) * stride;
    while (cum <= target && j + 1 < e.positions.size()) cum += e.weights[++j];
    out.push_back(e.positions[j]);
  }
  e.positions = std::move(out);
  e.weights.assign(n, 1.0 / static_cast<double>(n));
}

template <class Rng>
void resample(ParticleEnsemble& e, Rng& rng) {
  resample(e, e.positions.size(), rng);
}

struct ParticleSolverConfig {
  double dt = 1e-2;
  double t_end = 1.0;
  std::size_t n_target = 100000;
  int record_every = 10;
  int moment_order = 8;
  std::uint64_t seed = 1;
  double count_factor = 2.0;  // resample when size > count_factor * n_target
  double ess_factor = 0.5;    // or when ESS < ess_factor * n_target
};

using ParticleObserver = std::function<void(double t, const ParticleEnsemble&, MomentTrack&)>;

class ParticleSolver {
 public:
  ParticleSolver(SelectionRate m, ParticleEnsemble e0, ParticleSolverConfig cfg)
      : m_(std::move(m)), e_(std::move(e0)), cfg_(cfg), rng_(cfg.seed) {
    if (!(cfg_.dt > 0.0)) throw ConfigError("particle solver needs dt > 0");
    // Newborn mass per step is rho dt; keep it a small fraction of rho.
    if (cfg_.dt > 0.2) throw ConfigError("particle solver needs dt <= 0.2 (newborn mass per step <= 0.2 rho)");
    if (cfg_.n_target == 0) throw ConfigError("n_target must be positive");
    if (cfg_.record_every < 1) throw ConfigError("record_every must be >= 1");
    detail::require_nonempty(e_);
    if (!(e_.mass > 0.0)) throw ConfigError("initial ensemble mass must be positive");
    e_.seed = cfg_.seed;
    e_.normalize();
  }

  double time() const noexcept { return static_cast<double>(steps_) * cfg_.dt; }
  const ParticleEnsemble& ensemble() const noexcept { return e_; }

  void step() {
    const double dt = cfg_.dt;
    const double rho = e_.mass;
    const std::size_t nb = static_cast<std::size_t>(std::ceil(static_cast<double>(cfg_.n_target) * dt));
    // Parents are the pre-selection population.
    auto kids = b0_sample(e_, nb, rng_);

    std::vector<double> mass(e_.size() + nb);
    for (std::size_t j = 0; j < e_.size(); ++j) mass[j] = rho * e_.weights[j] * std::exp(-m_(e_.positions[j]) * dt);
    const double share = rho / static_cast<double>(nb);
    for (std::size_t i = 0; i < nb; ++i) mass[e_.size() + i] = share * duhamel_phi(m_(kids[i]), dt);

    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    if (!(total > 0.0) || !std::isfinite(total))
      throw SolverAbort(time() + dt, "particle weights underflowed (extinction), total mass " + std::to_string(total));
    e_.positions.insert(e_.positions.end(), kids.begin(), kids.end());
    e_.weights = std::move(mass);
    for (double& w : e_.weights) w /= total;
    e_.mass = total;
    ++steps_;

    if (static_cast<double>(e_.size()) > cfg_.count_factor * static_cast<double>(cfg_.n_target) ||
        effective_sample_size(e_.weights) < cfg_.ess_factor * static_cast<double>(cfg_.n_target)) {
      resample(e_, cfg_.n_target, rng_);
      ++resamples_;
    }
  }

  long long resamples() const noexcept { return resamples_; }

  MomentTrack record() const {
    auto row = make_row(time(), e_, m_, cfg_.moment_order);
    row.set_extra("seed", static_cast<double>(cfg_.seed));
    row.set_extra("ess", effective_sample_size(e_.weights));
    return row;
  }

  std::vector<MomentTrack> run(const std::vector<ParticleObserver>& observers = {}) {
    std::vector<MomentTrack> rows;
    const long long n = static_cast<long long>(std::ceil((cfg_.t_end - time()) / cfg_.dt - 1e-9));
    auto emit = [&] {
      rows.push_back(record());
      for (const auto& obs : observers) obs(rows.back().t, e_, rows.back());
    };
    emit();
    for (long long i = 0; i < n; ++i) {
      step();
      if ((i + 1) % cfg_.record_every == 0 || i + 1 == n) emit();
    }
    return rows;
  }

 private:
  SelectionRate m_;
  ParticleEnsemble e_;
  ParticleSolverConfig cfg_;
  std::mt19937_64 rng_;
  long long steps_ = 0;
  long long resamples_ = 0;
};

}  // namespace midsel
