#include <catch_amalgamated.hpp>

#include <cmath>

#include "midsel/hierarchy.hpp"
#include "midsel/metrics.hpp"
#include "midsel/solver_fourier.hpp"

using namespace midsel;
using Catch::Approx;

namespace {

cplx uniform_cf(double xi) {
  const double y = std::sqrt(3.0) * xi;
  return y == 0.0 ? 1.0 : std::sin(y) / y;
}

}  // namespace

TEST_CASE("closed-form remainders near zero follow their leading terms") {
  for (double a : {1e-4, 1e-3, 1e-2}) {
    CHECK(gamma_inf_remainder(a) == Approx(a * a * a / 3 - a * a * a * a / 8 + std::pow(a, 5) / 30 - std::pow(a, 6) / 144).epsilon(1e-8));
    CHECK(gamma_inf_remainder(-a) == gamma_inf_remainder(a));
    const double y = std::sqrt(3.0) * a;
    CHECK(uniform_unit_remainder(a) == Approx(std::pow(y, 4) / 120 - std::pow(y, 6) / 5040).epsilon(1e-8));
    CHECK(gaussian_unit_remainder(a) == Approx(std::pow(a, 4) / 8 - std::pow(a, 6) / 48).epsilon(1e-8));
  }
  // Series and closed-form branches meet continuously.
  for (double x : {0.4999, 0.5001, 0.2886, 0.2887, 0.99, 1.01}) {
    CHECK(gamma_inf_remainder(x) == Approx(gamma_inf_cf(x) - 1 + 0.5 * x * x).epsilon(1e-9));
    CHECK(uniform_unit_remainder(x) == Approx(uniform_cf(x).real() - 1 + 0.5 * x * x).epsilon(1e-9));
    CHECK(gaussian_unit_remainder(x) == Approx(std::exp(-0.5 * x * x) - 1 + 0.5 * x * x).epsilon(1e-9));
  }
}

TEST_CASE("stationarity residual examples") {
  std::vector<double> xis;
  for (int i = 0; i <= 4000; ++i) xis.push_back(-50.0 + 0.025 * i);
  const double analytic = stationarity_residual([](double x) { return cplx(gamma_inf_cf(x)); },
                                                [](double x) { return cplx(gamma_inf_cf_derivative(x)); }, xis);
  CHECK(analytic <= 1e-12);

  const auto grid = SpectralState::sample([](double x) { return cplx(gamma_inf_cf(x)); }, 64.0, 4096);
  CHECK(stationarity_residual(grid) <= 1e-5);

  const auto normal = SpectralState::sample([](double x) { return cplx(std::exp(-0.5 * x * x)); }, 64.0, 4096);
  CHECK(stationarity_residual(normal) > 1e-2);
  const std::vector<double> one = {1.0};
  CHECK(stationarity_residual([](double x) { return cplx(std::exp(-0.5 * x * x)); },
                              [](double x) { return cplx(-x * std::exp(-0.5 * x * x)); }, one) > 1e-2);
}

TEST_CASE("uniform-grid stepper keeps gamma_inf nearly fixed") {
  auto s = SpectralState::sample([](double x) { return cplx(gamma_inf_cf(x)); });
  const auto s0 = s;
  for (int i = 0; i < 100; ++i) {
    spectral_step(s, 0.1);
    REQUIRE(s.values[0] == cplx(1.0, 0.0));
  }
  double drift = 0.0;
  for (std::size_t j = 0; j < s.values.size(); ++j) drift = std::max(drift, std::abs(s.values[j] - s0.values[j]));
  CHECK(drift <= 1e-4 * s.t);
  CHECK(s.t == Approx(10.0));
}

TEST_CASE("uniform-grid stepper keeps symmetric laws real and bounded") {
  auto s = SpectralState::sample([](double x) { return cplx(std::cos(x)); });
  for (int i = 0; i < 40; ++i) spectral_step(s, 0.05);
  for (const auto& v : s.values) {
    CHECK(v.imag() == 0.0);
    CHECK(std::abs(v) <= 1.0 + 1e-9);
  }
  CHECK(s.values[0] == cplx(1.0, 0.0));
  CHECK_THROWS_AS(spectral_step(s, 0.2), ConfigError);
  CHECK_THROWS_AS(spectral_step(s, 0.0), ConfigError);
}

TEST_CASE("lattice keeps gamma_inf fixed") {
  auto L = LatticeSpectralSolver::from_real(gamma_inf_remainder);
  while (L.time() < 20.0) {
    L.step();
    // Floor from treating r as zero below xi_min; far below any d_s we track.
    REQUIRE(L.distance_to_gamma_inf(2.5).value < 1e-5);
  }
  CHECK(L.variance_readout() == Approx(1.0).margin(1e-9));
  CHECK(L.residual() < 1e-4);
}

TEST_CASE("lattice and uniform-grid steppers agree") {
  auto L = LatticeSpectralSolver::from_real(uniform_unit_remainder);
  while (L.time() < 2.0) L.step();
  auto S = SpectralState::sample(uniform_cf);
  const int n = static_cast<int>(std::lround(L.time() / 0.01));
  for (int i = 0; i < n; ++i) spectral_step(S, L.time() / n);
  double worst = 0.0;
  for (std::size_t j = 0; j < L.xi().size(); ++j) {
    const double x = L.xi()[j];
    if (x < 0.01 || x > 30.0) continue;
    worst = std::max(worst, std::abs(detail::cubic_at(S.values, x / S.h()) - L.value(j)));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("lattice d_s matches the analytic distance at t = 0") {
  const auto L = LatticeSpectralSolver::from_real(uniform_unit_remainder);
  const auto lat = L.distance_to_gamma_inf(2.5);
  const auto ref = fourier_distance(uniform_cf, [](double x) { return cplx(gamma_inf_cf(x)); }, 2.5);
  CHECK(lat.value == Approx(ref.value).epsilon(1e-6));
  CHECK(lat.argmax == Approx(std::abs(ref.argmax)).epsilon(1e-3));
}

TEST_CASE("uniform start contracts at least at rate lambda_s") {
  auto L = LatticeSpectralSolver::from_real(uniform_unit_remainder);
  const auto rows = L.run(30.0, 4, 2.5);
  const double d0 = *rows.front().extra("d_s"), lam = lambda_s(2.5);
  for (const auto& r : rows) {
    CHECK(*r.extra("d_s") <= 1.1 * d0 * std::exp(-lam * r.t));
    CHECK(r.M[2] == Approx(1.0).margin(1e-3));
    CHECK(r.extra("residual").has_value());
  }
  CHECK(rows.back().t >= 30.0);
}

TEST_CASE("lattice config validation") {
  LatticeConfig c;
  c.xi_min = 0.0;
  CHECK_THROWS_AS(LatticeSpectralSolver::from_real(gamma_inf_remainder, c), ConfigError);
  c = {};
  c.per_octave = 2;
  CHECK_THROWS_AS(LatticeSpectralSolver::from_real(gamma_inf_remainder, c), ConfigError);
  c = {};
  CHECK(LatticeSpectralSolver::from_real(gamma_inf_remainder, c).dt() == Approx(4 * std::log(2.0) / 64));
}
