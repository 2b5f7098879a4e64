#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "midsel/ensemble.hpp"
#include "midsel/moment_track.hpp"
#include "midsel/profiles.hpp"

using namespace midsel;
using Catch::Approx;

namespace {

GridDensity normal_grid(std::size_t n, double width = 12.0) {
  GridDensity g{-width, 2 * width / static_cast<double>(n - 1), std::vector<double>(n)};
  for (std::size_t j = 0; j < n; ++j) g.values[j] = std::exp(-0.5 * g.x(j) * g.x(j)) / std::sqrt(2 * std::numbers::pi);
  return g;
}

}  // namespace

TEST_CASE("raw moments of atoms") {
  auto mu = raw_moments(ParticleEnsemble::atoms({2.0}, {1.0}), 3);
  CHECK(mu == std::vector<double>{1, 2, 4, 8});
  mu = raw_moments(ParticleEnsemble::atoms({-1.0, 1.0}, {0.5, 0.5}), 3);
  CHECK(mu == std::vector<double>{1, 0, 1, 0});
  // Mass is carried separately from the normalised weights.
  mu = raw_moments(ParticleEnsemble::atoms({3.0}, {7.0}, 2.5), 1);
  CHECK(mu[0] == 2.5);
  CHECK(mu[1] == 7.5);
}

TEST_CASE("raw moments of a uniform grid density converge to 1/3") {
  // Cell-averaged uniform on [-1,1]: error is O(h^2) and shrinks 4x per halving.
  double prev = 0.0;
  for (std::size_t n : {101, 201, 401, 801}) {
    InitialProfile p{UniformProfile{-1, 1}, 1.0};
    GridSpec spec{n, -1.2, 1.2, 12};
    const auto mu = raw_moments(discretize(p, spec), 2);
    CHECK(mu[0] == Approx(1.0).epsilon(1e-14));
    const double err = std::abs(mu[2] - 1.0 / 3.0);
    CHECK(err < 1e-3);
    if (prev > 0.0 && err > 1e-12) CHECK(prev / err > 3.0);
    prev = err;
  }
}

TEST_CASE("empty states are refused") {
  CHECK_THROWS_AS(raw_moments(GridDensity{0.0, 1.0, {}}, 2), DomainError);
  CHECK_THROWS_AS(raw_moments(ParticleEnsemble{}, 2), DomainError);
  CHECK_THROWS_AS(raw_moments(ParticleEnsemble::atoms({1.0}, {1.0}), -1), DomainError);
}

TEST_CASE("centered stats") {
  auto s = centered_stats(ParticleEnsemble::atoms({-1.0, 1.0}, {1.0, 1.0}), 4);
  CHECK(s.xbar == 0.0);
  CHECK(s.M[2] == 1.0);
  CHECK(s.M[3] == 0.0);
  CHECK(s.M[4] == 1.0);

  s = centered_stats(ParticleEnsemble::atoms({3.3}, {1.0}), 6);
  for (int k = 2; k <= 6; ++k) CHECK(s.M[k] == 0.0);

  const auto g = centered_stats(normal_grid(4001), 4);
  CHECK(g.M[2] == Approx(1.0).epsilon(1e-10));
  CHECK(g.M[4] == Approx(3.0).epsilon(1e-10));
  CHECK(std::abs(g.xbar) < 1e-14);

  GridDensity zero{0.0, 1.0, {0.0, 0.0, 0.0}};
  CHECK_THROWS_AS(centered_stats(zero, 2), DegenerateState);
}

TEST_CASE("centered stats agree with binomial expansion of raw moments") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(1.5, 0.8);
  std::uniform_real_distribution<double> U(0.1, 1.0);
  std::vector<double> x(500), w(500);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = N(rng), w[i] = U(rng);
  const auto e = ParticleEnsemble::atoms(x, w, 3.0);
  const auto mu = raw_moments(e, 6);
  const auto st = centered_stats(e, 6);
  const double xb = mu[1] / mu[0];
  for (int k = 2; k <= 6; ++k) {
    double acc = 0.0;
    for (int j = 0; j <= k; ++j) {
      double binom = 1.0;
      for (int i = 0; i < j; ++i) binom = binom * (k - i) / (i + 1);
      acc += binom * mu[j] / mu[0] * std::pow(-xb, k - j);
    }
    CHECK(st.M[k] == Approx(acc).epsilon(1e-10));
  }
}

TEST_CASE("cauchy-schwarz chain on random states") {
  std::mt19937_64 rng(8);
  std::exponential_distribution<double> E(1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(200), w(200, 1.0);
    for (double& v : x) v = E(rng) - E(rng) * trial * 0.1;
    const auto st = centered_stats(ParticleEnsemble::atoms(x, w), 4);
    CHECK(std::abs(st.M[3]) <= std::sqrt(st.M[2] * st.M[4]) * (1 + 1e-12));
    CHECK(st.M[2] <= std::sqrt(st.M[4]) * (1 + 1e-12));
  }
}

TEST_CASE("characteristic function") {
  const auto e = ParticleEnsemble::atoms({-1.3, 0.4, 2.0}, {1, 2, 3});
  CHECK(char_fn(e, 0.0) == std::complex<double>(1.0, 0.0));
  const auto a = char_fn(ParticleEnsemble::atoms({0.7}, {1}), 2.0);
  CHECK(a.real() == Approx(std::cos(1.4)));
  CHECK(a.imag() == Approx(-std::sin(1.4)));
  const auto sym = ParticleEnsemble::atoms({-2.0, -0.5, 0.5, 2.0}, {1, 3, 3, 1});
  for (double xi : {0.1, 1.0, 7.0}) CHECK(std::abs(char_fn(sym, xi).imag()) < 1e-12);
  for (double xi : {0.3, 5.0}) CHECK(std::abs(char_fn(e, xi)) <= 1.0 + 1e-15);

  // Grid of N(0,1): transform exp(-xi^2/2).
  const auto g = normal_grid(4001);
  for (double xi : {0.5, 1.0, 2.0}) CHECK(char_fn(g, xi).real() == Approx(std::exp(-0.5 * xi * xi)).margin(1e-10));
}

TEST_CASE("standardized states have the right derivatives at zero") {
  std::mt19937_64 rng(9);
  std::gamma_distribution<double> G(2.0, 1.5);
  std::vector<double> x(1000), w(1000, 1.0);
  for (double& v : x) v = G(rng);
  const auto s = standardize(ParticleEnsemble::atoms(x, w, 4.0)).state;
  const double h = 1e-4;
  const auto c0 = char_fn(s, 0.0), cp = char_fn(s, h), cm = char_fn(s, -h);
  CHECK(std::abs(c0 - 1.0) < 1e-15);
  CHECK(std::abs((cp - cm) / (2 * h)) < 1e-6);
  CHECK(std::abs((cp - 2.0 * c0 + cm) / (h * h) + 1.0) < 1e-6);
  CHECK(std::abs(char_fn_derivative(s, 0.0)) < 1e-12);
}

TEST_CASE("characteristic function remainder avoids cancellation") {
  const auto e = standardize(ParticleEnsemble::atoms({-1.0, 0.0, 3.0}, {1, 1, 1})).state;
  for (double xi : {1e-3, 0.05, 0.7, 3.0}) {
    const auto full = char_fn(e, xi) - (1.0 - 0.5 * xi * xi);
    const auto rem = char_fn_remainder(e, xi);
    CHECK(std::abs(rem - full) < 1e-12);
  }
  // The remainder is O(xi^3): at 1e-6 the plain difference is pure roundoff.
  CHECK(std::abs(char_fn_remainder(e, 1e-6)) < 1e-17);
}

TEST_CASE("standardize") {
  auto s = standardize(ParticleEnsemble::atoms({-1.0, 1.0}, {1, 1}));
  CHECK(s.state.positions == std::vector<double>{-1.0, 1.0});
  s = standardize(ParticleEnsemble::atoms({0.0, 2.0}, {1, 1}));
  CHECK(s.state.positions == std::vector<double>{-1.0, 1.0});
  CHECK(s.xbar == 1.0);
  CHECK(s.M2 == 1.0);
  CHECK_THROWS_AS(standardize(ParticleEnsemble::atoms({2.0, 2.0}, {1, 1})), ConcentrationError);

  GridDensity g{-3.0, 0.01, std::vector<double>(601)};
  for (std::size_t j = 0; j < g.size(); ++j) g.values[j] = 5.0 * std::exp(-std::abs(g.x(j) - 0.4));
  const auto once = standardize(g);
  const auto st = centered_stats(once.state, 2);
  CHECK(st.rho == Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(st.xbar) < 1e-13);
  CHECK(st.M[2] == Approx(1.0).epsilon(1e-13));
  const auto twice = standardize(once.state);
  CHECK(twice.state.h == Approx(once.state.h).epsilon(1e-13));
  CHECK(twice.state.x_min == Approx(once.state.x_min).epsilon(1e-13));
  CHECK(twice.M2 == Approx(1.0).epsilon(1e-13));
}

TEST_CASE("moment track CSV schema") {
  MomentTrack r;
  r.t = 0.5;
  r.rho = 1.25;
  r.xbar = -0.1;
  r.M = {1, 0, 0.3, 0.01, 0.2};
  r.S = {0.3, 0.0, 0.2, 0.0, 0.1};
  r.set_extra("d_s", 0.125);
  const auto h = csv_header(r);
  CHECK(h == std::vector<std::string>{"t", "rho", "xbar", "M2", "M3", "M4", "S0", "S1", "S2", "S3", "S4", "d_s"});
  std::stringstream ss;
  write_csv(ss, {r, r});
  const auto table = read_csv(ss);
  CHECK(table.columns == h);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.column("M4")[1] == 0.2);
  CHECK(table.column("d_s")[0] == 0.125);
  CHECK(table.column("t")[0] == 0.5);
  // Shortest round-trip formatting with '.' decimals.
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1e-20) == "1e-20");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}
