#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "midsel/hierarchy.hpp"
#include "midsel/profiles.hpp"
#include "midsel/solver_grid.hpp"

using namespace midsel;
using Catch::Approx;

namespace {

MomentODEState gaussian_state(double xbar, double var, int K, Closure c = Closure::gaussian) {
  MomentODEState s;
  s.xbar = xbar;
  s.closure = c;
  s.M.assign(static_cast<std::size_t>(K) + 1, 0.0);
  s.M[0] = 1.0;
  for (int k = 2; k <= K; k += 2) s.M[k] = double_factorial(k - 1) * std::pow(var, k / 2);
  return s;
}

}  // namespace

TEST_CASE("double factorial and closures") {
  CHECK(double_factorial(-1) == 1.0);
  CHECK(double_factorial(7) == 105.0);
  CHECK(double_factorial(8) == 384.0);
  auto s = gaussian_state(0.0, 2.0, 4);
  auto ext = closed_moments(s);
  CHECK(ext.size() == 7);
  CHECK(ext[5] == 0.0);
  CHECK(ext[6] == 15.0 * 8.0);
  s.closure = Closure::zero;
  ext = closed_moments(s);
  CHECK(ext[5] == 0.0);
  CHECK(ext[6] == 0.0);
}

TEST_CASE("rhs examples") {
  const auto c = rhs(gaussian_state(0.3, 1.0, 8), SelectionRate::constant(2.0));
  CHECK(c.dM[2] == Approx(-0.5).margin(1e-15));
  CHECK(c.dxbar == 0.0);

  MomentODEState s;
  s.M = {1, 0, 1, 0, 3};
  const auto q = rhs(s, SelectionRate::quadratic(0, 0, 1));
  CHECK(q.dM[2] == Approx(-2.5).margin(1e-15));
  CHECK(q.dxbar == 0.0);

  // Symmetric moments with m even about xbar: no drift.
  MomentODEState sym = gaussian_state(1.5, 0.4, 6);
  sym.M[4] = 1.0;
  CHECK(rhs(sym, SelectionRate::quadratic(2.25, -3.0, 1.0)).dxbar == Approx(0.0).margin(1e-15));
}

TEST_CASE("rhs refuses non-polynomial rates and bad orders") {
  CHECK_THROWS_AS(rhs(gaussian_state(0, 1, 4), SelectionRate::lipschitz_table({0, 1}, {0, 1})), UnsupportedOperation);
  CHECK_THROWS_AS(rhs(gaussian_state(0, 1, 5), SelectionRate::constant(0)), DomainError);
  CHECK_THROWS_AS(rhs(gaussian_state(0, 1, 2), SelectionRate::constant(0)), DomainError);
}

TEST_CASE("constant m integrates to e^{-t/2}") {
  const auto rows = integrate(gaussian_state(0.0, 1.0, 8), SelectionRate::constant(0.4), 1e-3, 4.0, 500);
  CHECK(rows.back().t == Approx(4.0));
  CHECK(rows.back().M[2] == Approx(std::exp(-2.0)).margin(1e-6));
  CHECK(std::isnan(rows.back().rho));
}

TEST_CASE("T = 0 gives one row") {
  const auto rows = integrate(gaussian_state(0.0, 1.0, 4), SelectionRate::constant(0.0), 1e-2, 0.0);
  CHECK(rows.size() == 1);
  CHECK_THROWS_AS(integrate(gaussian_state(0.0, 1.0, 4), SelectionRate::constant(0.0), 0.0, 1.0), ConfigError);
}

TEST_CASE("closure breakdown is reported") {
  MomentODEState s;
  s.M = {1, 0, 1, 0, 1};  // two-atom moments sit on M4 = M2^2
  try {
    integrate(s, SelectionRate::quadratic(0, 0, 1), 1e-3, 1.0);
    FAIL("expected a closure breakdown");
  } catch (const SolverAbort& e) {
    CHECK(std::string(e.what()).find("closure breakdown") != std::string::npos);
    CHECK(e.time() > 0.0);
  }
}

TEST_CASE("quadratic hierarchy matches the grid solver on [0, 10]") {
  const auto m = SelectionRate::quadratic(0, 0, 1);
  GridSolverConfig c;
  c.dt = 1e-3;
  c.t_end = 10.0;
  c.record_every = 500;
  c.moment_order = 8;
  const auto grid = GridSolver(m, discretize(InitialProfile{GaussianProfile{0.5, 1e-3}, 1.0}, GridSpec{4096, 0, 0, 8}), c).run();
  const auto hier = integrate(gaussian_state(0.5, 1e-3, 8), m, 1e-3, 10.0, 500);
  REQUIRE(grid.size() == hier.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(hier[i].t == Approx(grid[i].t));
    CHECK(hier[i].M[2] == Approx(grid[i].M[2]).epsilon(1e-2));
    CHECK(hier[i].M[4] == Approx(grid[i].M[4]).epsilon(1e-2));
    CHECK(hier[i].xbar == Approx(grid[i].xbar).margin(1e-5));
  }
}

TEST_CASE("envelope examples") {
  const auto d = envelope(DiracStabilityEnvelope{0.2, 1e-2, 0.25});
  CHECK(d(5.0) == Approx(1e-2 * std::exp(-1.0)).epsilon(1e-15));
  CHECK(d(0.0) == 1e-2);

  const double lam = lambda_s(2.5);
  const auto ds = envelope(DsEnvelope{0.3, lam, 0.01, 0.5});
  CHECK(ds(0.0) == Approx(0.3).epsilon(1e-15));
  const auto same = envelope(DsEnvelope{0.3, lam, 0.01, lam});
  CHECK(same(0.0) == 0.3);

  // (d0 + L t) e^{-lambda t} peaks at 1/lambda - d0/L.
  const double d0 = 0.05, L = 0.02;
  const auto peak = envelope(DsEnvelope{d0, lam, L, lam});
  const double tstar = 1.0 / lam - d0 / L;
  REQUIRE(tstar > 0.0);
  CHECK(peak(tstar) > peak(0.0));
  CHECK(peak(tstar) > peak(tstar - 1.0));
  CHECK(peak(tstar) > peak(tstar + 1.0));
  CHECK(peak(tstar + 200.0) < peak(tstar));

  CHECK(envelope(M2LowerEnvelope{0.5, 1e-3, 3, 0.2})(2.0) == Approx(0.5e-3 * std::exp(-1.0)));
  CHECK(envelope(ImprovedRateEnvelope{0.3, 2.0, 1, 3, 0.2})(1.0) == Approx(2.0 * std::exp(-0.3)));
  CHECK(std::string(envelope_kind(EnvelopeSpec{M2LowerEnvelope{}})) == "m2_lower");
}

TEST_CASE("envelope hypotheses are enforced") {
  CHECK_THROWS_AS(envelope(DiracStabilityEnvelope{0.3, 1e-2, 0.25}), HypothesisViolation);
  CHECK_THROWS_AS(envelope(DiracStabilityEnvelope{0.0, 1e-2, 0.25}), HypothesisViolation);
  // lambda < min(1 - 2^{1-2k}, 1/2 - 2^{1-2k0} + delta) = min(0.5, 0.66875)
  CHECK_NOTHROW(envelope(ImprovedRateEnvelope{0.49, 1.0, 1, 3, 0.2}));
  CHECK_THROWS_AS(envelope(ImprovedRateEnvelope{0.51, 1.0, 1, 3, 0.2}), HypothesisViolation);
  // 2^{1-2k0} < delta: 1/32 < 0.2 passes, 1/8 < 0.1 fails.
  CHECK_NOTHROW(envelope(M2LowerEnvelope{0.5, 1e-3, 3, 0.2}));
  CHECK_THROWS_AS(envelope(M2LowerEnvelope{0.5, 1e-3, 2, 0.1}), HypothesisViolation);
  CHECK_THROWS_AS(envelope(DsEnvelope{0.1, 0.0, 0.0, 0.1}), HypothesisViolation);
}

TEST_CASE("lambda_s") {
  CHECK(lambda_s(2.0) == 0.0);
  CHECK(lambda_s(3.0) == 0.0);
  CHECK(lambda_s(2.5) == Approx(0.0214466).margin(1e-7));
  // Positive inside, and 2.5 is close to the maximiser found by a scan.
  double best = 0.0, arg = 0.0;
  for (int i = 1; i < 10000; ++i) {
    const double s = 2.0 + i * 1e-4, v = lambda_s(s);
    CHECK(v > 0.0);
    if (v > best) best = v, arg = s;
  }
  CHECK(arg == Approx(1.0 + std::log2(4.0 * std::log(2.0))).margin(1e-3));
  CHECK(best >= lambda_s(2.5));
  CHECK_THROWS_AS(lambda_s(1.9), DomainError);
  CHECK_THROWS_AS(lambda_s(3.1), DomainError);
}

TEST_CASE("r_bound examples") {
  CHECK(r_bound(2, 0, 0, 1.0, 3.0, std::nullopt, 0.7) == 0.0);
  CHECK(r_bound(3, 0, 0, 1.0, 3.0, 15.0, 0.7) == 0.0);
  CHECK(r_bound(2, 1, 0, 1.0, 4.0, std::nullopt, 1.0) == Approx(5.0));
  CHECK(r_bound(2, 1, 0, 1.0, 4.0, std::nullopt, -1.0) == Approx(5.0));
  CHECK_THROWS_AS(r_bound(3, 1, 1, 1.0, 3.0, std::nullopt, 1.0), ArityError);
  CHECK_THROWS_AS(r_bound(2, 1, 1, 0.0, 3.0, std::nullopt, 1.0), DomainError);
  CHECK_THROWS_AS(r_bound(4, 1, 1, 1.0, 3.0, 15.0, 1.0), DomainError);
}

TEST_CASE("cubic bound: Cauchy-Schwarz step on random densities") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    GridDensity g{-3.0, 6.0 / 599, std::vector<double>(600)};
    for (double& v : g.values) v = U(rng) < 0.3 ? U(rng) : 0.0;
    const auto st = centered_stats(g, 6);
    const double M2 = st.M[2], M4 = st.M[4], M6 = st.M[6];
    CHECK(M4 * M4 <= M2 * M6 * (1 + 1e-12));
    // beta sqrt(M4 M6) / M2^{3/2} dominates beta M4^{3/2} / M2^2.
    const double bound = r_bound(3, 0.0, 1.0, M2, M4, M6, 1.0);
    CHECK(bound >= std::pow(M4, 1.5) / (M2 * M2) * (1 - 1e-12));
  }
}
