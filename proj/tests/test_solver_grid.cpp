#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstring>

#include "midsel/profiles.hpp"
#include "midsel/solver_grid.hpp"

using namespace midsel;
using Catch::Approx;

namespace {

GridDensity gaussian(double mean, double var, std::size_t n = 1024, double sigmas = 12.0) {
  return discretize(InitialProfile{GaussianProfile{mean, var}, 1.0}, GridSpec{n, 0.0, 0.0, sigmas});
}

GridSolverConfig config(double dt, double t_end, int every = 10, int order = 4) {
  GridSolverConfig c;
  c.dt = dt;
  c.t_end = t_end;
  c.record_every = every;
  c.moment_order = order;
  return c;
}

}  // namespace

TEST_CASE("duhamel weight") {
  CHECK(duhamel_phi(0.0, 0.1) == 0.1);
  CHECK(duhamel_phi(1e-14, 0.1) == 0.1);
  CHECK(duhamel_phi(2.0, 0.1) == Approx((1 - std::exp(-0.2)) / 2.0).epsilon(1e-14));
  CHECK(duhamel_phi(-3.0, 0.1) == Approx((1 - std::exp(0.3)) / -3.0).epsilon(1e-14));
}

TEST_CASE("one step with m = 0 multiplies the mass by 1 + dt") {
  GridSolver s(SelectionRate::constant(0.0), gaussian(0.0, 1.0), config(0.01, 1.0));
  const double rho0 = s.density().mass();
  s.step();
  CHECK(s.density().mass() == Approx(rho0 * 1.01).epsilon(1e-13));
}

TEST_CASE("one step with constant m") {
  const double m0 = 0.7, dt = 0.05;
  GridSolver s(SelectionRate::constant(m0), gaussian(0.0, 1.0), config(dt, 1.0));
  const double rho0 = s.density().mass();
  s.step();
  CHECK(s.density().mass() == Approx(rho0 * (std::exp(-m0 * dt) + duhamel_phi(m0, dt))).epsilon(1e-13));
}

TEST_CASE("a single-node profile stays put and grows like e^{(1-m0)t}") {
  GridDensity f{-1.0, 0.25, std::vector<double>(9, 0.0)};
  f.values[5] = 4.0;  // x = 0.25
  const auto m = SelectionRate::quadratic(0.0, 0.0, 1.0);
  const double m0 = m(0.25);
  GridSolver s(m, f, config(1e-3, 2.0));
  const auto rows = s.run();
  for (std::size_t j = 0; j < f.size(); ++j)
    if (j != 5) CHECK(s.density().values[j] == 0.0);
  CHECK(rows.back().xbar == 0.25);
  CHECK(rows.back().rho == Approx(std::exp((1 - m0) * 2.0)).epsilon(1e-3));
}

TEST_CASE("T_end = 0 gives the initial row only") {
  GridSolver s(SelectionRate::constant(0.0), gaussian(0.0, 1.0), config(0.01, 0.0));
  const auto rows = s.run();
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].t == 0.0);
  CHECK(rows[0].rho == Approx(1.0));
}

TEST_CASE("constant m: recorded mass matches the exact exponential") {
  const double m0 = 0.3;
  GridSolver s(SelectionRate::constant(m0), gaussian(0.0, 1.0), config(1e-3, 2.0, 100));
  for (const auto& r : s.run()) CHECK(r.rho == Approx(std::exp((1 - m0) * r.t)).epsilon(1e-3));
}

TEST_CASE("m = 0: M2 approaches M2_0 e^{-t/2} under refinement") {
  double prev = 1.0;
  for (double dt : {0.02, 0.01, 0.005}) {
    GridSolver s(SelectionRate::constant(0.0), gaussian(0.0, 1.0, 4096), config(dt, 2.0, 1000));
    const auto rows = s.run();
    const double err = std::abs(rows.back().M[2] - std::exp(-1.0));
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 5e-3);
}

TEST_CASE("halving dt halves the change in M2(T)") {
  auto m2 = [](double dt) {
    GridSolver s(SelectionRate::constant(0.0), gaussian(0.0, 1.0, 2048), config(dt, 2.0, 100000));
    return s.run().back().M[2];
  };
  const double a = m2(0.02), b = m2(0.01), c = m2(0.005);
  CHECK((a - b) / (b - c) == Approx(2.0).margin(0.2));
}

TEST_CASE("restart is bitwise identical") {
  const auto m = SelectionRate::quadratic(0.0, 0.0, 1.0);
  const auto f0 = gaussian(0.5, 1e-2);
  GridSolver full(m, f0, config(0.01, 3.0));
  full.run();
  GridSolver first(m, f0, config(0.01, 1.3));
  first.run();
  GridSolver second(m, first.density(), config(0.01, 3.0), first.time());
  const auto rows = second.run();
  CHECK(rows.front().t == Approx(1.3));
  CHECK(std::memcmp(full.density().values.data(), second.density().values.data(),
                    sizeof(double) * full.density().size()) == 0);
}

TEST_CASE("positivity, moment growth and the S2 lower bound") {
  const auto m = SelectionRate::quadratic(0.1, -0.4, 1.0);
  const auto f0 = gaussian(0.8, 0.05, 2048);
  const double K = std::max(0.0, -m.infimum());
  const auto mu0 = raw_moments(f0, 8);
  GridSolver s(m, f0, config(0.01, 5.0, 10, 6));
  const auto rows = s.run({[&](double t, const GridDensity& f, MomentTrack&) {
    for (double v : f.values) REQUIRE(v >= 0.0);
    const auto mu = raw_moments(f, 8);
    for (int k = 0; k <= 8; k += 2) CHECK(mu[k] <= std::exp((K + 1) * t) * mu0[k] * (1 + 1e-6));
  }});
  for (const auto& r : rows) {
    CHECK(r.S[2] >= (eta(m, r.xbar) - 0.5) * r.M[2] - 1e-9);
    CHECK(r.M[4] >= r.M[2] * r.M[2] * (1 - 1e-12));
  }
}

TEST_CASE("non-polynomial rates record S by quadrature") {
  const auto m = SelectionRate::lipschitz_table({-5, 0, 5}, {2.0, 0.0, 1.0});
  GridSolver s(m, gaussian(0.2, 0.3), config(0.01, 0.5, 10, 4));
  const auto rows = s.run();
  const auto& r = rows.back();
  REQUIRE(r.S.size() == 5);
  double s0 = 0.0;
  for_each_atom(s.density(), [&](double x, double w) { s0 += w * (m(x) - m(r.xbar)); });
  CHECK(r.S[0] == Approx(s0 / r.rho).epsilon(1e-12));
}

TEST_CASE("bad configs and overflow") {
  const auto f0 = gaussian(0.0, 1.0);
  CHECK_THROWS_AS(GridSolver(SelectionRate::constant(0.0), f0, config(0.0, 1.0)), ConfigError);
  CHECK_THROWS_AS(GridSolver(SelectionRate::constant(0.0), f0, config(-0.1, 1.0)), ConfigError);
  auto bad = f0;
  bad.values[3] = std::nan("");
  CHECK_THROWS_AS(GridSolver(SelectionRate::constant(0.0), bad, config(0.1, 1.0)), ConfigError);

  // Net growth e^{800} per unit time overflows within a step or two.
  const auto boom = SelectionRate::lipschitz_table({-100, 100}, {-800, -800});
  GridSolver s(boom, f0, config(1.0, 10.0, 1));
  try {
    s.run();
    FAIL("expected an abort");
  } catch (const SolverAbort& e) {
    CHECK(e.time() > 0.0);
    CHECK(e.time() <= 10.0);
    CHECK(std::string(e.what()).find("t=") != std::string::npos);
  }
}
