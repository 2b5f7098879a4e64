#pragma once
// Closed moment ODEs for polynomial selection, and the closed-form decay
// envelopes the simulations are checked against.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "midsel/error.hpp"
#include "midsel/moment_track.hpp"
#include "midsel/selection.hpp"

namespace midsel {

enum class Closure { zero, gaussian };

struct MomentODEState {
  double t = 0.0;
  double xbar = 0.0;
  std::vector<double> M;  // M[0..K], M[0] = 1, M[1] = 0
  Closure closure = Closure::gaussian;

  int K() const noexcept { return static_cast<int>(M.size()) - 1; }
};

struct MomentODERates {
  double dxbar = 0.0;
  std::vector<double> dM;  // dM[k] for k = 0..K; entries 0 and 1 are zero
  std::vector<double> S;   // S_0..S_K used
};

inline double double_factorial(int n) {
  double r = 1.0;
  for (int i = n; i > 1; i -= 2) r *= i;
  return r;
}

/// M_0..M_{K+2} with the two top entries supplied by the closure.
inline std::vector<double> closed_moments(const MomentODEState& s) {
  const int K = s.K();
  std::vector<double> ext(s.M);
  ext.resize(static_cast<std::size_t>(K) + 3, 0.0);
  if (s.closure == Closure::gaussian) {
    // Gaussian central moments: odd ones vanish, M_{2n} = (2n-1)!! M_2^n.
    const int a = K + 1, b = K + 2;
    ext[a] = (a % 2) ? 0.0 : double_factorial(a - 1) * std::pow(s.M[2], a / 2);
    ext[b] = (b % 2) ? 0.0 : double_factorial(b - 1) * std::pow(s.M[2], b / 2);
  }
  ext[0] = 1.0;
  ext[1] = 0.0;
  return ext;
}

inline MomentODERates rhs(const MomentODEState& s, const SelectionRate& m) {
  if (!m.is_polynomial()) throw UnsupportedOperation("moment hierarchy needs a polynomial rate");
  const int K = s.K();
  if (K < 4 || K % 2) throw DomainError("moment hierarchy needs an even order K >= 4");
  const auto ext = closed_moments(s);
  MomentODERates out;
  out.S = s_closure(m, s.xbar, ext, K);
  out.dxbar = -out.S[1];
  out.dM.assign(static_cast<std::size_t>(K) + 1, 0.0);
  std::vector<double> binom(static_cast<std::size_t>(K) + 1);
  for (int k = 2; k <= K; ++k) {
    // C(k, i)
    binom[0] = 1.0;
    for (int i = 1; i <= k; ++i) binom[i] = binom[i - 1] * (k - i + 1) / i;
    double mix = 0.0;
    for (int i = 2; i <= k - 2; ++i) mix += binom[i] * ext[k - i] * ext[i];
    out.dM[k] = -(1.0 - std::ldexp(1.0, 1 - k)) * ext[k] + std::ldexp(mix, -k) - out.S[k] + out.S[0] * ext[k] +
                k * out.S[1] * ext[k - 1];
  }
  return out;
}

inline MomentTrack to_row(const MomentODEState& s, const std::vector<double>& S) {
  MomentTrack row;
  row.t = s.t;
  row.rho = std::nan("");
  row.xbar = s.xbar;
  row.M = s.M;
  row.S = S;
  return row;
}

/// Classical RK4. Rows every record_every steps and at the end; rho is not
/// part of the closed system and is written as nan.
inline std::vector<MomentTrack> integrate(MomentODEState s, const SelectionRate& m, double dt, double T,
                                          int record_every = 1) {
  if (!(dt > 0.0)) throw ConfigError("hierarchy integration needs dt > 0");
  if (record_every < 1) throw ConfigError("record_every must be >= 1");
  std::vector<MomentTrack> rows;
  rows.push_back(to_row(s, rhs(s, m).S));
  const long long n = static_cast<long long>(std::ceil(T / dt - 1e-9));
  const double t0 = s.t;
  auto axpy = [](const MomentODEState& base, const MomentODERates& k, double h) {
    MomentODEState o = base;
    o.xbar += h * k.dxbar;
    for (std::size_t i = 2; i < o.M.size(); ++i) o.M[i] += h * k.dM[i];
    return o;
  };
  for (long long i = 0; i < n; ++i) {
    const auto k1 = rhs(s, m);
    const auto k2 = rhs(axpy(s, k1, 0.5 * dt), m);
    const auto k3 = rhs(axpy(s, k2, 0.5 * dt), m);
    const auto k4 = rhs(axpy(s, k3, dt), m);
    s.xbar += dt / 6.0 * (k1.dxbar + 2 * k2.dxbar + 2 * k3.dxbar + k4.dxbar);
    for (std::size_t j = 2; j < s.M.size(); ++j) s.M[j] += dt / 6.0 * (k1.dM[j] + 2 * k2.dM[j] + 2 * k3.dM[j] + k4.dM[j]);
    s.t = t0 + static_cast<double>(i + 1) * dt;
    for (double v : s.M)
      if (!std::isfinite(v)) throw SolverAbort(s.t, "non-finite moment in hierarchy integration");
    if (s.K() >= 4 && s.M[4] < s.M[2] * s.M[2] * (1.0 - 1e-6))
      throw SolverAbort(s.t, "closure breakdown: M4 = " + format_number(s.M[4]) + " < M2^2 = " +
                                 format_number(s.M[2] * s.M[2]));
    if ((i + 1) % record_every == 0 || i + 1 == n) rows.push_back(to_row(s, rhs(s, m).S));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Envelopes.

/// Concentration around a Dirac mass: M(t) <= M0 e^{-delta t},
/// valid for 0 < delta < eta(xbar0).
struct DiracStabilityEnvelope {
  double delta = 0.0;
  double M0 = 0.0;
  double eta_xbar0 = 0.0;
};

/// M_{2k}(t) <= C e^{-lambda t} for
/// lambda < min(1 - 2^{1-2k}, 1/2 - 2^{1-2k0} + delta).
struct ImprovedRateEnvelope {
  double lambda = 0.0;
  double C = 1.0;  // calibration
  int k = 1;
  int k0 = 2;
  double delta = 0.0;
};

/// M2(t) >= C M2(0) e^{-t/2}, needing 2^{1-2k0} < delta.
struct M2LowerEnvelope {
  double C = 0.5;  // calibration
  double M2_0 = 0.0;
  int k0 = 3;
  double delta = 0.0;
};

/// d_s(t) <= d0 e^{-lambda t} + L (e^{-c t} - e^{-lambda t}) / (lambda - c),
/// and (d0 + L t) e^{-lambda t} when c = lambda.
struct DsEnvelope {
  double d0 = 0.0;
  double lambda = 0.0;
  double L = 0.0;
  double c = 0.0;
};

using EnvelopeSpec = std::variant<DiracStabilityEnvelope, ImprovedRateEnvelope, M2LowerEnvelope, DsEnvelope>;

inline const char* envelope_kind(const EnvelopeSpec& s) {
  static constexpr const char* names[] = {"dirac_stability", "improved_rate", "m2_lower", "ds_bound"};
  return names[s.index()];
}

/// Checks the envelope hypotheses and returns t -> bound.
inline std::function<double(double)> envelope(const EnvelopeSpec& spec) {
  auto fail = [](const std::string& what) { throw HypothesisViolation(what); };
  return std::visit(
      [&](const auto& e) -> std::function<double(double)> {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, DiracStabilityEnvelope>) {
          if (!(e.delta > 0.0)) fail("dirac stability needs delta > 0, got " + format_number(e.delta));
          if (!(e.delta < e.eta_xbar0))
            fail("dirac stability needs delta < eta(xbar0): delta = " + format_number(e.delta) +
                 ", eta(xbar0) = " + format_number(e.eta_xbar0));
          if (!(e.M0 >= 0.0)) fail("dirac stability needs M0 >= 0");
          return [e](double t) { return e.M0 * std::exp(-e.delta * t); };
        } else if constexpr (std::is_same_v<T, ImprovedRateEnvelope>) {
          if (e.k < 1 || e.k0 < 2) fail("improved rate needs k >= 1 and k0 >= 2");
          const double cap = std::min(1.0 - std::ldexp(1.0, 1 - 2 * e.k), 0.5 - std::ldexp(1.0, 1 - 2 * e.k0) + e.delta);
          if (!(e.lambda > 0.0) || !(e.lambda < cap))
            fail("improved rate needs 0 < lambda < " + format_number(cap) + ", got " + format_number(e.lambda));
          return [e](double t) { return e.C * std::exp(-e.lambda * t); };
        } else if constexpr (std::is_same_v<T, M2LowerEnvelope>) {
          if (e.k0 < 2) fail("M2 lower bound needs k0 >= 2");
          if (!(std::ldexp(1.0, 1 - 2 * e.k0) < e.delta))
            fail("M2 lower bound needs 2^(1-2k0) < delta: 2^(1-2k0) = " + format_number(std::ldexp(1.0, 1 - 2 * e.k0)) +
                 ", delta = " + format_number(e.delta));
          if (!(e.C > 0.0)) fail("M2 lower bound needs C > 0");
          return [e](double t) { return e.C * e.M2_0 * std::exp(-0.5 * t); };
        } else {
          if (!(e.d0 >= 0.0) || !(e.L >= 0.0)) fail("d_s envelope needs d0 >= 0 and L >= 0");
          if (!(e.lambda > 0.0) || !(e.c > 0.0)) fail("d_s envelope needs lambda > 0 and c > 0");
          if (e.c == e.lambda) return [e](double t) { return (e.d0 + e.L * t) * std::exp(-e.lambda * t); };
          return [e](double t) {
            return e.d0 * std::exp(-e.lambda * t) +
                   e.L * (std::exp(-e.c * t) - std::exp(-e.lambda * t)) / (e.lambda - e.c);
          };
        }
      },
      spec);
}

/// lambda_s = 1 - s/4 - 2^{1-s}, the contraction rate of d_s for s in [2, 3].
inline double lambda_s(double s) {
  if (!(s >= 2.0 && s <= 3.0)) throw DomainError("lambda_s needs s in [2, 3], got " + format_number(s));
  if (s == 2.0 || s == 3.0) return 0.0;
  return 1.0 - 0.25 * s - std::exp2(1.0 - s);
}

/// Bound on |R(t, xi)| of order |xi|^2 or |xi|^3.
inline double r_bound(int order, double alpha, double beta, double M2, double M4, std::optional<double> M6, double xi) {
  if (!(M2 > 0.0)) throw DomainError("r_bound needs M2 > 0");
  const double a = std::abs(xi);
  if (order == 2) return 2.5 * (alpha * std::sqrt(M4 / M2) + beta * M4 / M2) * a * a;
  if (order == 3) {
    if (!M6) throw ArityError("r_bound of order 3 needs M6");
    const double s3 = M2 * std::sqrt(M2);
    return (alpha * M4 / s3 + beta * std::sqrt(M4 * *M6) / s3) * a * a * a;
  }
  throw DomainError("r_bound order must be 2 or 3");
}

}  // namespace midsel
