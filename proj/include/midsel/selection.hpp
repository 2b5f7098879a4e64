#pragma once
// Selection (mortality) rate m(x) and the quantities derived from it:
// the deviation eta, the local Lipschitz decomposition (alpha, beta) and the
// closed-form S_k moments for polynomial rates of degree at most two.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "midsel/error.hpp"

namespace midsel {

enum class RateKind { constant, affine, quadratic, lipschitz_table, custom };

inline const char* to_string(RateKind k) {
  switch (k) {
    case RateKind::constant: return "constant";
    case RateKind::affine: return "affine";
    case RateKind::quadratic: return "quadratic";
    case RateKind::lipschitz_table: return "lipschitz_table";
    case RateKind::custom: return "custom";
  }
  return "?";
}

/// m(x) = a + b x + c x^2
struct PolyCoefficients {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// Metadata a user-supplied rate must declare before the derived operations
/// accept it. Anything left empty makes the corresponding operation refuse.
struct CustomRate {
  std::function<double(double)> fn;
  double lower_bound = 0.0;  // K with m >= -K
  double growth = 0.0;       // C with m <= C(1+x^2)
  std::optional<double> infimum;
  std::function<double(double)> alpha;  // y -> alpha(y)
  std::optional<double> beta;
};

struct LipschitzPair {
  double alpha = 0.0;
  double beta = 0.0;
};

class SelectionRate {
 public:
  static SelectionRate constant(double a) {
    SelectionRate m(RateKind::constant);
    m.poly_ = {a, 0.0, 0.0};
    m.finish_polynomial();
    return m;
  }

  /// Affine rates are unbounded below on R, so the admissible lower bound
  /// must be declared; probes with m(x) < -K are refused.
  static SelectionRate affine(double a, double b, double lower_bound) {
    if (!(lower_bound >= 0.0) || !std::isfinite(lower_bound))
      throw DomainError("affine rate needs a finite lower bound K >= 0");
    SelectionRate m(RateKind::affine);
    m.poly_ = {a, b, 0.0};
    m.lower_bound_ = lower_bound;
    m.finish_polynomial();
    return m;
  }

  static SelectionRate quadratic(double a, double b, double c) {
    if (!(c >= 0.0)) throw DomainError("quadratic rate needs c >= 0");
    if (c == 0.0 && b != 0.0)
      throw DomainError("quadratic rate with c = 0 is affine; declare a lower bound");
    SelectionRate m(c == 0.0 ? RateKind::constant : RateKind::quadratic);
    m.poly_ = {a, b, c};
    m.finish_polynomial();
    return m;
  }

  /// Piecewise-linear interpolation through (x_i, m_i), extended by constants
  /// outside the table. The table must bracket every simulated support.
  static SelectionRate lipschitz_table(std::vector<double> x, std::vector<double> values) {
    if (x.size() < 2 || x.size() != values.size())
      throw DomainError("lipschitz table needs at least two (x, m) nodes of equal count");
    for (std::size_t i = 1; i < x.size(); ++i)
      if (!(x[i] > x[i - 1])) throw DomainError("lipschitz table nodes must be strictly increasing");
    SelectionRate m(RateKind::lipschitz_table);
    double L = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i)
      L = std::max(L, std::abs(values[i] - values[i - 1]) / (x[i] - x[i - 1]));
    m.lipschitz_ = L;
    m.infimum_ = *std::min_element(values.begin(), values.end());
    m.lower_bound_ = std::max(0.0, -*m.infimum_);
    m.growth_ = table_growth(x, values);
    m.table_x_ = std::move(x);
    m.table_m_ = std::move(values);
    return m;
  }

  static SelectionRate custom(CustomRate spec) {
    if (!spec.fn) throw DomainError("custom rate needs a callable");
    SelectionRate m(RateKind::custom);
    m.lower_bound_ = spec.lower_bound;
    m.growth_ = spec.growth;
    m.infimum_ = spec.infimum;
    m.custom_ = std::move(spec);
    return m;
  }

  RateKind kind() const noexcept { return kind_; }
  bool is_polynomial() const noexcept {
    return kind_ == RateKind::constant || kind_ == RateKind::affine || kind_ == RateKind::quadratic;
  }
  const PolyCoefficients& coefficients() const {
    if (!is_polynomial()) throw UnsupportedOperation("coefficients of a non-polynomial rate");
    return poly_;
  }
  const std::vector<double>& table_x() const noexcept { return table_x_; }
  const std::vector<double>& table_m() const noexcept { return table_m_; }

  /// K in m >= -K.
  double lower_bound() const noexcept { return lower_bound_; }
  /// C in m <= C(1+x^2).
  double growth_constant() const noexcept { return growth_; }

  double infimum() const {
    if (!infimum_) throw UnsupportedOperation("infimum of a custom rate was not declared");
    return *infimum_;
  }

  double operator()(double x) const {
    if (!std::isfinite(x)) throw DomainError("selection rate evaluated at a non-finite point");
    double v = raw(x);
    if (kind_ == RateKind::affine && v < -lower_bound_)
      throw DomainError("affine rate " + std::to_string(v) + " below declared lower bound -" +
                        std::to_string(lower_bound_));
    return v;
  }

  /// m(x) - m(y) without cancellation for polynomial kinds.
  double difference(double x, double y) const {
    if (is_polynomial()) return (x - y) * (poly_.b + poly_.c * (x + y));
    return (*this)(x) - (*this)(y);
  }

 private:
  explicit SelectionRate(RateKind k) : kind_(k) {}

  double raw(double x) const {
    switch (kind_) {
      case RateKind::constant:
      case RateKind::affine:
      case RateKind::quadratic: return poly_.a + x * (poly_.b + poly_.c * x);
      case RateKind::lipschitz_table: return table_eval(x);
      case RateKind::custom: return custom_.fn(x);
    }
    return 0.0;
  }

  double table_eval(double x) const {
    if (x <= table_x_.front()) return table_m_.front();
    if (x >= table_x_.back()) return table_m_.back();
    auto it = std::upper_bound(table_x_.begin(), table_x_.end(), x);
    std::size_t i = static_cast<std::size_t>(it - table_x_.begin());
    double w = (x - table_x_[i - 1]) / (table_x_[i] - table_x_[i - 1]);
    return table_m_[i - 1] + w * (table_m_[i] - table_m_[i - 1]);
  }

  void finish_polynomial() {
    const auto [a, b, c] = poly_;
    if (kind_ == RateKind::affine) {
      infimum_ = -lower_bound_;
    } else if (c > 0.0) {
      infimum_ = a - b * b / (4.0 * c);
      lower_bound_ = std::max(0.0, -*infimum_);
    } else {
      infimum_ = a;
      lower_bound_ = std::max(0.0, -a);
    }
    // Largest eigenvalue of [[c, b/2], [b/2, a]] bounds (a+bx+cx^2)/(1+x^2).
    double lam = 0.5 * (a + c) + std::sqrt(0.25 * (c - a) * (c - a) + 0.25 * b * b);
    growth_ = std::max(0.0, lam);
  }

  static double table_growth(const std::vector<double>& x, const std::vector<double>& m) {
    double C = 0.0;
    auto ratio = [](double v, double s) { return v / (1.0 + s * s); };
    for (std::size_t i = 0; i < x.size(); ++i) C = std::max(C, ratio(m[i], x[i]));
    for (std::size_t i = 1; i < x.size(); ++i) {
      // Interior maxima of (p + q s)/(1 + s^2) on each segment.
      double q = (m[i] - m[i - 1]) / (x[i] - x[i - 1]);
      double p = m[i - 1] - q * x[i - 1];
      if (q == 0.0) continue;
      double disc = std::sqrt(p * p + q * q);
      for (double s : {(-p + disc) / q, (-p - disc) / q})
        if (s > x[i - 1] && s < x[i]) C = std::max(C, ratio(p + q * s, s));
    }
    return C;
  }

  RateKind kind_;
  PolyCoefficients poly_{};
  double lower_bound_ = 0.0;
  double growth_ = 0.0;
  std::optional<double> infimum_;
  double lipschitz_ = 0.0;
  std::vector<double> table_x_, table_m_;
  CustomRate custom_{};

  friend LipschitzPair lipschitz_decomposition(const SelectionRate&, double);
};

/// eta(x) = inf m + 1/2 - m(x). Positive eta at the mean trait is the
/// Dirac-stability regime.
inline double eta(const SelectionRate& m, double x) {
  return m.infimum() + 0.5 - m(x);
}

/// (alpha(y), beta) with |m(x) - m(y)| <= alpha(y)|x-y| + beta|x-y|^2 for all x.
inline LipschitzPair lipschitz_decomposition(const SelectionRate& m, double y) {
  switch (m.kind()) {
    case RateKind::constant:
    case RateKind::affine:
    case RateKind::quadratic: {
      const auto& p = m.poly_;
      return {std::abs(p.b + 2.0 * p.c * y), p.c};
    }
    case RateKind::lipschitz_table: return {m.lipschitz_, 0.0};
    case RateKind::custom:
      if (!m.custom_.alpha || !m.custom_.beta)
        throw UnsupportedOperation("custom rate without declared alpha/beta");
      return {m.custom_.alpha(y), *m.custom_.beta};
  }
  throw UnsupportedOperation("lipschitz decomposition");
}

/// S_k = (b + 2c xbar) M_{k+1} + c M_{k+2} for k = 0..k_max, where
/// moments[k] = M_k (centered, M_0 = 1, M_1 = 0). Exact for degree <= 2.
inline std::vector<double> s_closure(const SelectionRate& m, double xbar,
                                     std::span<const double> moments, int k_max) {
  if (!m.is_polynomial()) throw UnsupportedOperation("S_k closure needs a polynomial rate");
  if (k_max < 0) throw DomainError("k_max must be nonnegative");
  const auto& p = m.coefficients();
  // A vanishing coefficient does not need the corresponding moment.
  const bool need_k2 = p.c != 0.0;
  const std::size_t need = static_cast<std::size_t>(k_max) + (need_k2 ? 3 : 2);
  if (moments.size() < need)
    throw ArityError("S_k closure up to k=" + std::to_string(k_max) + " needs moments up to M_" +
                     std::to_string(need - 1));
  const double lin = p.b + 2.0 * p.c * xbar;
  std::vector<double> S(static_cast<std::size_t>(k_max) + 1);
  for (int k = 0; k <= k_max; ++k) {
    double v = lin * moments[k + 1];
    if (need_k2) v += p.c * moments[k + 2];
    S[k] = v;
  }
  return S;
}

}  // namespace midsel
