#pragma once
// Discrete self-convolution c_n = sum_{k+l=n} f_k f_l, the kernel of the grid
// form of B0. Direct O(n^2) on short supports, FFTW otherwise.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <vector>

#include "midsel/error.hpp"

namespace midsel {

enum class ConvMethod { automatic, direct, fft };

namespace detail {

// FFTW's planner is not thread safe; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline std::size_t good_fft_size(std::size_t n) {
  std::size_t best = 1;
  while (best < n) best <<= 1;
  for (std::size_t p5 = 1; p5 < best; p5 *= 5)
    for (std::size_t p3 = p5; p3 < best; p3 *= 3) {
      std::size_t v = p3;
      while (v < n) v <<= 1;
      best = std::min(best, v);
    }
  return best;
}

struct FftwPlanPair {
  std::size_t n = 0;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;

  explicit FftwPlanPair(std::size_t len) : n(len) {
    std::lock_guard lock(fftw_planner_mutex());
    real = fftw_alloc_real(n);
    spec = fftw_alloc_complex(n / 2 + 1);
    if (!real || !spec) throw Error("fftw allocation failed");
    // ESTIMATE plans do not time candidate algorithms, so results are
    // reproducible run to run.
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), real, spec, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, real, FFTW_ESTIMATE);
    if (!fwd || !bwd) throw Error("fftw planning failed");
  }
  FftwPlanPair(const FftwPlanPair&) = delete;
  FftwPlanPair& operator=(const FftwPlanPair&) = delete;
  ~FftwPlanPair() {
    std::lock_guard lock(fftw_planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    fftw_free(real);
    fftw_free(spec);
  }
};

}  // namespace detail

/// Owns cached FFTW plans; one instance per thread.
class SelfConvolver {
 public:
  explicit SelfConvolver(ConvMethod method = ConvMethod::automatic, std::size_t direct_cutoff = 256)
      : method_(method), cutoff_(direct_cutoff) {}

  /// Relative threshold below which FFT outputs are treated as roundoff.
  static constexpr double kFftFloor = 1e-13;

  ConvMethod method() const noexcept { return method_; }

  /// out has length 2 f.size() - 1.
  void operator()(std::span<const double> f, std::vector<double>& out) {
    const std::size_t n = f.size();
    out.assign(n == 0 ? 0 : 2 * n - 1, 0.0);
    if (n == 0) return;
    std::size_t lo = 0, hi = n;
    while (lo < n && f[lo] == 0.0) ++lo;
    while (hi > lo && f[hi - 1] == 0.0) --hi;
    if (lo == hi) return;
    const std::size_t len = hi - lo;
    const bool use_direct = method_ == ConvMethod::direct || (method_ == ConvMethod::automatic && len <= cutoff_);
    std::span<double> dst(out.data() + 2 * lo, 2 * len - 1);
    if (use_direct)
      direct(f.subspan(lo, len), dst);
    else
      fft(f.subspan(lo, len), dst);
  }

  std::vector<double> operator()(std::span<const double> f) {
    std::vector<double> out;
    (*this)(f, out);
    return out;
  }

 private:
  static void direct(std::span<const double> f, std::span<double> out) {
    const std::size_t n = f.size();
    for (std::size_t k = 0; k < n; ++k) {
      const double fk = f[k];
      if (fk == 0.0) continue;
      double* o = out.data() + k;
      for (std::size_t l = 0; l < n; ++l) o[l] += fk * f[l];
    }
  }

  void fft(std::span<const double> f, std::span<double> out) {
    const std::size_t n = f.size();
    const std::size_t L = detail::good_fft_size(2 * n - 1);
    auto& plan = plans_[L];
    if (!plan) plan = std::make_unique<detail::FftwPlanPair>(L);
    std::fill(plan->real, plan->real + L, 0.0);
    std::copy(f.begin(), f.end(), plan->real);
    fftw_execute(plan->fwd);
    for (std::size_t i = 0; i < L / 2 + 1; ++i) {
      std::complex<double> z(plan->spec[i][0], plan->spec[i][1]);
      z *= z;
      plan->spec[i][0] = z.real();
      plan->spec[i][1] = z.imag();
    }
    fftw_execute(plan->bwd);
    const double inv = 1.0 / static_cast<double>(L);
    double peak = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = plan->real[i] * inv;
      peak = std::max(peak, out[i]);
    }
    // Roundoff is ~1e-16 of the peak and of either sign; left in place it
    // accumulates in the far tails and pollutes high moments.
    const double floor = kFftFloor * peak;
    double got = 0.0;
    for (double& v : out) {
      if (v < floor) v = 0.0;
      got += v;
    }
    const double s = std::accumulate(f.begin(), f.end(), 0.0);
    if (got > 0.0) {
      const double fix = (s * s) / got;
      for (double& v : out) v *= fix;
    }
  }

  ConvMethod method_;
  std::size_t cutoff_;
  std::map<std::size_t, std::unique_ptr<detail::FftwPlanPair>> plans_;
};

}  // namespace midsel
