#pragma once

// Test-only oracles for the wave simulator.

#include <cmath>
#include <numbers>
#include <vector>

namespace drfwi::testing {

inline double ricker_at(double t, double f, double delay) {
  const double a = std::numbers::pi * std::numbers::pi * f * f * (t - delay) * (t - delay);
  return (1.0 - 2.0 * a) * std::exp(-a);
}

/// Homogeneous 2D whole-space pressure response to a Ricker point source,
/// up to a constant factor: integral over s of w(t - T cosh s), T = r / v.
/// The substitution tau = T cosh s removes the 1/sqrt(tau^2 - T^2) singularity.
inline std::vector<double> analytic_2d_response(double r, double v, double f, double delay,
                                                double dt, std::size_t nt) {
  const double travel = r / v;
  std::vector<double> out(nt, 0.0);
  const int n = 20000;
  for (std::size_t k = 0; k < nt; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (t <= travel - 3.0 / f) continue;
    const double s_max = std::acosh(std::max(1.0, (t + 2.0) / travel));
    const double h = s_max / n;
    double acc = 0.0;
    for (int q = 0; q <= n; ++q) {
      const double s = q * h;
      const double wq = (q == 0 || q == n) ? 0.5 : 1.0;
      acc += wq * ricker_at(t - travel * std::cosh(s), f, delay);
    }
    out[k] = acc * h;
  }
  return out;
}

/// Lag (in samples, sub-sample via parabolic fit) maximizing the cross-correlation
/// sum_k a[k + lag] b[k] over |lag| <= max_lag.
inline double best_lag(const std::vector<double>& a, const std::vector<double>& b, int max_lag) {
  auto xcorr = [&](int lag) {
    double acc = 0.0;
    for (int k = 0; k < static_cast<int>(b.size()); ++k) {
      const int ka = k + lag;
      if (ka >= 0 && ka < static_cast<int>(a.size())) acc += a[ka] * b[k];
    }
    return acc;
  };
  int best = -max_lag;
  double best_val = xcorr(best);
  for (int lag = -max_lag + 1; lag <= max_lag; ++lag) {
    const double v = xcorr(lag);
    if (v > best_val) {
      best_val = v;
      best = lag;
    }
  }
  const double ym = xcorr(best - 1), y0 = best_val, yp = xcorr(best + 1);
  const double denom = ym - 2.0 * y0 + yp;
  const double frac = denom != 0.0 ? 0.5 * (ym - yp) / denom : 0.0;
  return best + frac;
}

inline double energy(const std::vector<double>& x, std::size_t from = 0,
                     std::size_t to = static_cast<std::size_t>(-1)) {
  double e = 0.0;
  for (std::size_t k = from; k < std::min(to, x.size()); ++k) e += x[k] * x[k];
  return e;
}

}  // namespace drfwi::testing
