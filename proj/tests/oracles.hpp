#pragma once

// Reference implementations used only by the tests. They trade speed for
// independence from the library code paths they check.

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "nfleak/geometry.hpp"

namespace oracle {

using ld = long double;

namespace detail {
inline ld simpson_step(const std::function<ld(ld)>& f, ld a, ld b, ld fa, ld fm, ld fb, ld whole,
                       ld tol, int depth) {
  const ld m = 0.5L * (a + b);
  const ld lm = 0.5L * (a + m);
  const ld rm = 0.5L * (m + b);
  const ld flm = f(lm);
  const ld frm = f(rm);
  const ld left = (m - a) / 6.0L * (fa + 4.0L * flm + fm);
  const ld right = (b - m) / 6.0L * (fm + 4.0L * frm + fb);
  const ld delta = left + right - whole;
  // Tolerances below long-double resolution would otherwise recurse to full depth.
  const ld floor = 64.0L * std::numeric_limits<ld>::epsilon() * (std::fabs(left) + std::fabs(right));
  if (depth <= 0 || std::fabs(delta) <= 15.0L * std::max(tol, floor)) {
    return left + right + delta / 15.0L;
  }
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5L * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5L * tol, depth - 1);
}
}  // namespace detail

/// Adaptive Simpson in long double on [a, b], split into `pieces` panels.
inline ld integrate(const std::function<ld(ld)>& f, ld a, ld b, ld tol = 1e-14L, int pieces = 64,
                    int depth = 30) {
  ld total = 0.0L;
  const ld h = (b - a) / pieces;
  for (int i = 0; i < pieces; ++i) {
    const ld lo = a + h * i;
    const ld hi = (i + 1 == pieces) ? b : lo + h;
    const ld fa = f(lo);
    const ld fb = f(hi);
    const ld fm = f(0.5L * (lo + hi));
    const ld whole = (hi - lo) / 6.0L * (fa + 4.0L * fm + fb);
    total += detail::simpson_step(f, lo, hi, fa, fm, fb, whole, tol / pieces, depth);
  }
  return total;
}

/// Normalized Fresnel integrals by quadrature of the defining integrals.
inline std::pair<double, double> fresnel(double x) {
  const ld pi = std::numbers::pi_v<ld>;
  const int pieces = 64 + static_cast<int>(std::fabs(x) * std::fabs(x) * 8.0);
  const ld c = integrate([&](ld t) { return std::cos(pi * t * t / 2.0L); }, 0.0L, x, 1e-16L, pieces);
  const ld s = integrate([&](ld t) { return std::sin(pi * t * t / 2.0L); }, 0.0L, x, 1e-16L, pieces);
  return {static_cast<double>(c), static_cast<double>(s)};
}

/// Normalized Fresnel integrals from the large-argument auxiliary series,
/// usable for x above roughly 5.
inline std::pair<double, double> fresnel_asymptotic(double x) {
  const ld pi = std::numbers::pi_v<ld>;
  const ld xx = x;
  const ld u = pi * xx * xx;
  ld f = 0.0L;
  ld g = 0.0L;
  ld tf = 1.0L;
  ld tg = 1.0L;
  for (int m = 0; m < 8; ++m) {
    f += tf;
    g += tg;
    tf *= -(4.0L * m + 1.0L) * (4.0L * m + 3.0L) / (u * u);
    tg *= -(4.0L * m + 3.0L) * (4.0L * m + 5.0L) / (u * u);
  }
  f /= pi * xx;
  g /= pi * pi * xx * xx * xx;
  const ld arg = u / 2.0L;
  const ld c = 0.5L + f * std::sin(arg) - g * std::cos(arg);
  const ld s = 0.5L - f * std::cos(arg) - g * std::sin(arg);
  return {static_cast<double>(c), static_cast<double>(s)};
}

/// I0(t) by direct power series, sum (t/2)^(2k) / (k!)^2.
inline ld bessel_i0_series(ld t) {
  const ld q = t * t / 4.0L;
  ld term = 1.0L;
  ld sum = 1.0L;
  for (int k = 1; k < 2000; ++k) {
    term *= q / (static_cast<ld>(k) * k);
    sum += term;
    if (term < sum * 1e-21L) break;
  }
  return sum;
}

/// I1(t) / I0(t) by the Gauss continued fraction
/// I1/I0 = 1 / (2/t + 1 / (4/t + 1 / (6/t + ...))), evaluated bottom-up.
inline double bessel_ratio_cf(double t, int terms = 4000) {
  if (t == 0.0) return 0.0;
  ld tail = 0.0L;
  for (int k = terms; k >= 1; --k) tail = 1.0L / (2.0L * k / t + tail);
  return static_cast<double>(tail);
}

/// |a(theta)^H b(phi, d)|^2 / N from scratch, in long double.
inline double leakage_exact(std::size_t n, double spacing, double lambda, double d, double phi,
                            double theta) {
  const ld k = 2.0L * std::numbers::pi_v<ld> / lambda;
  std::complex<ld> acc = 0.0L;
  for (std::size_t i = 1; i <= n; ++i) {
    const ld x = (static_cast<ld>(i) - (static_cast<ld>(n) + 1.0L) / 2.0L) * spacing;
    const ld sphi = std::sin(static_cast<ld>(phi));
    const ld phase_b = -k * (x * x * sphi * sphi / (2.0L * d) - x * std::cos(static_cast<ld>(phi)));
    const ld phase_a = k * x * std::cos(static_cast<ld>(theta));
    acc += std::polar(1.0L, phase_b - phase_a);
  }
  return static_cast<double>(std::norm(acc) / static_cast<ld>(n));
}

/// Central finite difference of a scalar function.
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Five-point central difference, truncation error O(h^4).
inline double central_diff4(const std::function<double(double)>& f, double x, double h) {
  return (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h);
}

/// Kolmogorov-Smirnov distance between samples and the noncentral
/// chi-square CDF with 2 DoF (central when rho = 0).
inline double ks_statistic(std::vector<double> samples, double rho) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f =
        rho == 0.0 ? boost::math::cdf(boost::math::chi_squared(2.0), samples[i])
                   : boost::math::cdf(boost::math::non_central_chi_squared(2.0, rho), samples[i]);
    worst = std::max({worst, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  return worst;
}

}  // namespace oracle
