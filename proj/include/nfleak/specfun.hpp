#pragma once

// Special functions used by the leakage model and the noncentral chi-square
// likelihood. All functions are pure and thread-safe.

namespace nfleak::specfun {

/// Normalized Fresnel integrals C(x) = int_0^x cos(pi t^2 / 2) dt and
/// S(x) = int_0^x sin(pi t^2 / 2) dt. Both tend to 1/2 as x -> +inf.
struct FresnelPair {
  double c;
  double s;
};

/// Throws std::domain_error for non-finite x.
FresnelPair fresnel(double x);

/// log I0(t) for t >= 0, stable for arbitrarily large t.
double log_bessel_i0(double t);

/// I1(t) / I0(t) for t >= 0, evaluated without forming I0 or I1 for large t.
/// The result lies in [0, 1).
double bessel_ratio_r2(double t);

namespace detail {

// Crossover points between the series and the large-argument branches.
inline constexpr double kFresnelSeam = 1.5;
inline constexpr double kBesselSeam = 20.0;

// Branch evaluators, exposed for seam tests. Inputs are assumed nonnegative.
FresnelPair fresnel_series(double x);
FresnelPair fresnel_continued_fraction(double x);
double log_i0_series(double t);
double log_i0_asymptotic(double t);
double r2_series(double t);
double r2_asymptotic(double t);

}  // namespace detail

}  // namespace nfleak::specfun
