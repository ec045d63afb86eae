#pragma once

#include <string_view>
#include <vector>

#include "nfleak/geometry.hpp"

namespace nfleak {

/// How g_k(psi) = |a(theta_k)^H b(phi, d)|^2 / N is evaluated.
///  - Exact: direct inner product over the N elements.
///  - Fresnel: closed form in Fresnel integrals (continuous-aperture limit).
enum class LeakageBackend { Exact, Fresnel };

std::string_view to_string(LeakageBackend backend);
/// Accepts "exact" or "fresnel"; throws std::invalid_argument otherwise.
LeakageBackend parse_backend(std::string_view name);

struct FresnelArgs {
  double beta1;
  double beta2;
};

/// beta1 = (N/2) sqrt(8 / (d lambda)) spacing,
/// beta2 = (cos theta_k - cos phi) sqrt(8 d / lambda).
FresnelArgs fresnel_args(const ArrayGeometry& geom, const UeLocation& ue, double theta_k);

/// Arguments at which the closed form is actually evaluated by the Fresnel
/// backend. Completing the square in the quadratic aperture phase with the
/// normalized C/S convention gives beta1 * sin(phi) / 2 and
/// beta2 / (2 sin(phi)); the sin(phi) factors carry the sin^2(phi) curvature
/// term of b(phi, d), which the uncorrected arguments only model at broadside.
FresnelArgs fresnel_effective_args(const ArrayGeometry& geom, const UeLocation& ue,
                                   double theta_k);

/// g = N / (4 b1^2) [(C(b1-b2) + C(b1+b2))^2 + (S(b1-b2) + S(b1+b2))^2] and its
/// partial derivatives in b1 and b2.
struct FresnelGainPartials {
  double gain;
  double d_beta1;
  double d_beta2;
};
FresnelGainPartials fresnel_gain_partials(double n_elements, const FresnelArgs& args);

double leakage_gain(LeakageBackend backend, const ArrayGeometry& geom, const UeLocation& ue,
                    double theta_k);

struct LeakageGradient {
  double d_d;    // per meter
  double d_phi;  // per radian
};

LeakageGradient leakage_gradient(LeakageBackend backend, const ArrayGeometry& geom,
                                 const UeLocation& ue, double theta_k);

struct LeakagePattern {
  std::vector<double> gains;        // g_k, dimensionless
  std::vector<double> mean_powers;  // P_t beta_k g_k, watts
};

/// Throws std::domain_error if a sensor is inside the Rayleigh distance.
LeakagePattern leakage_pattern(LeakageBackend backend, const ArrayGeometry& geom,
                               const UeLocation& ue, const SensorSet& sensors, double p_t);

}  // namespace nfleak
