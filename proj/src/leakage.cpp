#include "nfleak/leakage.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "nfleak/specfun.hpp"

namespace nfleak {

namespace {

void require_range(const UeLocation& ue) {
  if (!(ue.d > 0.0) || !std::isfinite(ue.d)) {
    throw std::domain_error("leakage: focal range must be positive and finite");
  }
}

// Quadratic-phase coefficient of b(phi, d): phase_n = k (x_n u + x_n^2 c).
struct PhaseModel {
  double k;
  double u;  // cos(theta) - cos(phi)
  double c;  // sin^2(phi) / (2 d)
};

PhaseModel phase_model(const ArrayGeometry& geom, const UeLocation& ue, double theta_k) {
  const double s = std::sin(ue.phi);
  return {geom.wavenumber(), std::cos(theta_k) - std::cos(ue.phi), s * s / (2.0 * ue.d)};
}

double exact_gain(const ArrayGeometry& geom, const UeLocation& ue, double theta_k) {
  // Elements come in +-x pairs: exp(-jk(xu + x^2 c)) + exp(-jk(-xu + x^2 c))
  // = 2 cos(k x u) exp(-j k x^2 c).
  const PhaseModel pm = phase_model(geom, ue, theta_k);
  const std::size_t n = geom.n_elements();
  const auto offsets = element_offsets(geom);
  double re = (n % 2 == 1) ? 1.0 : 0.0;
  double im = 0.0;
  for (std::size_t i = 0; i < n / 2; ++i) {
    const double x = offsets[i];
    const double amp = 2.0 * std::cos(pm.k * x * pm.u);
    const double q = pm.k * x * x * pm.c;
    re += amp * std::cos(q);
    im -= amp * std::sin(q);
  }
  return (re * re + im * im) / static_cast<double>(n);
}

LeakageGradient exact_gradient(const ArrayGeometry& geom, const UeLocation& ue, double theta_k) {
  const PhaseModel pm = phase_model(geom, ue, theta_k);
  const double sp = std::sin(ue.phi);
  const double cp = std::cos(ue.phi);
  Complex a{0.0, 0.0};
  Complex da_dd{0.0, 0.0};
  Complex da_dphi{0.0, 0.0};
  const Complex minus_j{0.0, -1.0};
  for (double x : element_offsets(geom)) {
    const Complex e = std::polar(1.0, -pm.k * (x * pm.u + x * x * pm.c));
    const double dpsi_dd = -pm.k * x * x * sp * sp / (2.0 * ue.d * ue.d);
    const double dpsi_dphi = pm.k * (x * sp + x * x * sp * cp / ue.d);
    a += e;
    da_dd += minus_j * dpsi_dd * e;
    da_dphi += minus_j * dpsi_dphi * e;
  }
  const double scale = 2.0 / static_cast<double>(geom.n_elements());
  return {scale * std::real(std::conj(a) * da_dd), scale * std::real(std::conj(a) * da_dphi)};
}

double sin_phi_checked(const UeLocation& ue) {
  const double s = std::sin(ue.phi);
  if (!(s > 0.0)) {
    throw std::domain_error("leakage: Fresnel backend needs phi in (0, pi)");
  }
  return s;
}

}  // namespace

std::string_view to_string(LeakageBackend backend) {
  return backend == LeakageBackend::Exact ? "exact" : "fresnel";
}

LeakageBackend parse_backend(std::string_view name) {
  if (name == "exact") return LeakageBackend::Exact;
  if (name == "fresnel") return LeakageBackend::Fresnel;
  throw std::invalid_argument("unknown leakage backend '" + std::string(name) + "'");
}

FresnelArgs fresnel_args(const ArrayGeometry& geom, const UeLocation& ue, double theta_k) {
  require_range(ue);
  const double lambda = geom.wavelength();
  const double n = static_cast<double>(geom.n_elements());
  return {0.5 * n * std::sqrt(8.0 / (ue.d * lambda)) * geom.spacing(),
          (std::cos(theta_k) - std::cos(ue.phi)) * std::sqrt(8.0 * ue.d / lambda)};
}

FresnelArgs fresnel_effective_args(const ArrayGeometry& geom, const UeLocation& ue,
                                   double theta_k) {
  const FresnelArgs raw = fresnel_args(geom, ue, theta_k);
  const double s = sin_phi_checked(ue);
  return {0.5 * raw.beta1 * s, 0.5 * raw.beta2 / s};
}

FresnelGainPartials fresnel_gain_partials(double n_elements, const FresnelArgs& args) {
  const double b1 = args.beta1;
  const double b2 = args.beta2;
  if (!(b1 > 0.0)) throw std::domain_error("fresnel_gain_partials: beta1 must be positive");
  const auto lo = specfun::fresnel(b1 - b2);
  const auto hi = specfun::fresnel(b1 + b2);
  const double csum = lo.c + hi.c;
  const double ssum = lo.s + hi.s;
  const double q = csum * csum + ssum * ssum;
  const double half_pi = 0.5 * std::numbers::pi;
  const double cl = std::cos(half_pi * (b1 - b2) * (b1 - b2));
  const double sl = std::sin(half_pi * (b1 - b2) * (b1 - b2));
  const double ch = std::cos(half_pi * (b1 + b2) * (b1 + b2));
  const double sh = std::sin(half_pi * (b1 + b2) * (b1 + b2));
  const double dq_db1 = 2.0 * csum * (cl + ch) + 2.0 * ssum * (sl + sh);
  const double dq_db2 = 2.0 * csum * (ch - cl) + 2.0 * ssum * (sh - sl);
  const double pref = n_elements / (4.0 * b1 * b1);
  return {pref * q, pref * dq_db1 - 2.0 * pref * q / b1, pref * dq_db2};
}

double leakage_gain(LeakageBackend backend, const ArrayGeometry& geom, const UeLocation& ue,
                    double theta_k) {
  require_range(ue);
  if (backend == LeakageBackend::Exact) return exact_gain(geom, ue, theta_k);
  const auto args = fresnel_effective_args(geom, ue, theta_k);
  return fresnel_gain_partials(static_cast<double>(geom.n_elements()), args).gain;
}

LeakageGradient leakage_gradient(LeakageBackend backend, const ArrayGeometry& geom,
                                 const UeLocation& ue, double theta_k) {
  require_range(ue);
  if (backend == LeakageBackend::Exact) return exact_gradient(geom, ue, theta_k);

  const double sp = sin_phi_checked(ue);
  const double cp = std::cos(ue.phi);
  const auto args = fresnel_effective_args(geom, ue, theta_k);
  const auto p = fresnel_gain_partials(static_cast<double>(geom.n_elements()), args);
  const double u = std::cos(theta_k) - cp;
  const double root = std::sqrt(2.0 * ue.d / geom.wavelength());
  const double db1_dd = -0.5 * args.beta1 / ue.d;
  const double db1_dphi = args.beta1 * cp / sp;
  const double db2_dd = 0.5 * args.beta2 / ue.d;
  const double db2_dphi = root * (1.0 - u * cp / (sp * sp));
  return {p.d_beta1 * db1_dd + p.d_beta2 * db2_dd, p.d_beta1 * db1_dphi + p.d_beta2 * db2_dphi};
}

LeakagePattern leakage_pattern(LeakageBackend backend, const ArrayGeometry& geom,
                               const UeLocation& ue, const SensorSet& sensors, double p_t) {
  const double d_far = geom.rayleigh_distance();
  LeakagePattern out;
  out.gains.reserve(sensors.size());
  out.mean_powers.reserve(sensors.size());
  for (const auto& s : sensors) {
    if (s.d < d_far) {
      throw std::domain_error("leakage_pattern: sensor at " + std::to_string(s.d) +
                              " m is inside the Rayleigh distance " + std::to_string(d_far));
    }
    const double g = leakage_gain(backend, geom, ue, s.theta);
    out.gains.push_back(g);
    out.mean_powers.push_back(p_t * pathloss(s.d, geom.wavelength()) * g);
  }
  return out;
}

}  // namespace nfleak
