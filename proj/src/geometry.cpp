#include "nfleak/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nfleak {

ArrayGeometry::ArrayGeometry(std::size_t n_elements, double spacing, double wavelength)
    : n_(n_elements), spacing_(spacing), wavelength_(wavelength) {
  if (n_elements < 2) throw std::invalid_argument("ArrayGeometry: need at least 2 elements");
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw std::invalid_argument("ArrayGeometry: spacing must be positive");
  }
  if (!(wavelength > 0.0) || !std::isfinite(wavelength)) {
    throw std::invalid_argument("ArrayGeometry: wavelength must be positive");
  }
}

ArrayGeometry ArrayGeometry::half_wavelength(std::size_t n_elements, double wavelength) {
  return ArrayGeometry(n_elements, 0.5 * wavelength, wavelength);
}

double ArrayGeometry::wavenumber() const { return 2.0 * std::numbers::pi / wavelength_; }

double ArrayGeometry::aperture() const { return static_cast<double>(n_ - 1) * spacing_; }

double ArrayGeometry::rayleigh_distance() const {
  const double d = aperture();
  return 2.0 * d * d / wavelength_;
}

double ArrayGeometry::bjornson_distance() const { return 2.0 * aperture(); }

double wavelength_from_frequency(double carrier_hz) {
  if (!(carrier_hz > 0.0)) throw std::invalid_argument("carrier frequency must be positive");
  return kSpeedOfLight / carrier_hz;
}

std::vector<double> element_offsets(const ArrayGeometry& geom) {
  const std::size_t n = geom.n_elements();
  const double center = 0.5 * static_cast<double>(n + 1);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (static_cast<double>(i + 1) - center) * geom.spacing();
  }
  return out;
}

ComplexVector nf_steering(const ArrayGeometry& geom, const UeLocation& ue) {
  if (!(ue.d > 0.0)) throw std::domain_error("nf_steering: range must be positive");
  const double k = geom.wavenumber();
  const double s2 = std::sin(ue.phi) * std::sin(ue.phi);
  const double c = std::cos(ue.phi);
  ComplexVector out;
  out.reserve(geom.n_elements());
  for (double x : element_offsets(geom)) {
    out.push_back(std::polar(1.0, -k * (x * x * s2 / (2.0 * ue.d) - x * c)));
  }
  return out;
}

ComplexVector nf_steering_exact(const ArrayGeometry& geom, const UeLocation& ue) {
  if (!(ue.d > 0.0)) throw std::domain_error("nf_steering_exact: range must be positive");
  const double k = geom.wavenumber();
  const double c = std::cos(ue.phi);
  ComplexVector out;
  out.reserve(geom.n_elements());
  for (double x : element_offsets(geom)) {
    const double dn = std::sqrt(ue.d * ue.d + x * x - 2.0 * ue.d * x * c);
    out.push_back(std::polar(1.0, -k * (dn - ue.d)));
  }
  return out;
}

ComplexVector ff_steering(const ArrayGeometry& geom, double theta) {
  const double kc = geom.wavenumber() * std::cos(theta);
  ComplexVector out;
  out.reserve(geom.n_elements());
  for (double x : element_offsets(geom)) out.push_back(std::polar(1.0, kc * x));
  return out;
}

ComplexVector mrt_beamformer(const ArrayGeometry& geom, const UeLocation& ue) {
  ComplexVector w = nf_steering(geom, ue);
  const double scale = 1.0 / std::sqrt(static_cast<double>(geom.n_elements()));
  for (auto& v : w) v *= scale;
  return w;
}

double pathloss(double d, double wavelength) {
  if (!(d > 0.0)) throw std::domain_error("pathloss: distance must be positive");
  const double r = wavelength / (4.0 * std::numbers::pi * d);
  return r * r;
}

ComplexVector ue_channel(const ArrayGeometry& geom, const UeLocation& ue) {
  ComplexVector h = nf_steering(geom, ue);
  const Complex g = std::sqrt(pathloss(ue.d, geom.wavelength())) *
                    std::polar(1.0, -geom.wavenumber() * ue.d);
  for (auto& v : h) v *= g;
  return h;
}

ComplexVector sensor_channel(const ArrayGeometry& geom, const SensorLocation& sensor) {
  ComplexVector h = ff_steering(geom, sensor.theta);
  const Complex g = std::sqrt(pathloss(sensor.d, geom.wavelength())) *
                    std::polar(1.0, -geom.wavenumber() * sensor.d);
  for (auto& v : h) v *= g;
  return h;
}

Complex inner(const ComplexVector& x, const ComplexVector& y) {
  if (x.size() != y.size()) throw std::invalid_argument("inner: size mismatch");
  Complex acc{0.0, 0.0};
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::conj(x[i]) * y[i];
  return acc;
}

}  // namespace nfleak
