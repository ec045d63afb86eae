#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace nfleak {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

inline constexpr double kSpeedOfLight = 299792458.0;

/// Uniform linear array along the y-axis, centered at the origin.
class ArrayGeometry {
 public:
  /// Throws std::invalid_argument unless n_elements >= 2 and spacing, wavelength > 0.
  ArrayGeometry(std::size_t n_elements, double spacing, double wavelength);

  /// Half-wavelength spaced array.
  static ArrayGeometry half_wavelength(std::size_t n_elements, double wavelength);

  std::size_t n_elements() const { return n_; }
  double spacing() const { return spacing_; }
  double wavelength() const { return wavelength_; }
  double wavenumber() const;
  /// D = (N - 1) * spacing.
  double aperture() const;
  /// d_F = 2 D^2 / lambda.
  double rayleigh_distance() const;
  /// d_B = 2 D, the inner edge of the beamfocusing region.
  double bjornson_distance() const;

 private:
  std::size_t n_;
  double spacing_;
  double wavelength_;
};

/// Focal point (range from the array center in meters, azimuth in radians).
struct UeLocation {
  double d;
  double phi;
};

/// Far-field observer at range d (meters) and direction theta (radians).
struct SensorLocation {
  double d;
  double theta;
};

using SensorSet = std::vector<SensorLocation>;

double wavelength_from_frequency(double carrier_hz);

/// i_n * spacing for n = 1..N with i_n = n - (N + 1) / 2. Half-integer indices
/// for even N; there is no center element in that case.
std::vector<double> element_offsets(const ArrayGeometry& geom);

/// Fresnel-approximated near-field steering vector b(phi, d). Throws
/// std::domain_error for d <= 0.
ComplexVector nf_steering(const ArrayGeometry& geom, const UeLocation& ue);

/// Near-field steering vector using exact element distances,
/// exp(-j k (d_n - d)) with d_n = sqrt(d^2 + x_n^2 - 2 d x_n cos(phi)).
ComplexVector nf_steering_exact(const ArrayGeometry& geom, const UeLocation& ue);

/// Far-field steering vector a(theta) with phases +k x_n cos(theta).
ComplexVector ff_steering(const ArrayGeometry& geom, double theta);

/// w = b(phi, d) / sqrt(N); unit norm.
ComplexVector mrt_beamformer(const ArrayGeometry& geom, const UeLocation& ue);

/// Free-space large-scale fading (lambda / (4 pi d))^2.
double pathloss(double d, double wavelength);

/// LoS channel to the UE, sqrt(beta_u) exp(-j k d) b(phi, d). The common
/// carrier phase never affects received power.
ComplexVector ue_channel(const ArrayGeometry& geom, const UeLocation& ue);

/// LoS far-field channel to a sensor, sqrt(beta_k) exp(-j k d_k) a(theta_k).
ComplexVector sensor_channel(const ArrayGeometry& geom, const SensorLocation& sensor);

/// x^H y.
Complex inner(const ComplexVector& x, const ComplexVector& y);

}  // namespace nfleak
