#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "nfleak/geometry.hpp"
#include "nfleak/leakage.hpp"
#include "nfleak/random.hpp"

namespace nfleak {

/// d ~ d_min + (d_max - d_min) * Beta(alpha, beta).
struct BetaPrior {
  double alpha = 2.0;
  double beta = 2.0;
  double d_min = 2.0;
  double d_max = 12.0;

  /// Throws std::domain_error unless alpha, beta > 1 and d_min < d_max.
  void validate() const;
  double sample(Rng& rng) const;
  double width() const { return d_max - d_min; }
};

/// Symmetric 2x2 information matrix over (d, phi).
struct Fim2 {
  double dd = 0.0;
  double dphi = 0.0;
  double phiphi = 0.0;

  Fim2& operator+=(const Fim2& o) {
    dd += o.dd;
    dphi += o.dphi;
    phiphi += o.phiphi;
    return *this;
  }
  Fim2 operator*(double s) const { return {dd * s, dphi * s, phiphi * s}; }
  double determinant() const { return dd * phiphi - dphi * dphi; }
  double trace() const { return dd + phiphi; }
};

/// Integration window and tolerance used for eta. sqrt(z) is close to
/// N(sqrt(rho), 1) in the tails, so [(sqrt(rho) - 10)^2, (sqrt(rho) + 10)^2]
/// (also covering mean +- 12 std) leaves tail mass below exp(-50).
struct EtaQuadrature {
  double lower;
  double upper;
  double rel_tol;
};
EtaQuadrature eta_quadrature(double rho);

/// eta = E[z R2(sqrt(rho z))^2] for z ~ noncentral chi-square(2, rho), by
/// adaptive Gauss-Kronrod on the log-domain integrand.
double eta_moment(double rho);

/// Per-sample Fisher information in rho, J2 = (eta / rho - 1) / 4.
/// Throws std::domain_error for rho <= 0.
double fisher_info_rho(double rho);

enum class PriorCurvatureMode { ClosedForm, Quadrature };

/// (alpha + beta - 2)(alpha + beta - 1) / (d_max - d_min)^2.
double prior_curvature_closed_form(const BetaPrior& prior);

struct ClippedCurvature {
  double value;
  double clip_eps;  // t in [clip_eps, 1 - clip_eps]
};

/// -E[d^2/dd^2 ln p(d)] by quadrature with the normalized range clipped to
/// [eps, 1 - eps]; the unclipped expectation diverges for alpha or beta <= 2.
ClippedCurvature prior_curvature_quadrature(const BetaPrior& prior, double clip_eps = 1e-3);

double prior_curvature(const BetaPrior& prior,
                       PriorCurvatureMode mode = PriorCurvatureMode::ClosedForm);

/// J_F(psi) = (2 P_t / sigma2)^2 L sum_k J2(rho_k) beta_k^2 grad g_k grad g_k^T.
/// Sensors with rho_k = 0 contribute nothing.
Fim2 conditional_fim(const ArrayGeometry& geom, const UeLocation& ue, const SensorSet& sensors,
                     double p_t, double sigma2, std::size_t l,
                     LeakageBackend backend = LeakageBackend::Fresnel);

struct BcrlbResult {
  Fim2 bim;
  double bound_d = 0.0;    // m^2
  double bound_phi = 0.0;  // rad^2; +inf when phi_unbounded
  bool phi_unbounded = false;
  double prior_curvature = 0.0;
  std::size_t n_prior_samples = 0;
};

/// Adds the prior curvature to the averaged likelihood information and
/// inverts. A singular BIM (no angle information) yields bound_d = 1 / J_dd
/// and an unbounded angle.
BcrlbResult bcrlb_from_information(const Fim2& mean_likelihood_fim, double prior_curvature,
                                   std::size_t n_samples);

struct BcrlbConfig {
  BetaPrior prior;
  double phi_min = 0.0;
  double phi_max = 0.0;
  double p_t = 0.0;
  double sigma2 = 0.0;
  std::size_t l = 1;
  std::size_t n_prior_samples = 1000;
  std::uint64_t seed = 0;
  LeakageBackend backend = LeakageBackend::Fresnel;
  PriorCurvatureMode curvature_mode = PriorCurvatureMode::ClosedForm;
  std::optional<double> prior_curvature_override;
};

/// Monte Carlo average of conditional_fim over psi drawn from the prior
/// (d from the scaled Beta, phi uniform), plus prior curvature, inverted.
BcrlbResult bcrlb(const ArrayGeometry& geom, const SensorSet& sensors, const BcrlbConfig& cfg);

/// Prior curvature selected by cfg (override > mode).
double resolved_prior_curvature(const BcrlbConfig& cfg);

/// Order-robust accumulator (Neumaier) for averaging information matrices.
class Fim2Accumulator {
 public:
  void add(const Fim2& f);
  Fim2 mean() const;
  std::size_t count() const { return n_; }

 private:
  struct Sum {
    double s = 0.0;
    double c = 0.0;
    void add(double x);
    double value() const { return s + c; }
  };
  Sum dd_, dphi_, phiphi_;
  std::size_t n_ = 0;
};

}  // namespace nfleak
