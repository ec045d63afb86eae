#include "nfleak/fisher.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nfleak/observation.hpp"
#include "nfleak/specfun.hpp"

namespace nfleak {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr double kEtaRelTol = 1e-12;

}  // namespace

void BetaPrior::validate() const {
  if (!(alpha > 1.0) || !(beta > 1.0)) {
    throw std::domain_error("BetaPrior: alpha and beta must exceed 1");
  }
  if (!(d_min < d_max)) throw std::domain_error("BetaPrior: need d_min < d_max");
}

double BetaPrior::sample(Rng& rng) const { return d_min + width() * rng.beta(alpha, beta); }

void Fim2Accumulator::Sum::add(double x) {
  const double t = s + x;
  if (std::abs(s) >= std::abs(x)) {
    c += (s - t) + x;
  } else {
    c += (x - t) + s;
  }
  s = t;
}

void Fim2Accumulator::add(const Fim2& f) {
  dd_.add(f.dd);
  dphi_.add(f.dphi);
  phiphi_.add(f.phiphi);
  ++n_;
}

Fim2 Fim2Accumulator::mean() const {
  if (n_ == 0) return {};
  const double inv = 1.0 / static_cast<double>(n_);
  return {dd_.value() * inv, dphi_.value() * inv, phiphi_.value() * inv};
}

EtaQuadrature eta_quadrature(double rho) {
  const NoncentralChiSq2 dist{rho};
  const double sd = std::sqrt(dist.variance());
  const double root = std::sqrt(rho);
  const double lo_tail = std::max(0.0, root - 10.0);
  const double lower = std::min(lo_tail * lo_tail, std::max(0.0, dist.mean() - 12.0 * sd));
  const double upper = std::max((root + 10.0) * (root + 10.0), dist.mean() + 12.0 * sd);
  return {lower, upper, kEtaRelTol};
}

double eta_moment(double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    throw std::domain_error("eta_moment: rho must be positive and finite");
  }
  const NoncentralChiSq2 dist{rho};
  auto integrand = [&](double z) {
    if (!(z > 0.0)) return 0.0;
    const double r2 = specfun::bessel_ratio_r2(std::sqrt(rho * z));
    if (!(r2 > 0.0)) return 0.0;
    return std::exp(loglik(z, dist) + std::log(z) + 2.0 * std::log(r2));
  };
  const auto q = eta_quadrature(rho);
  // Split at the mode region so the adaptive rule sees the peak on a node.
  const double mid = std::clamp(dist.mean(), q.lower, q.upper);
  double eta = 0.0;
  if (mid > q.lower) {
    eta += gauss_kronrod<double, 61>::integrate(integrand, q.lower, mid, 20, q.rel_tol);
  }
  eta += gauss_kronrod<double, 61>::integrate(integrand, mid, q.upper, 20, q.rel_tol);
  return eta;
}

double fisher_info_rho(double rho) {
  if (!(rho > 0.0)) throw std::domain_error("fisher_info_rho: rho must be positive");
  const double j = 0.25 * (eta_moment(rho) / rho - 1.0);
  // Rounding can push the difference marginally outside (0, 1/4].
  return std::clamp(j, std::numeric_limits<double>::min(), 0.25);
}

double prior_curvature_closed_form(const BetaPrior& prior) {
  prior.validate();
  const double s = prior.alpha + prior.beta;
  return (s - 2.0) * (s - 1.0) / (prior.width() * prior.width());
}

ClippedCurvature prior_curvature_quadrature(const BetaPrior& prior, double clip_eps) {
  prior.validate();
  if (!(clip_eps > 0.0 && clip_eps < 0.5)) {
    throw std::domain_error("prior_curvature_quadrature: clip_eps must be in (0, 0.5)");
  }
  const double a = prior.alpha;
  const double b = prior.beta;
  const double log_norm = -std::log(std::beta(a, b));
  auto integrand = [&](double t) {
    const double pdf = std::exp(log_norm + (a - 1.0) * std::log(t) + (b - 1.0) * std::log1p(-t));
    return pdf * ((a - 1.0) / (t * t) + (b - 1.0) / ((1.0 - t) * (1.0 - t)));
  };
  const double v =
      gauss_kronrod<double, 61>::integrate(integrand, clip_eps, 1.0 - clip_eps, 25, 1e-12);
  return {v / (prior.width() * prior.width()), clip_eps};
}

double prior_curvature(const BetaPrior& prior, PriorCurvatureMode mode) {
  return mode == PriorCurvatureMode::ClosedForm ? prior_curvature_closed_form(prior)
                                                : prior_curvature_quadrature(prior).value;
}

Fim2 conditional_fim(const ArrayGeometry& geom, const UeLocation& ue, const SensorSet& sensors,
                     double p_t, double sigma2, std::size_t l, LeakageBackend backend) {
  if (!(sigma2 > 0.0)) throw std::domain_error("conditional_fim: sigma2 must be positive");
  if (!(p_t > 0.0)) throw std::domain_error("conditional_fim: transmit power must be positive");
  const double d_far = geom.rayleigh_distance();
  const double lead = std::pow(2.0 * p_t / sigma2, 2) * static_cast<double>(l);
  Fim2 out;
  for (const auto& s : sensors) {
    if (s.d < d_far) throw std::domain_error("conditional_fim: sensor inside Rayleigh distance");
    const double beta_k = pathloss(s.d, geom.wavelength());
    const double g = leakage_gain(backend, geom, ue, s.theta);
    const double rho = noncentrality(p_t, beta_k, g, sigma2);
    if (!(rho > 0.0)) continue;
    const auto grad = leakage_gradient(backend, geom, ue, s.theta);
    const double w = lead * fisher_info_rho(rho) * beta_k * beta_k;
    out += Fim2{w * grad.d_d * grad.d_d, w * grad.d_d * grad.d_phi, w * grad.d_phi * grad.d_phi};
  }
  return out;
}

BcrlbResult bcrlb_from_information(const Fim2& mean_likelihood_fim, double prior_curvature,
                                   std::size_t n_samples) {
  BcrlbResult r;
  r.bim = mean_likelihood_fim;
  r.bim.dd += prior_curvature;
  r.prior_curvature = prior_curvature;
  r.n_prior_samples = n_samples;
  const double det = r.bim.determinant();
  const double scale = std::abs(r.bim.dd * r.bim.phiphi);
  if (!(r.bim.phiphi > 0.0) || !(det > 1e-14 * scale)) {
    r.phi_unbounded = true;
    r.bound_d = 1.0 / r.bim.dd;
    r.bound_phi = std::numeric_limits<double>::infinity();
    return r;
  }
  r.bound_d = r.bim.phiphi / det;
  r.bound_phi = r.bim.dd / det;
  return r;
}

double resolved_prior_curvature(const BcrlbConfig& cfg) {
  if (cfg.prior_curvature_override) return *cfg.prior_curvature_override;
  return prior_curvature(cfg.prior, cfg.curvature_mode);
}

BcrlbResult bcrlb(const ArrayGeometry& geom, const SensorSet& sensors, const BcrlbConfig& cfg) {
  if (cfg.n_prior_samples < 1) throw std::domain_error("bcrlb: need at least one prior sample");
  cfg.prior.validate();
  Rng rng(derive_seed(cfg.seed, streams::kPrior));
  Fim2Accumulator acc;
  for (std::size_t i = 0; i < cfg.n_prior_samples; ++i) {
    const double d = cfg.prior.sample(rng);
    const double phi = rng.uniform(cfg.phi_min, cfg.phi_max);
    acc.add(conditional_fim(geom, {d, phi}, sensors, cfg.p_t, cfg.sigma2, cfg.l, cfg.backend));
  }
  return bcrlb_from_information(acc.mean(), resolved_prior_curvature(cfg), cfg.n_prior_samples);
}

}  // namespace nfleak
