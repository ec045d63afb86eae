#include "nfleak/observation.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "nfleak/random.hpp"
#include "nfleak/specfun.hpp"

namespace nfleak {

namespace {

void check_noise(const NoiseModel& noise) {
  if (!(noise.sigma2 > 0.0) || !std::isfinite(noise.sigma2)) {
    throw std::domain_error("noise variance must be positive");
  }
}

// Visits (k, t, raw power) in the canonical stream order: sensor-major, two
// normals (real, imaginary) per snapshot.
template <typename Visit>
void draw_powers(const LeakagePattern& pattern, const NoiseModel& noise, std::size_t l,
                 std::uint64_t seed, Visit&& visit) {
  check_noise(noise);
  if (l < 1) throw std::domain_error("sample_block: need at least one snapshot");
  Rng rng(seed);
  const double sd = std::sqrt(0.5 * noise.sigma2);
  for (std::size_t k = 0; k < pattern.mean_powers.size(); ++k) {
    const double amp = std::sqrt(pattern.mean_powers[k]);
    for (std::size_t t = 0; t < l; ++t) {
      const double re = amp + sd * rng.normal();
      const double im = sd * rng.normal();
      visit(k, t, re * re + im * im);
    }
  }
}

}  // namespace

double noncentrality(double p_t, double beta_k, double g_k, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::domain_error("noncentrality: sigma2 must be positive");
  return 2.0 * p_t * beta_k * g_k / sigma2;
}

ObservationBlock sample_block(const LeakagePattern& pattern, const NoiseModel& noise,
                              std::size_t l, std::uint64_t seed) {
  ObservationBlock block;
  block.k = pattern.mean_powers.size();
  block.l = l;
  block.seed = seed;
  block.inst.resize(block.k * l);
  block.mean_normalized.assign(block.k, 0.0);
  std::vector<double> sums(block.k, 0.0);
  draw_powers(pattern, noise, l, seed, [&](std::size_t k, std::size_t t, double p) {
    block.inst[k * l + t] = 2.0 * p / noise.sigma2;
    sums[k] += p;
  });
  for (std::size_t k = 0; k < block.k; ++k) {
    block.mean_normalized[k] = sums[k] / (static_cast<double>(l) * noise.sigma2) - 1.0;
  }
  return block;
}

std::vector<double> sample_mean_normalized(const LeakagePattern& pattern, const NoiseModel& noise,
                                           std::size_t l, std::uint64_t seed) {
  std::vector<double> sums(pattern.mean_powers.size(), 0.0);
  draw_powers(pattern, noise, l, seed,
              [&](std::size_t k, std::size_t, double p) { sums[k] += p; });
  for (auto& s : sums) s = s / (static_cast<double>(l) * noise.sigma2) - 1.0;
  return sums;
}

double loglik(double z, const NoncentralChiSq2& dist) {
  if (!(z >= 0.0)) throw std::domain_error("loglik: observation must be >= 0");
  if (!(dist.rho >= 0.0)) throw std::domain_error("loglik: noncentrality must be >= 0");
  return -std::log(2.0) - 0.5 * (dist.rho + z) + specfun::log_bessel_i0(std::sqrt(dist.rho * z));
}

double score(double z, const NoncentralChiSq2& dist) {
  if (!(z >= 0.0)) throw std::domain_error("score: observation must be >= 0");
  if (!(dist.rho > 0.0)) throw std::domain_error("score: undefined for noncentrality <= 0");
  return -0.5 + 0.5 * std::sqrt(z / dist.rho) * specfun::bessel_ratio_r2(std::sqrt(dist.rho * z));
}

void write_block_rows(std::ostream& os, std::span<const ObservationBlock> blocks) {
  const auto old_precision = os.precision(17);
  for (std::size_t trial = 0; trial < blocks.size(); ++trial) {
    const auto& b = blocks[trial];
    for (std::size_t k = 0; k < b.k; ++k) {
      for (std::size_t t = 0; t < b.l; ++t) {
        os << trial << ',' << k << ',' << t << ',' << b.at(k, t) << '\n';
      }
    }
  }
  os.precision(old_precision);
}

}  // namespace nfleak
