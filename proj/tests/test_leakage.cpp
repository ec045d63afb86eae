#include <doctest.h>

#include "approx.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nfleak/leakage.hpp"
#include "nfleak/random.hpp"
#include "oracles.hpp"

using namespace nfleak;

namespace {

const double kPi = std::numbers::pi;

ArrayGeometry table_one() {
  return ArrayGeometry::half_wavelength(100, wavelength_from_frequency(15e9));
}

}  // namespace

TEST_SUITE("leakage") {
  TEST_CASE("Fresnel arguments") {
    const ArrayGeometry g(100, 0.01, 0.02);
    const auto a = fresnel_args(g, {6.0, kPi / 3.0}, kPi / 2.0);
    CHECK(a.beta1 == approx(50.0 * std::sqrt(8.0 / 0.12) * 0.01));
    CHECK(a.beta1 == approx(4.0825).epsilon(1e-4));
    CHECK(a.beta2 == approx(-24.495).epsilon(1e-4));

    CHECK(fresnel_args(g, {6.0, 1.2}, 1.2).beta2 == 0.0);
    const auto near = fresnel_args(g, {3.0, 1.0}, 1.4);
    const auto far = fresnel_args(g, {12.0, 1.0}, 1.4);
    CHECK(far.beta1 == approx(near.beta1 / 2.0));
    CHECK(far.beta2 == approx(near.beta2 * 2.0));
    CHECK(near.beta1 > 0.0);
    CHECK_THROWS_AS(fresnel_args(g, {0.0, 1.0}, 1.0), std::domain_error);
  }

  TEST_CASE("effective arguments reduce to the stated ones at broadside") {
    const auto g = table_one();
    const auto lit = fresnel_args(g, {5.0, kPi / 2.0}, 1.3);
    const auto eff = fresnel_effective_args(g, {5.0, kPi / 2.0}, 1.3);
    CHECK(eff.beta1 == approx(lit.beta1 / 2.0));
    CHECK(eff.beta2 == approx(lit.beta2 / 2.0));
  }

  TEST_CASE("exact backend matches an independent inner product") {
    const auto g = table_one();
    Rng rng(21);
    for (int t = 0; t < 50; ++t) {
      const UeLocation ue{rng.uniform(2.0, 12.0), rng.uniform(kPi / 6.0, 5.0 * kPi / 6.0)};
      const double theta = rng.uniform(0.0, kPi);
      const double ref =
          oracle::leakage_exact(100, g.spacing(), g.wavelength(), ue.d, ue.phi, theta);
      CHECK(leakage_gain(LeakageBackend::Exact, g, ue, theta) ==
            approx(ref).epsilon(1e-9).scale(1e-12));
    }
  }

  TEST_CASE("far focus at the matched angle gives the full array gain") {
    const auto g = table_one();
    CHECK(leakage_gain(LeakageBackend::Exact, g, {1e9, 1.0}, 1.0) ==
          approx(100.0).epsilon(1e-3));
  }

  TEST_CASE("energy over an orthogonal far-field codebook") {
    const auto g = table_one();
    const UeLocation ue{5.0, 1.2};
    double sum = 0.0;
    for (int m = -50; m < 50; ++m) {
      sum += leakage_gain(LeakageBackend::Exact, g, ue, std::acos(2.0 * m / 100.0));
    }
    CHECK(sum == approx(100.0).epsilon(1e-10));
  }

  TEST_CASE("closed form against the inner product at broadside") {
    const auto g = table_one();
    const UeLocation ue{6.0, kPi / 2.0};
    const double e = leakage_gain(LeakageBackend::Exact, g, ue, kPi / 2.0);
    const double f = leakage_gain(LeakageBackend::Fresnel, g, ue, kPi / 2.0);
    CHECK(std::abs(f - e) / e < 0.05);
  }

  TEST_CASE("MRT leakage at the matched angle against the closed form") {
    const auto g = table_one();
    const UeLocation ue{6.0, kPi / 3.0};
    const auto w = mrt_beamformer(g, ue);
    const auto a = ff_steering(g, kPi / 3.0);
    const double brute = std::norm(inner(a, w));
    const auto args = fresnel_effective_args(g, ue, kPi / 3.0);
    CHECK(args.beta2 == 0.0);
    const double closed = fresnel_gain_partials(100.0, args).gain;
    CHECK(std::abs(brute - closed) / brute < 0.03);
  }

  TEST_CASE("gains are bounded and continuous over a dense sweep") {
    const auto g = table_one();
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
      const UeLocation ue{rng.uniform(2.0, 12.0), rng.uniform(kPi / 6.0, 5.0 * kPi / 6.0)};
      for (auto backend : {LeakageBackend::Exact, LeakageBackend::Fresnel}) {
        double prev = leakage_gain(backend, g, ue, 0.0);
        for (int i = 1; i <= 10000; ++i) {
          const double theta = kPi * i / 10000.0;
          const double v = leakage_gain(backend, g, ue, theta);
          REQUIRE(std::isfinite(v));
          REQUIRE(v >= 0.0);
          REQUIRE(v <= 100.0 * (1.0 + 1e-9));
          // Angular step 3e-4 rad moves u by at most 3e-4; the pattern varies
          // on the scale 2/N in u, so neighbours never jump by more than a
          // modest fraction of the array gain.
          REQUIRE(std::abs(v - prev) < 5.0);
          prev = v;
        }
        const double at_phi = leakage_gain(backend, g, ue, ue.phi);
        CHECK(std::isfinite(at_phi));
      }
    }
  }

  TEST_CASE("closed form tracks the inner product") {
    const auto g = table_one();
    Rng rng(99);
    double sum_rel_main = 0.0;
    double max_rel_main = 0.0;
    double max_peak_norm = 0.0;
    const int draws = 1000;
    for (int t = 0; t < draws; ++t) {
      const UeLocation ue{rng.uniform(g.bjornson_distance(), g.rayleigh_distance() / 8.0),
                          rng.uniform(kPi / 6.0, 5.0 * kPi / 6.0)};
      // Main-lobe region: pointwise relative error is meaningful.
      const double theta_main = std::clamp(ue.phi + rng.uniform(-0.2, 0.2), 0.0, kPi);
      const double e = leakage_gain(LeakageBackend::Exact, g, ue, theta_main);
      const double f = leakage_gain(LeakageBackend::Fresnel, g, ue, theta_main);
      const double rel = std::abs(f - e) / e;
      sum_rel_main += rel;
      max_rel_main = std::max(max_rel_main, rel);
      // Anywhere: error relative to the pattern peak.
      const double theta_any = rng.uniform(0.0, kPi);
      const double peak = leakage_gain(LeakageBackend::Exact, g, ue, ue.phi);
      const double err = std::abs(leakage_gain(LeakageBackend::Fresnel, g, ue, theta_any) -
                                  leakage_gain(LeakageBackend::Exact, g, ue, theta_any));
      max_peak_norm = std::max(max_peak_norm, err / peak);
    }
    MESSAGE("main-lobe mean rel " << sum_rel_main / draws << ", max " << max_rel_main
                                  << "; peak-normalized max " << max_peak_norm);
    CHECK(sum_rel_main / draws < 0.05);
    CHECK(max_rel_main < 0.05);
    CHECK(max_peak_norm < 0.05);
  }

  TEST_CASE("gradients match central differences") {
    const auto g = table_one();
    Rng rng(1234);
    for (auto backend : {LeakageBackend::Exact, LeakageBackend::Fresnel}) {
      CAPTURE(to_string(backend));
      for (int t = 0; t < 200; ++t) {
        const UeLocation ue{rng.uniform(2.5, 11.5), rng.uniform(kPi / 6.0 + 0.05, 5.0 * kPi / 6.0 - 0.05)};
        const double theta = std::clamp(ue.phi + rng.uniform(-0.3, 0.3), 0.01, kPi - 0.01);
        const auto grad = leakage_gradient(backend, g, ue, theta);
        const double hd = 1e-5 * ue.d;
        const double hp = 1e-5 * ue.phi;
        const double fd_d = oracle::central_diff4(
            [&](double d) { return leakage_gain(backend, g, {d, ue.phi}, theta); }, ue.d, hd);
        const double fd_p = oracle::central_diff4(
            [&](double p) { return leakage_gain(backend, g, {ue.d, p}, theta); }, ue.phi, hp);
        const double scale = std::hypot(fd_d, fd_p);
        CAPTURE(ue.d);
        CAPTURE(ue.phi);
        CAPTURE(theta);
        CHECK(std::abs(grad.d_d - fd_d) <= 1e-4 * scale);
        CHECK(std::abs(grad.d_phi - fd_p) <= 1e-4 * scale);
      }
    }
  }

  TEST_CASE("beta2 channel of the closed-form gradient vanishes at the matched angle") {
    for (double b1 : {0.5, 2.0, 4.0825}) {
      const auto p = fresnel_gain_partials(100.0, {b1, 0.0});
      CHECK(std::abs(p.d_beta2) < 1e-12);
    }
  }

  TEST_CASE("exact and closed-form gradients agree at a Fresnel-valid point") {
    const auto g = table_one();
    const UeLocation ue{6.0, kPi / 2.0};
    const double theta = 70.0 * kPi / 180.0;
    const auto e = leakage_gradient(LeakageBackend::Exact, g, ue, theta);
    const auto f = leakage_gradient(LeakageBackend::Fresnel, g, ue, theta);
    const double scale = std::hypot(e.d_d, e.d_phi);
    CHECK(std::abs(e.d_d - f.d_d) <= 0.1 * scale);
    CHECK(std::abs(e.d_phi - f.d_phi) <= 0.1 * scale);
  }

  TEST_CASE("leakage pattern") {
    const auto g = table_one();
    // Off broadside, so no two ring sensors are equally close to the focus.
    const UeLocation ue{6.0, 1.45};
    CHECK(leakage_pattern(LeakageBackend::Exact, g, ue, {}, 0.2).gains.empty());

    SensorSet ring;
    for (int k = 0; k < 40; ++k) ring.push_back({120.0, kPi * (k + 0.5) / 40.0});
    const auto p1 = leakage_pattern(LeakageBackend::Exact, g, ue, ring, 0.2);
    const auto p3 = leakage_pattern(LeakageBackend::Exact, g, ue, ring, 0.6);
    for (std::size_t k = 0; k < ring.size(); ++k) {
      CHECK(p3.gains[k] == p1.gains[k]);
      CHECK(p3.mean_powers[k] == approx(3.0 * p1.mean_powers[k]));
    }
    const auto best = std::max_element(p1.mean_powers.begin(), p1.mean_powers.end()) -
                      p1.mean_powers.begin();
    std::size_t closest = 0;
    for (std::size_t k = 1; k < ring.size(); ++k) {
      if (std::abs(ring[k].theta - ue.phi) < std::abs(ring[closest].theta - ue.phi)) closest = k;
    }
    CHECK(static_cast<std::size_t>(best) == closest);

    CHECK_THROWS_AS(leakage_pattern(LeakageBackend::Exact, g, ue, {{50.0, 1.0}}, 0.2),
                    std::domain_error);
  }

  TEST_CASE("backend names") {
    CHECK(parse_backend("exact") == LeakageBackend::Exact);
    CHECK(parse_backend("fresnel") == LeakageBackend::Fresnel);
    CHECK(to_string(LeakageBackend::Fresnel) == "fresnel");
    CHECK_THROWS_AS(parse_backend("other"), std::invalid_argument);
  }
}
