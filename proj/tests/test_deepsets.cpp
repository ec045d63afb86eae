#include <doctest.h>

#include "approx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <stdexcept>

#include "nfleak/deepsets.hpp"
#include "nfleak/random.hpp"

using namespace nfleak;

namespace {

const double kPi = std::numbers::pi;
const LabelBox kBox{2.0, 12.0, kPi / 6.0, 5.0 * kPi / 6.0};

SetSample random_sample(Rng& rng, std::size_t k) {
  SetSample s;
  for (std::size_t i = 0; i < k; ++i) {
    s.elements.push_back({rng.uniform(0.0, 30.0), rng.uniform(100.0, 150.0), rng.uniform(0.0, kPi)});
  }
  s.label = {rng.uniform(kBox.d_min, kBox.d_max), rng.uniform(kBox.phi_min, kBox.phi_max)};
  return s;
}

std::vector<SetSample> random_samples(std::size_t n, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SetSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_sample(rng, k));
  return out;
}

DeepSetsModel small_model(std::size_t width, std::uint64_t seed,
                          const std::vector<SetSample>& fit_on) {
  return DeepSetsModel(Architecture::with_width(width), FeatureNormalizer::fit(fit_on, kBox), seed);
}

// Labels driven by the features, so a small network can fit them.
std::vector<SetSample> learnable_samples(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SetSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    SetSample s;
    const double d = rng.uniform(kBox.d_min, kBox.d_max);
    const double phi = rng.uniform(kBox.phi_min, kBox.phi_max);
    for (int k = 0; k < 5; ++k) {
      const double theta = kPi * (k + 0.5) / 5.0;
      const double z = 40.0 * std::exp(-std::pow(theta - phi, 2) / 0.2) / d;
      s.elements.push_back({z, 120.0, theta});
    }
    s.label = {d, phi};
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_SUITE("deepsets") {
  TEST_CASE("architecture and layout") {
    const auto a = Architecture::with_width(64);
    CHECK(a.width == 64);
    CHECK(a.decoder_hidden == std::vector<std::size_t>{64, 32, 16});
    CHECK(a.encoder_layers == 4);
    const auto layout = ParameterLayout::build(a);
    CHECK(layout.encoder.size() == 4);
    CHECK(layout.heads.size() == 2);
    std::size_t expected = 3 * 64 + 64 + 3 * (64 * 64 + 64) + 64 * 64 + 64;
    for (int h = 0; h < 2; ++h) expected += 64 * 64 + 64 + 64 * 32 + 32 + 32 * 16 + 16 + 16 + 1;
    CHECK(layout.total == expected);
  }

  TEST_CASE("output is invariant to element order") {
    const auto fit = random_samples(50, 8, 1);
    Rng rng(2);
    for (std::uint64_t m = 0; m < 100; ++m) {
      const auto model = small_model(16, m, fit);
      auto s = random_sample(rng, 2 + rng.below(20));
      const auto base = model.forward(s.elements);
      for (int p = 0; p < 3; ++p) {
        for (std::size_t i = s.elements.size(); i > 1; --i) {
          std::swap(s.elements[i - 1], s.elements[rng.below(i)]);
        }
        const auto out = model.forward(s.elements);
        REQUIRE(std::abs(out.d - base.d) < 1e-6);
        REQUIRE(std::abs(out.phi - base.phi) < 1e-6);
      }
    }
  }

  TEST_CASE("attention weights") {
    const auto fit = random_samples(50, 8, 3);
    const auto model = small_model(16, 4, fit);
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
      const auto s = random_sample(rng, 1 + rng.below(30));
      const auto a = model.attention_weights(s.elements);
      double sum = 0.0;
      for (double w : a) {
        REQUIRE(w >= 0.0);
        sum += w;
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    const auto one = random_sample(rng, 1);
    CHECK(model.attention_weights(one.elements) == std::vector<double>{1.0});
    CHECK((model.pooled(one.elements) - model.pooled(one.elements)).norm() == 0.0);

    // Replicating every element leaves the attention-weighted pool unchanged.
    const auto s = random_sample(rng, 6);
    auto doubled = s.elements;
    doubled.insert(doubled.end(), s.elements.begin(), s.elements.end());
    CHECK((model.pooled(doubled) - model.pooled(s.elements)).norm() <
          1e-12 * (1.0 + model.pooled(s.elements).norm()));
  }

  TEST_CASE("empty set is rejected") {
    const auto fit = random_samples(10, 4, 6);
    const auto model = small_model(8, 1, fit);
    CHECK_THROWS_AS(model.forward({}), std::domain_error);
  }

  TEST_CASE("backward matches finite differences") {
    const auto batch = random_samples(4, 3, 7);
    auto model = small_model(8, 8, batch);
    const auto lg = backward(model, batch);
    CHECK(lg.loss == approx(batch_loss(model, batch)).epsilon(1e-12));
    const auto n = model.parameters().size();
    REQUIRE(lg.gradient.size() == n);
    int bad = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double saved = model.parameters()[i];
      const double h = 1e-6 * std::max(1.0, std::abs(saved));
      model.parameters()[i] = saved + h;
      const double up = batch_loss(model, batch);
      model.parameters()[i] = saved - h;
      const double down = batch_loss(model, batch);
      model.parameters()[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double g = lg.gradient[i];
      if (std::abs(g - fd) > 1e-3 * std::max(std::abs(fd), 1e-6)) {
        ++bad;
        MESSAGE("parameter " << i << ": analytic " << g << ", numeric " << fd);
      }
    }
    CHECK(bad == 0);
  }

  TEST_CASE("gradient vanishes when predictions equal labels") {
    const auto fit = random_samples(10, 4, 9);
    const auto model = small_model(8, 10, fit);
    auto batch = random_samples(5, 4, 11);
    for (auto& s : batch) s.label = model.forward(s.elements);
    const auto lg = backward(model, batch);
    CHECK(lg.loss < 1e-24);
    CHECK(lg.gradient.norm() < 1e-10);
  }

  TEST_CASE("attention logit shift leaves loss and gradient unchanged") {
    const auto batch = random_samples(6, 5, 12);
    const auto model = small_model(8, 13, batch);
    const auto a = backward(model, batch, 0.0);
    const auto b = backward(model, batch, 37.5);
    CHECK(b.loss == approx(a.loss).epsilon(1e-10));
    CHECK((a.gradient - b.gradient).norm() <= 1e-8 * (1.0 + a.gradient.norm()));
  }

  TEST_CASE("label and feature normalization") {
    const auto data = random_samples(100, 5, 14);
    const auto f = FeatureNormalizer::fit(data, kBox);
    const auto u = f.normalize_label({7.0, kPi / 2.0});
    CHECK(u[0] == approx(0.5));
    CHECK(u[1] == approx(0.5));
    const auto back = f.denormalize(u[0], u[1]);
    CHECK(back.d == approx(7.0));
    CHECK(back.phi == approx(kPi / 2.0));
    // Fitted features are standardized over the training elements.
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    double count = 0.0;
    for (const auto& s : data) {
      for (const auto& e : s.elements) {
        const auto x = f.features(e);
        for (int c = 0; c < 3; ++c) mean[c] += x[c];
        count += 1.0;
      }
    }
    for (int c = 0; c < 3; ++c) CHECK(std::abs(mean[c] / count) < 1e-10);
  }

  TEST_CASE("small network overfits a small training set") {
    const auto data = learnable_samples(200, 15);
    TrainConfig cfg;
    cfg.learning_rate = 3e-3;
    cfg.batch_size = 32;
    cfg.max_epochs = 2000;
    cfg.early_stopping = false;
    cfg.seed = 16;
    const auto result = train(data, data, Architecture::with_width(32), kBox, cfg);
    // Label variance of a uniform box label in normalized units is 1/12.
    const double final_loss = result.history.train_loss.back();
    MESSAGE("final normalized train MSE " << final_loss << ", best val " << result.history.best_val_loss);
    CHECK(result.history.best_val_loss < 0.1 * (1.0 / 12.0));
    CHECK(result.history.train_loss.size() == 2000);
    CHECK_FALSE(result.history.stopped_early);
  }

  TEST_CASE("training is deterministic and restores the best epoch") {
    const auto train_set = learnable_samples(120, 17);
    const auto val_set = learnable_samples(60, 18);
    TrainConfig cfg;
    cfg.max_epochs = 30;
    cfg.patience = 5;
    cfg.seed = 19;
    const auto a = train(train_set, val_set, Architecture::with_width(8), kBox, cfg);
    const auto b = train(train_set, val_set, Architecture::with_width(8), kBox, cfg);
    CHECK(a.history.val_loss == b.history.val_loss);
    CHECK(a.model.parameters() == b.model.parameters());
    CHECK(batch_loss(a.model, val_set) == approx(a.history.best_val_loss).epsilon(1e-12));
    CHECK(a.history.best_val_loss == *std::min_element(a.history.val_loss.begin(), a.history.val_loss.end()));

    auto other = cfg;
    other.seed = 20;
    const auto c = train(train_set, val_set, Architecture::with_width(8), kBox, other);
    CHECK(c.model.parameters() != a.model.parameters());

    CHECK_THROWS_AS(train({}, val_set, Architecture::with_width(8), kBox, cfg), std::invalid_argument);
  }

  TEST_CASE("dataset generation") {
    const auto geom = ArrayGeometry::half_wavelength(100, wavelength_from_frequency(15e9));
    SensorSet sensors;
    Rng rng(21);
    for (int k = 0; k < 6; ++k) sensors.push_back({rng.uniform(100.0, 150.0), rng.uniform(0.0, kPi)});
    const DatasetSpec spec{geom, sensors, kBox, 0.2, 1e-12, 10, LeakageBackend::Exact};
    const auto none = make_dataset(spec, 0, 0, 0, 1);
    CHECK(none.train.empty());
    CHECK(none.test.empty());

    const auto ds = make_dataset(spec, 4000, 10, 5, 22);
    CHECK(ds.train.size() == 4000);
    CHECK(ds.val.size() == 10);
    CHECK(ds.test.size() == 5);
    double sd = 0.0;
    double sp = 0.0;
    for (const auto& s : ds.train) {
      REQUIRE(s.elements.size() == 6);
      for (std::size_t k = 0; k < 6; ++k) {
        REQUIRE(s.elements[k].d == sensors[k].d);
        REQUIRE(s.elements[k].theta == sensors[k].theta);
        REQUIRE(s.elements[k].z >= -1.0);
      }
      REQUIRE(s.label.d >= kBox.d_min);
      REQUIRE(s.label.d <= kBox.d_max);
      sd += s.label.d;
      sp += s.label.phi;
    }
    const double n = 4000.0;
    CHECK(std::abs(sd / n - 7.0) < 4.0 * 10.0 / std::sqrt(12.0 * n));
    CHECK(std::abs(sp / n - kPi / 2.0) < 4.0 * (2.0 * kPi / 3.0) / std::sqrt(12.0 * n));

    const auto again = make_dataset(spec, 4000, 10, 5, 22);
    CHECK(again.test[3].elements[2].z == ds.test[3].elements[2].z);
  }

  TEST_CASE("checkpoint round trip") {
    const auto fit = random_samples(20, 4, 23);
    const auto model = small_model(8, 24, fit);
    const auto path = (std::filesystem::temp_directory_path() / "nfleak_ckpt_test.json").string();
    save_checkpoint(model, path);
    const auto loaded = load_checkpoint(path);
    std::filesystem::remove(path);
    CHECK(loaded.parameters() == model.parameters());
    CHECK(loaded.init_seed() == 24);
    CHECK(loaded.architecture().width == 8);
    const auto s = fit.front();
    const auto a = model.forward(s.elements);
    const auto b = loaded.forward(s.elements);
    CHECK(a.d == b.d);
    CHECK(a.phi == b.phi);
    CHECK_THROWS(load_checkpoint(path));
  }
}
