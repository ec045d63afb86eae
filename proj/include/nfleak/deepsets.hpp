#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nfleak/geometry.hpp"
#include "nfleak/leakage.hpp"

namespace nfleak {

/// One set element x_k = [z_k, d_k, theta_k].
struct SetElement {
  double z;
  double d;
  double theta;
};

/// Unordered set of sensor readings with its focal-point label.
struct SetSample {
  std::vector<SetElement> elements;
  UeLocation label;
};

/// Feasible box used to min-max normalize labels to [0, 1].
struct LabelBox {
  double d_min;
  double d_max;
  double phi_min;
  double phi_max;
};

/// Per-feature affine statistics frozen from training data. The power feature
/// is log(1 + max(z, 0)) before standardization.
struct FeatureNormalizer {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> scale{1.0, 1.0, 1.0};
  LabelBox box{0.0, 1.0, 0.0, 1.0};

  static FeatureNormalizer fit(std::span<const SetSample> samples, const LabelBox& box);
  std::array<double, 3> features(const SetElement& e) const;
  std::array<double, 2> normalize_label(const UeLocation& psi) const;
  UeLocation denormalize(double d_unit, double phi_unit) const;
};

struct Architecture {
  std::size_t input_dim = 3;
  std::size_t width = 256;           // encoder width and attention dimension
  std::size_t encoder_layers = 4;
  std::vector<std::size_t> decoder_hidden{256, 128, 64};
  bool two_heads = true;             // separate 1-output decoders for d and phi

  /// Decoder hidden widths [w, w/2, w/4] for a given encoder width.
  static Architecture with_width(std::size_t width);
};

/// Offsets of every tensor inside the flat parameter vector.
struct DenseSlot {
  std::size_t w_offset;
  std::size_t b_offset;
  std::size_t rows;  // outputs
  std::size_t cols;  // inputs
};

struct ParameterLayout {
  std::vector<DenseSlot> encoder;
  std::size_t attention_w = 0;  // width x width
  std::size_t attention_q = 0;  // width
  std::vector<std::vector<DenseSlot>> heads;
  std::size_t total = 0;

  static ParameterLayout build(const Architecture& arch);
};

/// DeepSets regressor with attention pooling:
///   h_k = encoder(x_k), alpha = softmax_k(q^T tanh(W h_k)),
///   psi_hat = decoder(sum_k alpha_k h_k).
class DeepSetsModel {
 public:
  DeepSetsModel(Architecture arch, FeatureNormalizer normalizer, std::uint64_t init_seed);
  DeepSetsModel(Architecture arch, FeatureNormalizer normalizer, Eigen::VectorXd params,
                std::uint64_t init_seed);

  /// Throws std::domain_error for an empty set.
  UeLocation forward(std::span<const SetElement> elements) const;
  std::vector<UeLocation> predict(std::span<const SetSample> samples) const;

  std::vector<double> attention_weights(std::span<const SetElement> elements) const;
  Eigen::VectorXd pooled(std::span<const SetElement> elements) const;

  const Architecture& architecture() const { return arch_; }
  const FeatureNormalizer& normalizer() const { return normalizer_; }
  const ParameterLayout& layout() const { return layout_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  Eigen::VectorXd& parameters() { return params_; }
  std::uint64_t init_seed() const { return init_seed_; }

 private:
  Architecture arch_;
  FeatureNormalizer normalizer_;
  ParameterLayout layout_;
  Eigen::VectorXd params_;
  std::uint64_t init_seed_;
};

struct LossAndGradient {
  double loss = 0.0;         // mean squared error on normalized labels
  Eigen::VectorXd gradient;  // same layout as the parameters
};

/// Batch MSE and its gradient by reverse-mode differentiation. The logit shift
/// adds a constant to every attention logit (softmax is invariant to it).
LossAndGradient backward(const DeepSetsModel& model, std::span<const SetSample> batch,
                         double attention_logit_shift = 0.0);

/// Batch MSE on normalized labels without gradients.
double batch_loss(const DeepSetsModel& model, std::span<const SetSample> batch);

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  bool early_stopping = true;
  std::uint64_t seed = 0;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

struct TrainResult {
  DeepSetsModel model;
  TrainHistory history;
};

/// Minibatch Adam with per-epoch validation; returns the parameters with the
/// lowest validation loss. Throws NumericalError when the loss diverges.
TrainResult train(std::span<const SetSample> train_set, std::span<const SetSample> val_set,
                  const Architecture& arch, const LabelBox& box, const TrainConfig& cfg);

/// Continues training from an initialized model.
TrainResult train(DeepSetsModel model, std::span<const SetSample> train_set,
                  std::span<const SetSample> val_set, const TrainConfig& cfg);

/// Everything needed to simulate one sensor set's dataset.
struct DatasetSpec {
  ArrayGeometry geom;
  SensorSet sensors;
  LabelBox box;
  double p_t;
  double sigma2;
  std::size_t l;
  LeakageBackend backend = LeakageBackend::Exact;
};

struct SetDataset {
  std::vector<SetSample> train;
  std::vector<SetSample> val;
  std::vector<SetSample> test;
};

/// Labels uniform over the box; element k carries the mean statistic of
/// sensor k from a simulated block plus the sensor's (d_k, theta_k).
SetDataset make_dataset(const DatasetSpec& spec, std::size_t n_train, std::size_t n_val,
                        std::size_t n_test, std::uint64_t seed);

/// Mean squared errors in natural units (m^2, rad^2).
struct SetMse {
  double d = 0.0;
  double phi = 0.0;
};
SetMse evaluate_mse(const DeepSetsModel& model, std::span<const SetSample> samples);

/// Versioned JSON checkpoint: architecture, normalizer, seed, parameters.
void save_checkpoint(const DeepSetsModel& model, const std::string& path);
DeepSetsModel load_checkpoint(const std::string& path);

}  // namespace nfleak
