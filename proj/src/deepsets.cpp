#include "nfleak/deepsets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "nfleak/errors.hpp"
#include "nfleak/observation.hpp"
#include "nfleak/random.hpp"

namespace nfleak {

namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;
using ConstMatMap = Eigen::Map<const MatrixXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;
using MatMap = Eigen::Map<MatrixXd>;
using VecMap = Eigen::Map<VectorXd>;
using SampleRefs = std::vector<const SetSample*>;

// Evaluation chunk size; bounds the K * width activations held at once.
constexpr std::size_t kEvalChunk = 256;
constexpr double kInvSqrt2 = 0.5 * std::numbers::sqrt2;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = std::exp(-0.5 * x * x) * 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return cdf + x * pdf;
}

ConstMatMap weight(const VectorXd& p, const DenseSlot& s) {
  return ConstMatMap(p.data() + s.w_offset, static_cast<Eigen::Index>(s.rows),
                     static_cast<Eigen::Index>(s.cols));
}

ConstVecMap bias(const VectorXd& p, const DenseSlot& s) {
  return ConstVecMap(p.data() + s.b_offset, static_cast<Eigen::Index>(s.rows));
}

struct Batch {
  MatrixXd x;                     // input_dim x total elements
  std::vector<Eigen::Index> seg;  // sample b owns columns [seg[b], seg[b+1])
  MatrixXd target;                // 2 x B, normalized labels
};

Batch assemble(const DeepSetsModel& model, const SampleRefs& samples) {
  Batch b;
  b.seg.reserve(samples.size() + 1);
  b.seg.push_back(0);
  for (const auto* s : samples) {
    if (s->elements.empty()) throw std::domain_error("DeepSets: empty input set");
    b.seg.push_back(b.seg.back() + static_cast<Eigen::Index>(s->elements.size()));
  }
  const auto& norm = model.normalizer();
  b.x.resize(static_cast<Eigen::Index>(model.architecture().input_dim), b.seg.back());
  b.target.resize(2, static_cast<Eigen::Index>(samples.size()));
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (const auto& e : samples[i]->elements) {
      const auto f = norm.features(e);
      b.x.col(col++) << f[0], f[1], f[2];
    }
    const auto t = norm.normalize_label(samples[i]->label);
    b.target(0, static_cast<Eigen::Index>(i)) = t[0];
    b.target(1, static_cast<Eigen::Index>(i)) = t[1];
  }
  return b;
}

struct Activations {
  std::vector<MatrixXd> pre;   // pre-activation of each hidden layer
  std::vector<MatrixXd> post;  // post[0] is the layer input
};

struct Cache {
  Activations encoder;
  MatrixXd tanh_wh;  // width x M
  RowVectorXd alpha;
  MatrixXd pooled;   // width x B
  std::vector<Activations> heads;
  MatrixXd output;   // 2 x B
};

// Dense stack with GELU after every layer except (optionally) the last.
MatrixXd dense_stack(const VectorXd& p, const std::vector<DenseSlot>& slots, MatrixXd input,
                     bool linear_last, Activations& act) {
  act.pre.clear();
  act.post.clear();
  act.post.push_back(std::move(input));
  for (std::size_t l = 0; l < slots.size(); ++l) {
    MatrixXd z = weight(p, slots[l]) * act.post.back();
    z.colwise() += bias(p, slots[l]);
    if (linear_last && l + 1 == slots.size()) return z;
    MatrixXd a = z.unaryExpr(&gelu);
    act.pre.push_back(std::move(z));
    act.post.push_back(std::move(a));
  }
  return act.post.back();
}

void softmax_segments(RowVectorXd& v, const std::vector<Eigen::Index>& seg) {
  for (std::size_t b = 0; b + 1 < seg.size(); ++b) {
    auto part = v.segment(seg[b], seg[b + 1] - seg[b]);
    const double m = part.maxCoeff();
    part = (part.array() - m).exp().matrix();
    part /= part.sum();
  }
}

Cache run_forward(const DeepSetsModel& model, const Batch& batch, double logit_shift) {
  const auto& p = model.parameters();
  const auto& lay = model.layout();
  const auto& arch = model.architecture();
  const auto w = static_cast<Eigen::Index>(arch.width);
  Cache c;
  const MatrixXd h = dense_stack(p, lay.encoder, batch.x, false, c.encoder);

  const ConstMatMap wa(p.data() + lay.attention_w, w, w);
  const ConstVecMap q(p.data() + lay.attention_q, w);
  c.tanh_wh = (wa * h).array().tanh().matrix();
  c.alpha = q.transpose() * c.tanh_wh;
  c.alpha.array() += logit_shift;
  softmax_segments(c.alpha, batch.seg);

  const auto n_samples = static_cast<Eigen::Index>(batch.seg.size() - 1);
  c.pooled = MatrixXd::Zero(w, n_samples);
  for (Eigen::Index b = 0; b < n_samples; ++b) {
    const auto len = batch.seg[b + 1] - batch.seg[b];
    c.pooled.col(b) = h.middleCols(batch.seg[b], len) * c.alpha.segment(batch.seg[b], len).transpose();
  }

  c.output.resize(2, n_samples);
  c.heads.resize(lay.heads.size());
  for (std::size_t k = 0; k < lay.heads.size(); ++k) {
    MatrixXd y = dense_stack(p, lay.heads[k], c.pooled, true, c.heads[k]);
    if (lay.heads.size() == 1) {
      c.output = std::move(y);
    } else {
      c.output.row(static_cast<Eigen::Index>(k)) = y.row(0);
    }
  }
  return c;
}

// Backpropagates d(output) through a dense stack built by dense_stack with a
// linear last layer; returns d(input).
MatrixXd dense_stack_backward(const VectorXd& p, VectorXd& g, const std::vector<DenseSlot>& slots,
                              const Activations& act, MatrixXd d_out, bool linear_last) {
  for (std::size_t l = slots.size(); l-- > 0;) {
    const auto& s = slots[l];
    MatrixXd dz;
    if (linear_last && l + 1 == slots.size()) {
      dz = std::move(d_out);
    } else {
      dz = d_out.cwiseProduct(act.pre[l].unaryExpr(&gelu_grad));
    }
    MatMap(g.data() + s.w_offset, static_cast<Eigen::Index>(s.rows),
           static_cast<Eigen::Index>(s.cols)) += dz * act.post[l].transpose();
    VecMap(g.data() + s.b_offset, static_cast<Eigen::Index>(s.rows)) += dz.rowwise().sum();
    d_out = weight(p, s).transpose() * dz;
  }
  return d_out;
}

double mse(const MatrixXd& out, const MatrixXd& target) {
  return (out - target).squaredNorm() / static_cast<double>(out.size());
}

LossAndGradient backward_refs(const DeepSetsModel& model, const SampleRefs& samples,
                              double logit_shift) {
  if (samples.empty()) throw std::domain_error("backward: empty batch");
  const auto& p = model.parameters();
  const auto& lay = model.layout();
  const auto w = static_cast<Eigen::Index>(model.architecture().width);
  const Batch batch = assemble(model, samples);
  const Cache c = run_forward(model, batch, logit_shift);

  LossAndGradient out;
  out.loss = mse(c.output, batch.target);
  out.gradient = VectorXd::Zero(static_cast<Eigen::Index>(lay.total));
  VectorXd& g = out.gradient;

  const MatrixXd d_output = 2.0 * (c.output - batch.target) / static_cast<double>(c.output.size());
  MatrixXd d_pooled = MatrixXd::Zero(w, d_output.cols());
  for (std::size_t k = 0; k < lay.heads.size(); ++k) {
    MatrixXd d_head = lay.heads.size() == 1 ? d_output : MatrixXd(d_output.row(static_cast<Eigen::Index>(k)));
    d_pooled += dense_stack_backward(p, g, lay.heads[k], c.heads[k], std::move(d_head), true);
  }

  // Attention pooling.
  const MatrixXd& h = c.encoder.post.back();
  MatrixXd d_h = MatrixXd::Zero(h.rows(), h.cols());
  RowVectorXd d_logits(h.cols());
  for (std::size_t b = 0; b + 1 < batch.seg.size(); ++b) {
    const auto start = batch.seg[b];
    const auto len = batch.seg[b + 1] - start;
    const auto col = static_cast<Eigen::Index>(b);
    const auto alpha = c.alpha.segment(start, len);
    d_h.middleCols(start, len) = d_pooled.col(col) * alpha;
    const RowVectorXd d_alpha = d_pooled.col(col).transpose() * h.middleCols(start, len);
    const double centered = d_alpha.dot(alpha);
    d_logits.segment(start, len) = alpha.cwiseProduct((d_alpha.array() - centered).matrix());
  }
  const ConstMatMap wa(p.data() + lay.attention_w, w, w);
  const ConstVecMap q(p.data() + lay.attention_q, w);
  VecMap(g.data() + lay.attention_q, w) += c.tanh_wh * d_logits.transpose();
  const MatrixXd d_u =
      (q * d_logits).cwiseProduct((1.0 - c.tanh_wh.array().square()).matrix());
  MatMap(g.data() + lay.attention_w, w, w) += d_u * h.transpose();
  d_h += wa.transpose() * d_u;

  dense_stack_backward(p, g, lay.encoder, c.encoder, std::move(d_h), false);
  return out;
}

double loss_refs(const DeepSetsModel& model, const SampleRefs& samples) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < samples.size(); start += kEvalChunk) {
    const std::size_t end = std::min(samples.size(), start + kEvalChunk);
    const SampleRefs chunk(samples.begin() + static_cast<std::ptrdiff_t>(start),
                           samples.begin() + static_cast<std::ptrdiff_t>(end));
    const Batch batch = assemble(model, chunk);
    const Cache c = run_forward(model, batch, 0.0);
    total += (c.output - batch.target).squaredNorm();
    count += static_cast<std::size_t>(c.output.size());
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

SampleRefs refs_of(std::span<const SetSample> samples) {
  SampleRefs r;
  r.reserve(samples.size());
  for (const auto& s : samples) r.push_back(&s);
  return r;
}

VectorXd initial_parameters(const ParameterLayout& lay, std::size_t width, std::uint64_t seed) {
  Rng rng(derive_seed(seed, streams::kInit));
  VectorXd p(static_cast<Eigen::Index>(lay.total));
  auto fill = [&](std::size_t offset, std::size_t count, double bound) {
    for (std::size_t i = 0; i < count; ++i) {
      p[static_cast<Eigen::Index>(offset + i)] = rng.uniform(-bound, bound);
    }
  };
  auto fill_dense = [&](const DenseSlot& s) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.cols));
    fill(s.w_offset, s.rows * s.cols, bound);
    fill(s.b_offset, s.rows, bound);
  };
  for (const auto& s : lay.encoder) fill_dense(s);
  const double wb = 1.0 / std::sqrt(static_cast<double>(width));
  fill(lay.attention_w, width * width, wb);
  fill(lay.attention_q, width, 0.1 * wb);
  for (const auto& head : lay.heads) {
    for (const auto& s : head) fill_dense(s);
  }
  return p;
}

}  // namespace

FeatureNormalizer FeatureNormalizer::fit(std::span<const SetSample> samples, const LabelBox& box) {
  if (!(box.d_min < box.d_max) || !(box.phi_min < box.phi_max)) {
    throw std::domain_error("FeatureNormalizer: degenerate label box");
  }
  FeatureNormalizer n;
  n.box = box;
  std::array<double, 3> sum{0.0, 0.0, 0.0};
  std::array<double, 3> sq{0.0, 0.0, 0.0};
  std::size_t count = 0;
  for (const auto& s : samples) {
    for (const auto& e : s.elements) {
      const std::array<double, 3> raw{std::log1p(std::max(e.z, 0.0)), e.d, e.theta};
      for (int i = 0; i < 3; ++i) {
        sum[i] += raw[i];
        sq[i] += raw[i] * raw[i];
      }
      ++count;
    }
  }
  if (count == 0) return n;
  for (int i = 0; i < 3; ++i) {
    n.mean[i] = sum[i] / static_cast<double>(count);
    const double var = sq[i] / static_cast<double>(count) - n.mean[i] * n.mean[i];
    n.scale[i] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  return n;
}

std::array<double, 3> FeatureNormalizer::features(const SetElement& e) const {
  const std::array<double, 3> raw{std::log1p(std::max(e.z, 0.0)), e.d, e.theta};
  return {(raw[0] - mean[0]) / scale[0], (raw[1] - mean[1]) / scale[1],
          (raw[2] - mean[2]) / scale[2]};
}

std::array<double, 2> FeatureNormalizer::normalize_label(const UeLocation& psi) const {
  return {(psi.d - box.d_min) / (box.d_max - box.d_min),
          (psi.phi - box.phi_min) / (box.phi_max - box.phi_min)};
}

UeLocation FeatureNormalizer::denormalize(double d_unit, double phi_unit) const {
  return {box.d_min + d_unit * (box.d_max - box.d_min),
          box.phi_min + phi_unit * (box.phi_max - box.phi_min)};
}

Architecture Architecture::with_width(std::size_t width) {
  Architecture a;
  a.width = width;
  a.decoder_hidden = {width, std::max<std::size_t>(1, width / 2), std::max<std::size_t>(1, width / 4)};
  return a;
}

ParameterLayout ParameterLayout::build(const Architecture& arch) {
  if (arch.width == 0 || arch.encoder_layers == 0 || arch.input_dim == 0) {
    throw std::invalid_argument("Architecture: width, depth and input size must be positive");
  }
  ParameterLayout lay;
  std::size_t off = 0;
  auto dense = [&](std::size_t in, std::size_t out) {
    DenseSlot s{off, off + in * out, out, in};
    off += in * out + out;
    return s;
  };
  std::size_t in = arch.input_dim;
  for (std::size_t l = 0; l < arch.encoder_layers; ++l) {
    lay.encoder.push_back(dense(in, arch.width));
    in = arch.width;
  }
  lay.attention_w = off;
  off += arch.width * arch.width;
  lay.attention_q = off;
  off += arch.width;
  const std::size_t n_heads = arch.two_heads ? 2 : 1;
  const std::size_t out_dim = arch.two_heads ? 1 : 2;
  for (std::size_t h = 0; h < n_heads; ++h) {
    std::vector<DenseSlot> head;
    std::size_t hin = arch.width;
    for (std::size_t hidden : arch.decoder_hidden) {
      head.push_back(dense(hin, hidden));
      hin = hidden;
    }
    head.push_back(dense(hin, out_dim));
    lay.heads.push_back(std::move(head));
  }
  lay.total = off;
  return lay;
}

DeepSetsModel::DeepSetsModel(Architecture arch, FeatureNormalizer normalizer,
                             std::uint64_t init_seed)
    : arch_(std::move(arch)),
      normalizer_(normalizer),
      layout_(ParameterLayout::build(arch_)),
      init_seed_(init_seed) {
  params_ = initial_parameters(layout_, arch_.width, init_seed);
}

DeepSetsModel::DeepSetsModel(Architecture arch, FeatureNormalizer normalizer,
                             Eigen::VectorXd params, std::uint64_t init_seed)
    : arch_(std::move(arch)),
      normalizer_(normalizer),
      layout_(ParameterLayout::build(arch_)),
      params_(std::move(params)),
      init_seed_(init_seed) {
  if (static_cast<std::size_t>(params_.size()) != layout_.total) {
    throw std::invalid_argument("DeepSetsModel: parameter count does not match architecture");
  }
}

UeLocation DeepSetsModel::forward(std::span<const SetElement> elements) const {
  if (elements.empty()) throw std::domain_error("DeepSets forward: empty input set");
  const SetSample s{{elements.begin(), elements.end()}, {normalizer_.box.d_min, normalizer_.box.phi_min}};
  const Batch batch = assemble(*this, {&s});
  const Cache c = run_forward(*this, batch, 0.0);
  return normalizer_.denormalize(c.output(0, 0), c.output(1, 0));
}

std::vector<UeLocation> DeepSetsModel::predict(std::span<const SetSample> samples) const {
  const SampleRefs all = refs_of(samples);
  std::vector<UeLocation> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < all.size(); start += kEvalChunk) {
    const std::size_t end = std::min(all.size(), start + kEvalChunk);
    const SampleRefs chunk(all.begin() + static_cast<std::ptrdiff_t>(start),
                           all.begin() + static_cast<std::ptrdiff_t>(end));
    const Cache c = run_forward(*this, assemble(*this, chunk), 0.0);
    for (Eigen::Index b = 0; b < c.output.cols(); ++b) {
      out.push_back(normalizer_.denormalize(c.output(0, b), c.output(1, b)));
    }
  }
  return out;
}

std::vector<double> DeepSetsModel::attention_weights(std::span<const SetElement> elements) const {
  if (elements.empty()) throw std::domain_error("DeepSets: empty input set");
  const SetSample s{{elements.begin(), elements.end()}, {normalizer_.box.d_min, normalizer_.box.phi_min}};
  const Cache c = run_forward(*this, assemble(*this, {&s}), 0.0);
  return {c.alpha.data(), c.alpha.data() + c.alpha.size()};
}

Eigen::VectorXd DeepSetsModel::pooled(std::span<const SetElement> elements) const {
  if (elements.empty()) throw std::domain_error("DeepSets: empty input set");
  const SetSample s{{elements.begin(), elements.end()}, {normalizer_.box.d_min, normalizer_.box.phi_min}};
  const Cache c = run_forward(*this, assemble(*this, {&s}), 0.0);
  return c.pooled.col(0);
}

LossAndGradient backward(const DeepSetsModel& model, std::span<const SetSample> batch,
                         double attention_logit_shift) {
  return backward_refs(model, refs_of(batch), attention_logit_shift);
}

double batch_loss(const DeepSetsModel& model, std::span<const SetSample> batch) {
  return loss_refs(model, refs_of(batch));
}

TrainResult train(std::span<const SetSample> train_set, std::span<const SetSample> val_set,
                  const Architecture& arch, const LabelBox& box, const TrainConfig& cfg) {
  DeepSetsModel model(arch, FeatureNormalizer::fit(train_set, box), cfg.seed);
  return train(std::move(model), train_set, val_set, cfg);
}

TrainResult train(DeepSetsModel model, std::span<const SetSample> train_set,
                  std::span<const SetSample> val_set, const TrainConfig& cfg) {
  if (train_set.empty() || val_set.empty()) {
    throw std::invalid_argument("train: training and validation sets must be nonempty");
  }
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");

  const SampleRefs train_refs = refs_of(train_set);
  const SampleRefs val_refs = refs_of(val_set);
  const auto n_params = model.parameters().size();
  VectorXd m = VectorXd::Zero(n_params);
  VectorXd v = VectorXd::Zero(n_params);
  Rng shuffle(derive_seed(cfg.seed, streams::kShuffle));
  std::vector<std::size_t> order(train_refs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainHistory hist;
  hist.best_val_loss = std::numeric_limits<double>::infinity();
  VectorXd best = model.parameters();
  std::size_t since_best = 0;
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.below(i)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      SampleRefs batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_refs[order[i]]);
      const auto lg = backward_refs(model, batch, 0.0);
      if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
        throw NumericalError("train: loss diverged at epoch " + std::to_string(epoch));
      }
      epoch_loss += lg.loss * static_cast<double>(end - start);

      ++step;
      m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * lg.gradient;
      v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * lg.gradient.cwiseAbs2();
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
      model.parameters().array() -=
          cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
    }
    hist.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    const double val = loss_refs(model, val_refs);
    if (!std::isfinite(val)) {
      throw NumericalError("train: validation loss diverged at epoch " + std::to_string(epoch));
    }
    hist.val_loss.push_back(val);
    if (val < hist.best_val_loss) {
      hist.best_val_loss = val;
      hist.best_epoch = epoch;
      best = model.parameters();
      since_best = 0;
    } else if (cfg.early_stopping && ++since_best >= cfg.patience) {
      hist.stopped_early = true;
      break;
    }
  }
  model.parameters() = best;
  return {std::move(model), std::move(hist)};
}

SetDataset make_dataset(const DatasetSpec& spec, std::size_t n_train, std::size_t n_val,
                        std::size_t n_test, std::uint64_t seed) {
  Rng labels(derive_seed(seed, streams::kDataset));
  const NoiseModel noise{spec.sigma2};
  std::uint64_t index = 0;
  auto make = [&](std::size_t count) {
    std::vector<SetSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double d = labels.uniform(spec.box.d_min, spec.box.d_max);
      const double phi = labels.uniform(spec.box.phi_min, spec.box.phi_max);
      const UeLocation psi{d, phi};
      const auto pattern = leakage_pattern(spec.backend, spec.geom, psi, spec.sensors, spec.p_t);
      const auto z = sample_mean_normalized(pattern, noise, spec.l,
                                            derive_seed(seed, streams::kNoise, index++));
      SetSample s;
      s.label = psi;
      s.elements.reserve(spec.sensors.size());
      for (std::size_t k = 0; k < spec.sensors.size(); ++k) {
        s.elements.push_back({z[k], spec.sensors[k].d, spec.sensors[k].theta});
      }
      out.push_back(std::move(s));
    }
    return out;
  };
  SetDataset ds;
  ds.train = make(n_train);
  ds.val = make(n_val);
  ds.test = make(n_test);
  return ds;
}

SetMse evaluate_mse(const DeepSetsModel& model, std::span<const SetSample> samples) {
  if (samples.empty()) return {};
  const auto pred = model.predict(samples);
  SetMse out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double ed = pred[i].d - samples[i].label.d;
    const double ep = pred[i].phi - samples[i].label.phi;
    out.d += ed * ed;
    out.phi += ep * ep;
  }
  out.d /= static_cast<double>(samples.size());
  out.phi /= static_cast<double>(samples.size());
  return out;
}

namespace {
constexpr const char* kCheckpointFormat = "nfleak-deepsets";
constexpr int kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const DeepSetsModel& model, const std::string& path) {
  using nlohmann::json;
  const auto& a = model.architecture();
  const auto& n = model.normalizer();
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["architecture"] = {{"input_dim", a.input_dim},
                       {"width", a.width},
                       {"encoder_layers", a.encoder_layers},
                       {"decoder_hidden", a.decoder_hidden},
                       {"two_heads", a.two_heads},
                       {"activation", "gelu"}};
  j["normalizer"] = {{"mean", n.mean},
                     {"scale", n.scale},
                     {"box", {n.box.d_min, n.box.d_max, n.box.phi_min, n.box.phi_max}}};
  j["init_seed"] = model.init_seed();
  const auto& p = model.parameters();
  j["parameters"] = std::vector<double>(p.data(), p.data() + p.size());

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw std::runtime_error("cannot write checkpoint " + tmp);
    os << j.dump() << '\n';
    if (!os) throw std::runtime_error("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

DeepSetsModel load_checkpoint(const std::string& path) {
  using nlohmann::json;
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open checkpoint " + path);
  const json j = json::parse(is);
  if (j.at("format") != kCheckpointFormat || j.at("version") != kCheckpointVersion) {
    throw std::invalid_argument("unsupported checkpoint format in " + path);
  }
  Architecture a;
  const auto& ja = j.at("architecture");
  a.input_dim = ja.at("input_dim").get<std::size_t>();
  a.width = ja.at("width").get<std::size_t>();
  a.encoder_layers = ja.at("encoder_layers").get<std::size_t>();
  a.decoder_hidden = ja.at("decoder_hidden").get<std::vector<std::size_t>>();
  a.two_heads = ja.at("two_heads").get<bool>();
  FeatureNormalizer n;
  n.mean = j.at("normalizer").at("mean").get<std::array<double, 3>>();
  n.scale = j.at("normalizer").at("scale").get<std::array<double, 3>>();
  const auto box = j.at("normalizer").at("box").get<std::array<double, 4>>();
  n.box = {box[0], box[1], box[2], box[3]};
  const auto params = j.at("parameters").get<std::vector<double>>();
  Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(params.data(), static_cast<Eigen::Index>(params.size()));
  return DeepSetsModel(std::move(a), n, std::move(p), j.at("init_seed").get<std::uint64_t>());
}

}  // namespace nfleak
