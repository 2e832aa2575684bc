#pragma once

// The CRNN: seven conv blocks (conv 3x3 -> batch norm -> ReLU -> dropout ->
// average pool), after which the frequency axis has extent one and is
// dropped, then a stacked bidirectional GRU, a dense layer and a sigmoid
// for frame probabilities. Clip probabilities come from linear softmax
// pooling over time.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sedkit/errors.hpp"
#include "sedkit/nn/gru.hpp"
#include "sedkit/nn/ops.hpp"
#include "sedkit/nn/params.hpp"
#include "sedkit/preset.hpp"
#include "sedkit/rng.hpp"
#include "sedkit/tensor.hpp"

namespace sedkit {

constexpr double kPoolEps = 1e-7;

// Frame-to-clip aggregation: clip_c = sum_t p^2 / (sum_t p + eps), which
// weights each frame by its own activation. Differentiable.
class LinearSoftmaxPool {
 public:
  // x: [B, T, C] -> [B, C].
  Tensor forward(const Tensor& x) {
    if (x.ndim() != 3) throw ShapeError("linear_softmax_pool: expected [B,T,C], got " + shape_str(x.shape));
    x_ = x;
    const std::int64_t B = x.dim(0), T = x.dim(1), C = x.dim(2);
    Tensor y(Shape{B, C});
    sums_ = Tensor(Shape{B, C});
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t c = 0; c < C; ++c) {
        double s1 = 0.0, s2 = 0.0;
        for (std::int64_t t = 0; t < T; ++t) {
          const double p = x(b, t, c);
          s1 += p;
          s2 += p * p;
        }
        sums_(b, c) = s1;
        y(b, c) = s2 / (s1 + kPoolEps);
      }
    return y;
  }

  // d(clip)/d(p_t) = (2 p_t (S1+eps) - S2) / (S1+eps)^2.
  Tensor backward(const Tensor& gout) {
    const std::int64_t B = x_.dim(0), T = x_.dim(1), C = x_.dim(2);
    gout.require_shape(Shape{B, C}, "linear_softmax_pool backward");
    Tensor gin(x_.shape);
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t c = 0; c < C; ++c) {
        const double denom = sums_(b, c) + kPoolEps;
        double s2 = 0.0;
        for (std::int64_t t = 0; t < T; ++t) s2 += x_(b, t, c) * x_(b, t, c);
        const double g = gout(b, c);
        for (std::int64_t t = 0; t < T; ++t)
          gin(b, t, c) = g * (2.0 * x_(b, t, c) * denom - s2) / (denom * denom);
      }
    return gin;
  }

 private:
  Tensor x_;
  Tensor sums_;
};

inline Tensor linear_softmax_pool(const Tensor& frame_probs) {
  LinearSoftmaxPool pool;
  return pool.forward(frame_probs);
}

// Output grid of a preset: frames per output step and seconds per output
// step (at the fixed 363/22050 input hop).
struct OutputResolution {
  int time_factor = 1;
  double frame_duration = 0.0;
};

inline OutputResolution output_resolution(const ScenarioPreset& preset) {
  preset.validate();
  OutputResolution r;
  r.time_factor = preset.time_factor();
  r.frame_duration = static_cast<double>(r.time_factor) * 363.0 / 22050.0;
  return r;
}

struct ModelConfig {
  std::vector<std::int64_t> channels = {16, 32, 64, 128, 128, 128, 128};
  std::int64_t gru_hidden = 128;
  std::int64_t gru_layers = 2;
  std::int64_t n_classes = 10;
  double dropout = 0.33;
};

class CrnnModel {
 public:
  struct Block {
    Block(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kt, std::int64_t kf, double drop, Rng& rng)
        : conv(in_ch, out_ch, rng), bn(out_ch), dropout(drop), pool(kt, kf) {}
    Conv2d conv;
    BatchNorm2d bn;
    ReLU relu;
    Dropout dropout;
    AvgPool2d pool;
  };

  struct Output {
    Tensor frame_probs;  // [B, T', C]
    Tensor clip_probs;   // [B, C]
  };

  CrnnModel(const ScenarioPreset& preset, const ModelConfig& config, std::uint64_t seed)
      : preset_(preset), config_(config) {
    preset_.validate();
    if (config_.channels.size() != preset_.pool_specs.size())
      throw ConfigError("model: channel plan must have one entry per block");
    Rng rng = Rng(seed).fork(1);
    std::int64_t in_ch = 1;
    for (std::size_t i = 0; i < config_.channels.size(); ++i) {
      blocks_.emplace_back(std::make_unique<Block>(in_ch, config_.channels[i], preset_.pool_specs[i].first,
                                                   preset_.pool_specs[i].second, config_.dropout, rng));
      in_ch = config_.channels[i];
    }
    gru_ = std::make_unique<BiGru>(in_ch, config_.gru_hidden, config_.gru_layers, rng);
    head_ = std::make_unique<Dense>(2 * config_.gru_hidden, config_.n_classes, rng);
  }

  const ScenarioPreset& preset() const { return preset_; }
  const ModelConfig& config() const { return config_; }

  ParamSet params() {
    ParamSet ps;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const std::string prefix = "block" + std::to_string(i);
      blocks_[i]->conv.collect(ps, prefix + ".conv");
      blocks_[i]->bn.collect(ps, prefix + ".bn");
    }
    gru_->collect(ps, "gru");
    head_->collect(ps, "head");
    return ps;
  }

  std::int64_t time_factor() const { return preset_.time_factor(); }

  std::int64_t out_frames(std::int64_t in_frames) const {
    std::int64_t t = in_frames;
    for (const auto& [kt, kf] : preset_.pool_specs) t /= kt;
    return t;
  }

  // x: [B, 1, T, 128]. Dropout runs only in train mode and needs an rng.
  Output forward(const Tensor& x, Mode mode, Rng* dropout_rng = nullptr) {
    if (x.ndim() != 4 || x.dim(1) != 1) throw ShapeError("crnn: expected [B,1,T,128], got " + shape_str(x.shape));
    if (x.dim(3) != preset_.freq_factor())
      throw ShapeError("crnn: expected " + std::to_string(preset_.freq_factor()) + " frequency bins");
    if (x.dim(2) < time_factor())
      throw ShapeError("crnn: need at least " + std::to_string(time_factor()) + " input frames, got " +
                       std::to_string(x.dim(2)));

    Tensor cur = x;
    for (auto& block : blocks_) {
      cur = block->conv.forward(cur);
      cur = block->bn.forward(cur, mode);
      cur = block->relu.forward(cur);
      cur = block->dropout.forward(cur, mode, dropout_rng);
      cur = block->pool.forward(cur);
    }
    if (cur.dim(3) != 1) throw ShapeError("crnn: frequency axis not fully pooled");

    // [B, C, T', 1] -> [B, T', C].
    const std::int64_t B = cur.dim(0), C = cur.dim(1), To = cur.dim(2);
    conv_out_shape_ = cur.shape;
    Tensor seq(Shape{B, To, C});
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t t = 0; t < To; ++t) seq(b, t, c) = cur(b, c, t, 0);

    Tensor hidden = gru_->forward(seq);
    Tensor logits = head_->forward(hidden);
    Output out;
    out.frame_probs = act_.forward(logits);
    out.clip_probs = pool_.forward(out.frame_probs);
    throw_if_nonfinite(out.frame_probs, "crnn frame probabilities");
    return out;
  }

  // Joint backward for both heads; gradients accumulate into the params.
  void backward(const Tensor& d_frame_probs, const Tensor& d_clip_probs) {
    Tensor d_frame = pool_.backward(d_clip_probs);
    for (std::size_t i = 0; i < d_frame.data.size(); ++i) d_frame.data[i] += d_frame_probs.data[i];
    Tensor d_logits = act_.backward(d_frame);
    Tensor d_hidden = head_->backward(d_logits);
    Tensor d_seq = gru_->backward(d_hidden);

    const std::int64_t B = conv_out_shape_[0], C = conv_out_shape_[1], To = conv_out_shape_[2];
    Tensor cur(conv_out_shape_);
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t t = 0; t < To; ++t) cur(b, c, t, 0) = d_seq(b, t, c);

    for (std::size_t i = blocks_.size(); i-- > 0;) {
      auto& block = blocks_[i];
      cur = block->pool.backward(cur);
      cur = block->dropout.backward(cur);
      cur = block->relu.backward(cur);
      cur = block->bn.backward(cur);
      cur = block->conv.backward(cur);
    }
  }

 private:
  ScenarioPreset preset_;
  ModelConfig config_;
  std::vector<std::unique_ptr<Block>> blocks_;
  std::unique_ptr<BiGru> gru_;
  std::unique_ptr<Dense> head_;
  Sigmoid act_;
  LinearSoftmaxPool pool_;
  Shape conv_out_shape_;
};

// Rebuilds the architecture hyperparameters from checkpoint tensor shapes.
inline ModelConfig infer_model_config(const std::map<std::string, Tensor>& archive) {
  ModelConfig config;
  config.channels.clear();
  for (int i = 0;; ++i) {
    const auto it = archive.find("block" + std::to_string(i) + ".conv.weight");
    if (it == archive.end()) break;
    config.channels.push_back(it->second.dim(0));
  }
  if (config.channels.empty()) throw ConfigError("checkpoint holds no conv blocks");
  config.gru_layers = 0;
  for (int i = 0;; ++i) {
    const auto it = archive.find("gru.l" + std::to_string(i) + ".fwd.w_ih");
    if (it == archive.end()) break;
    config.gru_hidden = it->second.dim(0) / 3;
    ++config.gru_layers;
  }
  if (config.gru_layers == 0) throw ConfigError("checkpoint holds no recurrent layers");
  const auto head = archive.find("head.weight");
  if (head == archive.end()) throw ConfigError("checkpoint holds no classifier head");
  config.n_classes = head->second.dim(1);
  return config;
}

}  // namespace sedkit
