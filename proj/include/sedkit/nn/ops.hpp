#pragma once

// Differentiable primitives for the CRNN: 3x3 convolution, batch norm,
// ReLU/sigmoid, inverted dropout, non-overlapping average pooling and a
// dense layer. Each layer caches what its backward pass needs; backward
// accumulates parameter gradients and returns the input gradient.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sedkit/errors.hpp"
#include "sedkit/nn/params.hpp"
#include "sedkit/rng.hpp"
#include "sedkit/tensor.hpp"

namespace sedkit {

enum class Mode { kTrain, kEval };

inline void throw_if_nonfinite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw NumericalError(std::string("non-finite values in ") + what);
}

namespace detail {

// He-uniform over fan_in.
inline void init_he_uniform(Tensor& t, std::int64_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.uniform(-limit, limit);
}

inline void init_uniform(Tensor& t, double limit, Rng& rng) {
  for (double& v : t.data) v = rng.uniform(-limit, limit);
}

}  // namespace detail

// 3x3 convolution, stride 1, zero padding 1: spatial extents are preserved.
class Conv2d {
 public:
  Conv2d(std::int64_t in_ch, std::int64_t out_ch, Rng& rng)
      : in_ch_(in_ch), out_ch_(out_ch), weight(Shape{out_ch, in_ch, 3, 3}), bias(Shape{out_ch}) {
    detail::init_he_uniform(weight, in_ch * 9, rng);
  }

  Tensor weight;  // [out, in, 3, 3]
  Tensor bias;    // [out]

  void collect(ParamSet& ps, const std::string& prefix) {
    ps.add(prefix + ".weight", weight);
    ps.add(prefix + ".bias", bias);
  }

  Tensor forward(const Tensor& x) {
    check_input(x);
    x_ = x;
    const std::int64_t B = x.dim(0), T = x.dim(2), F = x.dim(3);
    Tensor y(Shape{B, out_ch_, T, F});
    std::vector<double> cols;
    for (std::int64_t b = 0; b < B; ++b) {
      im2col(x, b, cols);
      gemm_forward(cols, y, b);
    }
    return y;
  }

  Tensor backward(const Tensor& gout) {
    const std::int64_t B = x_.dim(0), T = x_.dim(2), F = x_.dim(3);
    gout.require_shape(Shape{B, out_ch_, T, F}, "conv2d backward");
    weight.ensure_grad();
    bias.ensure_grad();
    Tensor gin(x_.shape);
    const std::int64_t P = T * F;
    const std::int64_t R = in_ch_ * 9;
    std::vector<double> cols, dcols(static_cast<std::size_t>(R * P));
    for (std::int64_t b = 0; b < B; ++b) {
      im2col(x_, b, cols);
      const double* g = &gout.data[static_cast<std::size_t>(b * out_ch_ * P)];
      std::fill(dcols.begin(), dcols.end(), 0.0);

      for (std::int64_t p0 = 0; p0 < P; p0 += kTile) {
        const std::int64_t plen = std::min(kTile, P - p0);
        for (std::int64_t o = 0; o < out_ch_; ++o) {
          const double* __restrict go = g + o * P + p0;
          // db: blockwise sum with a fixed 4-way tree.
          bias.grad[static_cast<std::size_t>(o)] += block_sum(go, plen);
          double* __restrict wg = &weight.grad[static_cast<std::size_t>(o * R)];
          const double* __restrict w = &weight.data[static_cast<std::size_t>(o * R)];
          for (std::int64_t r = 0; r < R; ++r) {
            const double* __restrict cr = cols.data() + r * P + p0;
            wg[r] += block_dot(go, cr, plen);
            // dcols tile row r accumulates w[o][r] * go.
            double* __restrict dc = dcols.data() + r * P + p0;
            const double wv = w[r];
            for (std::int64_t p = 0; p < plen; ++p) dc[p] += wv * go[p];
          }
        }
      }
      col2im(dcols, gin, b);
    }
    return gin;
  }

 private:
  void check_input(const Tensor& x) const {
    if (x.ndim() != 4 || x.dim(1) != in_ch_)
      throw ShapeError("conv2d: expected [B," + std::to_string(in_ch_) + ",T,F], got " + shape_str(x.shape));
  }

  // cols[(ci*3+kt)*3+kf][t*F+f] = x[b, ci, t+kt-1, f+kf-1], zero outside.
  void im2col(const Tensor& x, std::int64_t b, std::vector<double>& cols) const {
    const std::int64_t T = x.dim(2), F = x.dim(3), P = T * F;
    cols.assign(static_cast<std::size_t>(in_ch_ * 9 * P), 0.0);
    for (std::int64_t ci = 0; ci < in_ch_; ++ci) {
      const double* xc = &x.data[static_cast<std::size_t>((b * in_ch_ + ci) * P)];
      for (int kt = 0; kt < 3; ++kt) {
        for (int kf = 0; kf < 3; ++kf) {
          double* row = cols.data() + ((ci * 3 + kt) * 3 + kf) * P;
          for (std::int64_t t = 0; t < T; ++t) {
            const std::int64_t tt = t + kt - 1;
            if (tt < 0 || tt >= T) continue;
            const double* src = xc + tt * F;
            double* dst = row + t * F;
            const std::int64_t f0 = std::max<std::int64_t>(0, 1 - kf);
            const std::int64_t f1 = std::min(F, F + 1 - kf);
            for (std::int64_t f = f0; f < f1; ++f) dst[f] = src[f + kf - 1];
          }
        }
      }
    }
  }

  void col2im(const std::vector<double>& dcols, Tensor& gin, std::int64_t b) const {
    const std::int64_t T = gin.dim(2), F = gin.dim(3), P = T * F;
    for (std::int64_t ci = 0; ci < in_ch_; ++ci) {
      double* gc = &gin.data[static_cast<std::size_t>((b * in_ch_ + ci) * P)];
      for (int kt = 0; kt < 3; ++kt) {
        for (int kf = 0; kf < 3; ++kf) {
          const double* row = dcols.data() + ((ci * 3 + kt) * 3 + kf) * P;
          for (std::int64_t t = 0; t < T; ++t) {
            const std::int64_t tt = t + kt - 1;
            if (tt < 0 || tt >= T) continue;
            double* dst = gc + tt * F;
            const double* src = row + t * F;
            const std::int64_t f0 = std::max<std::int64_t>(0, 1 - kf);
            const std::int64_t f1 = std::min(F, F + 1 - kf);
            for (std::int64_t f = f0; f < f1; ++f) dst[f + kf - 1] += src[f];
          }
        }
      }
    }
  }

  // Tile size (doubles) chosen so one cols row tile plus the output tiles
  // stay cache-resident while streaming the patch matrix once.
  static constexpr std::int64_t kTile = 2048;

  static double block_sum(const double* __restrict v, std::int64_t n) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::int64_t p = 0;
    for (; p + 4 <= n; p += 4) {
      a0 += v[p];
      a1 += v[p + 1];
      a2 += v[p + 2];
      a3 += v[p + 3];
    }
    for (; p < n; ++p) a0 += v[p];
    return (a0 + a1) + (a2 + a3);
  }

  static double block_dot(const double* __restrict a, const double* __restrict b, std::int64_t n) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::int64_t p = 0;
    for (; p + 4 <= n; p += 4) {
      a0 += a[p] * b[p];
      a1 += a[p + 1] * b[p + 1];
      a2 += a[p + 2] * b[p + 2];
      a3 += a[p + 3] * b[p + 3];
    }
    for (; p < n; ++p) a0 += a[p] * b[p];
    return (a0 + a1) + (a2 + a3);
  }

  void gemm_forward(const std::vector<double>& cols, Tensor& y, std::int64_t b) const {
    const std::int64_t P = y.dim(2) * y.dim(3);
    const std::int64_t R = in_ch_ * 9;
    for (std::int64_t p0 = 0; p0 < P; p0 += kTile) {
      const std::int64_t plen = std::min(kTile, P - p0);
      for (std::int64_t o = 0; o < out_ch_; ++o) {
        double* __restrict yo = &y.data[static_cast<std::size_t>((b * out_ch_ + o) * P + p0)];
        const double bo = bias.data[static_cast<std::size_t>(o)];
        for (std::int64_t p = 0; p < plen; ++p) yo[p] = bo;
        const double* __restrict w = &weight.data[static_cast<std::size_t>(o * R)];
        for (std::int64_t r = 0; r < R; ++r) {
          const double* __restrict cr = cols.data() + r * P + p0;
          const double wv = w[r];
          for (std::int64_t p = 0; p < plen; ++p) yo[p] += wv * cr[p];
        }
      }
    }
  }

  std::int64_t in_ch_, out_ch_;
  Tensor x_;
};

// Per-channel batch normalization over (B, T, F); eps 1e-5, running stats
// tracked with EMA factor 0.1 and used in eval mode.
class BatchNorm2d {
 public:
  explicit BatchNorm2d(std::int64_t channels)
      : channels_(channels),
        weight(Shape{channels}, 1.0),
        bias(Shape{channels}, 0.0),
        running_mean(Shape{channels}, 0.0),
        running_var(Shape{channels}, 1.0) {}

  Tensor weight, bias;               // affine
  Tensor running_mean, running_var;  // eval-mode statistics

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  void collect(ParamSet& ps, const std::string& prefix) {
    ps.add(prefix + ".weight", weight);
    ps.add(prefix + ".bias", bias);
    ps.add(prefix + ".running_mean", running_mean, /*trainable=*/false);
    ps.add(prefix + ".running_var", running_var, /*trainable=*/false);
  }

  Tensor forward(const Tensor& x, Mode mode) {
    if (x.ndim() != 4 || x.dim(1) != channels_)
      throw ShapeError("batch_norm: expected [B," + std::to_string(channels_) + ",T,F], got " + shape_str(x.shape));
    mode_ = mode;
    const std::int64_t B = x.dim(0), T = x.dim(2), F = x.dim(3);
    const std::int64_t plane = T * F;
    const double n = static_cast<double>(B * plane);

    xhat_ = Tensor(x.shape);
    invstd_.assign(static_cast<std::size_t>(channels_), 0.0);
    Tensor y(x.shape);

    for (std::int64_t c = 0; c < channels_; ++c) {
      double mean, var;
      if (mode == Mode::kTrain) {
        double s = 0.0, ss = 0.0;
        for (std::int64_t b = 0; b < B; ++b) {
          const double* p = &x.data[static_cast<std::size_t>((b * channels_ + c) * plane)];
          for (std::int64_t i = 0; i < plane; ++i) {
            s += p[i];
            ss += p[i] * p[i];
          }
        }
        mean = s / n;
        var = std::max(0.0, ss / n - mean * mean);
        auto ci = static_cast<std::size_t>(c);
        running_mean.data[ci] = (1.0 - kMomentum) * running_mean.data[ci] + kMomentum * mean;
        running_var.data[ci] = (1.0 - kMomentum) * running_var.data[ci] + kMomentum * var;
      } else {
        mean = running_mean.data[static_cast<std::size_t>(c)];
        var = running_var.data[static_cast<std::size_t>(c)];
      }
      const double inv = 1.0 / std::sqrt(var + kEps);
      invstd_[static_cast<std::size_t>(c)] = inv;
      const double g = weight.data[static_cast<std::size_t>(c)];
      const double be = bias.data[static_cast<std::size_t>(c)];
      for (std::int64_t b = 0; b < B; ++b) {
        const double* p = &x.data[static_cast<std::size_t>((b * channels_ + c) * plane)];
        double* xh = &xhat_.data[static_cast<std::size_t>((b * channels_ + c) * plane)];
        double* yo = &y.data[static_cast<std::size_t>((b * channels_ + c) * plane)];
        for (std::int64_t i = 0; i < plane; ++i) {
          xh[i] = (p[i] - mean) * inv;
          yo[i] = g * xh[i] + be;
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& gout) {
    gout.require_shape(xhat_.shape, "batch_norm backward");
    weight.ensure_grad();
    bias.ensure_grad();
    const std::int64_t B = gout.dim(0), plane = gout.dim(2) * gout.dim(3);
    const double n = static_cast<double>(B * plane);
    Tensor gin(gout.shape);

    for (std::int64_t c = 0; c < channels_; ++c) {
      const double g = weight.data[static_cast<std::size_t>(c)];
      const double inv = invstd_[static_cast<std::size_t>(c)];
      double sum_g = 0.0, sum_gx = 0.0;
      for (std::int64_t b = 0; b < B; ++b) {
        const double* go = &gout.data[static_cast<std::size_t>((b * channels_ + c) * plane)];
        const double* xh = &xhat_.data[static_cast<std::size_t>((b * channels_ + c) * plane)];
        for (std::int64_t i = 0; i < plane; ++i) {
          sum_g += go[i];
          sum_gx += go[i] * xh[i];
        }
      }
      weight.grad[static_cast<std::size_t>(c)] += sum_gx;
      bias.grad[static_cast<std::size_t>(c)] += sum_g;

      for (std::int64_t b = 0; b < B; ++b) {
        const double* go = &gout.data[static_cast<std::size_t>((b * channels_ + c) * plane)];
        const double* xh = &xhat_.data[static_cast<std::size_t>((b * channels_ + c) * plane)];
        double* gi = &gin.data[static_cast<std::size_t>((b * channels_ + c) * plane)];
        if (mode_ == Mode::kTrain) {
          for (std::int64_t i = 0; i < plane; ++i)
            gi[i] = g * inv * (go[i] - sum_g / n - xh[i] * sum_gx / n);
        } else {
          for (std::int64_t i = 0; i < plane; ++i) gi[i] = g * inv * go[i];
        }
      }
    }
    return gin;
  }

 private:
  std::int64_t channels_;
  Mode mode_ = Mode::kTrain;
  Tensor xhat_;
  std::vector<double> invstd_;
};

class ReLU {
 public:
  Tensor forward(const Tensor& x) {
    mask_.assign(x.data.size(), 0);
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      if (x.data[i] > 0.0) {
        y.data[i] = x.data[i];
        mask_[i] = 1;
      }
    }
    return y;
  }

  Tensor backward(const Tensor& gout) {
    if (gout.data.size() != mask_.size()) throw ShapeError("relu backward: size mismatch");
    Tensor gin(gout.shape);
    for (std::size_t i = 0; i < gout.data.size(); ++i) gin.data[i] = mask_[i] ? gout.data[i] : 0.0;
    return gin;
  }

 private:
  std::vector<unsigned char> mask_;
};

class Sigmoid {
 public:
  Tensor forward(const Tensor& x) {
    y_ = Tensor(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) y_.data[i] = 1.0 / (1.0 + std::exp(-x.data[i]));
    return y_;
  }

  Tensor backward(const Tensor& gout) {
    gout.require_shape(y_.shape, "sigmoid backward");
    Tensor gin(gout.shape);
    for (std::size_t i = 0; i < gout.data.size(); ++i)
      gin.data[i] = gout.data[i] * y_.data[i] * (1.0 - y_.data[i]);
    return gin;
  }

 private:
  Tensor y_;
};

// Inverted dropout: kept units are scaled by 1/(1-p) so the training-mode
// expectation equals the input; eval mode is the identity.
class Dropout {
 public:
  explicit Dropout(double p) : p_(p) {
    if (p < 0.0 || p >= 1.0) throw InvalidInput("dropout: p must be in [0,1)");
  }

  Tensor forward(const Tensor& x, Mode mode, Rng* rng) {
    if (mode == Mode::kEval || p_ == 0.0) {
      identity_ = true;
      return x;
    }
    if (rng == nullptr) throw InvalidInput("dropout: training mode needs an rng");
    identity_ = false;
    const double scale = 1.0 / (1.0 - p_);
    mask_.assign(x.data.size(), 0);
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      if (rng->uniform() >= p_) {
        mask_[i] = 1;
        y.data[i] = x.data[i] * scale;
      }
    }
    return y;
  }

  Tensor backward(const Tensor& gout) {
    if (identity_) return gout;
    if (gout.data.size() != mask_.size()) throw ShapeError("dropout backward: size mismatch");
    const double scale = 1.0 / (1.0 - p_);
    Tensor gin(gout.shape);
    for (std::size_t i = 0; i < gout.data.size(); ++i)
      gin.data[i] = mask_[i] ? gout.data[i] * scale : 0.0;
    return gin;
  }

 private:
  double p_;
  bool identity_ = true;
  std::vector<unsigned char> mask_;
};

// Non-overlapping average pooling (kernel == stride); trailing remainder
// rows/columns are dropped (floor semantics).
class AvgPool2d {
 public:
  AvgPool2d(std::int64_t kt, std::int64_t kf) : kt_(kt), kf_(kf) {
    if (kt < 1 || kf < 1) throw InvalidInput("avg_pool: kernel must be >= 1");
  }

  Tensor forward(const Tensor& x) {
    if (x.ndim() != 4) throw ShapeError("avg_pool: expected rank-4 input, got " + shape_str(x.shape));
    const std::int64_t B = x.dim(0), C = x.dim(1), T = x.dim(2), F = x.dim(3);
    if (kt_ > T || kf_ > F)
      throw ShapeError("avg_pool: kernel (" + std::to_string(kt_) + "," + std::to_string(kf_) +
                       ") larger than input " + shape_str(x.shape));
    in_shape_ = x.shape;
    const std::int64_t To = T / kt_, Fo = F / kf_;
    Tensor y(Shape{B, C, To, Fo});
    const double inv = 1.0 / static_cast<double>(kt_ * kf_);
    for (std::int64_t bc = 0; bc < B * C; ++bc) {
      const double* __restrict plane = &x.data[static_cast<std::size_t>(bc * T * F)];
      double* __restrict out = &y.data[static_cast<std::size_t>(bc * To * Fo)];
      for (std::int64_t to = 0; to < To; ++to)
        for (std::int64_t fo = 0; fo < Fo; ++fo) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < kt_; ++i) {
            const double* row = plane + (to * kt_ + i) * F + fo * kf_;
            for (std::int64_t j = 0; j < kf_; ++j) acc += row[j];
          }
          out[to * Fo + fo] = acc * inv;
        }
    }
    return y;
  }

  Tensor backward(const Tensor& gout) {
    Tensor gin(in_shape_);
    const std::int64_t B = gout.dim(0), C = gout.dim(1), To = gout.dim(2), Fo = gout.dim(3);
    const std::int64_t T = in_shape_[2], F = in_shape_[3];
    const double inv = 1.0 / static_cast<double>(kt_ * kf_);
    for (std::int64_t bc = 0; bc < B * C; ++bc) {
      double* __restrict plane = &gin.data[static_cast<std::size_t>(bc * T * F)];
      const double* __restrict go = &gout.data[static_cast<std::size_t>(bc * To * Fo)];
      for (std::int64_t to = 0; to < To; ++to)
        for (std::int64_t fo = 0; fo < Fo; ++fo) {
          const double g = go[to * Fo + fo] * inv;
          for (std::int64_t i = 0; i < kt_; ++i) {
            double* row = plane + (to * kt_ + i) * F + fo * kf_;
            for (std::int64_t j = 0; j < kf_; ++j) row[j] += g;
          }
        }
    }
    return gin;
  }

  std::int64_t kt() const { return kt_; }
  std::int64_t kf() const { return kf_; }

 private:
  std::int64_t kt_, kf_;
  Shape in_shape_;
};

// Affine map over the trailing axis: [..., in] -> [..., out].
class Dense {
 public:
  Dense(std::int64_t in_dim, std::int64_t out_dim, Rng& rng)
      : in_(in_dim), out_(out_dim), weight(Shape{in_dim, out_dim}), bias(Shape{out_dim}) {
    detail::init_he_uniform(weight, in_dim, rng);
  }

  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  void collect(ParamSet& ps, const std::string& prefix) {
    ps.add(prefix + ".weight", weight);
    ps.add(prefix + ".bias", bias);
  }

  Tensor forward(const Tensor& x) {
    if (x.ndim() < 1 || x.shape.back() != in_)
      throw ShapeError("dense: trailing dim must be " + std::to_string(in_) + ", got " + shape_str(x.shape));
    x_ = x;
    Shape out_shape = x.shape;
    out_shape.back() = out_;
    const std::int64_t rows = x.numel() / in_;
    Tensor y(out_shape);
    for (std::int64_t n = 0; n < rows; ++n) {
      const double* xn = &x.data[static_cast<std::size_t>(n * in_)];
      double* yn = &y.data[static_cast<std::size_t>(n * out_)];
      for (std::int64_t k = 0; k < out_; ++k) yn[k] = bias.data[static_cast<std::size_t>(k)];
      for (std::int64_t d = 0; d < in_; ++d) {
        const double xv = xn[d];
        const double* wd = &weight.data[static_cast<std::size_t>(d * out_)];
        for (std::int64_t k = 0; k < out_; ++k) yn[k] += xv * wd[k];
      }
    }
    return y;
  }

  Tensor backward(const Tensor& gout) {
    if (gout.shape.back() != out_ || gout.numel() / out_ != x_.numel() / in_)
      throw ShapeError("dense backward: bad gradient shape " + shape_str(gout.shape));
    weight.ensure_grad();
    bias.ensure_grad();
    Tensor gin(x_.shape);
    const std::int64_t rows = x_.numel() / in_;
    for (std::int64_t n = 0; n < rows; ++n) {
      const double* xn = &x_.data[static_cast<std::size_t>(n * in_)];
      const double* gn = &gout.data[static_cast<std::size_t>(n * out_)];
      double* gi = &gin.data[static_cast<std::size_t>(n * in_)];
      for (std::int64_t k = 0; k < out_; ++k) bias.grad[static_cast<std::size_t>(k)] += gn[k];
      for (std::int64_t d = 0; d < in_; ++d) {
        double* wgd = &weight.grad[static_cast<std::size_t>(d * out_)];
        const double* wd = &weight.data[static_cast<std::size_t>(d * out_)];
        const double xv = xn[d];
        double acc = 0.0;
        for (std::int64_t k = 0; k < out_; ++k) {
          wgd[k] += xv * gn[k];
          acc += wd[k] * gn[k];
        }
        gi[d] = acc;
      }
    }
    return gin;
  }

 private:
  std::int64_t in_, out_;
  Tensor x_;
};

}  // namespace sedkit
