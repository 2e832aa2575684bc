#pragma once

// Stacked bidirectional GRU. Gate order along the 3H axis is reset, update,
// candidate; one bias vector per direction. Candidate uses
// n = tanh(a_n + r * u_n) with u = W_hh h_prev, h' = (1-z) n + z h_prev.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sedkit/errors.hpp"
#include "sedkit/nn/ops.hpp"
#include "sedkit/nn/params.hpp"
#include "sedkit/rng.hpp"
#include "sedkit/tensor.hpp"

namespace sedkit {

class BiGru {
 public:
  struct Direction {
    Tensor w_ih;  // [3H, D]
    Tensor w_hh;  // [3H, H]
    Tensor bias;  // [3H]
  };
  struct Layer {
    Direction fwd, bwd;
  };

  BiGru(std::int64_t input_dim, std::int64_t hidden, std::int64_t num_layers, Rng& rng)
      : input_dim_(input_dim), hidden_(hidden) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (std::int64_t l = 0; l < num_layers; ++l) {
      const std::int64_t d = l == 0 ? input_dim : 2 * hidden;
      Layer layer;
      for (Direction* dir : {&layer.fwd, &layer.bwd}) {
        dir->w_ih = Tensor(Shape{3 * hidden, d});
        dir->w_hh = Tensor(Shape{3 * hidden, hidden});
        dir->bias = Tensor(Shape{3 * hidden});
        detail::init_uniform(dir->w_ih, limit, rng);
        detail::init_uniform(dir->w_hh, limit, rng);
        detail::init_uniform(dir->bias, limit, rng);
      }
      layers.push_back(std::move(layer));
    }
  }

  std::vector<Layer> layers;

  std::int64_t hidden() const { return hidden_; }
  std::int64_t output_dim() const { return 2 * hidden_; }

  void collect(ParamSet& ps, const std::string& prefix) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string base = prefix + ".l" + std::to_string(l);
      for (auto [dir, tag] : {std::pair{&layers[l].fwd, ".fwd"}, std::pair{&layers[l].bwd, ".bwd"}}) {
        ps.add(base + tag + ".w_ih", dir->w_ih);
        ps.add(base + tag + ".w_hh", dir->w_hh);
        ps.add(base + tag + ".bias", dir->bias);
      }
    }
  }

  // x: [B, T, D] -> [B, T, 2H].
  Tensor forward(const Tensor& x) {
    if (x.ndim() != 3) throw ShapeError("bigru: expected [B,T,D], got " + shape_str(x.shape));
    if (x.dim(1) == 0) throw InvalidInput("bigru: zero-length sequence");
    if (x.dim(2) != input_dim_)
      throw ShapeError("bigru: input dim " + std::to_string(x.dim(2)) + " != " + std::to_string(input_dim_));

    caches_.assign(layers.size(), LayerCache{});
    Tensor cur = x;
    for (std::size_t l = 0; l < layers.size(); ++l) cur = forward_layer(layers[l], cur, caches_[l]);
    return cur;
  }

  Tensor backward(const Tensor& gout) {
    Tensor cur = gout;
    for (std::size_t l = layers.size(); l-- > 0;) cur = backward_layer(layers[l], cur, caches_[l]);
    return cur;
  }

 private:
  struct DirCache {
    // All [B, T, H], indexed by the absolute time step t.
    Tensor r, z, n, u_n, h_prev;
  };
  struct LayerCache {
    Tensor input;  // [B, T, D]
    DirCache fwd, bwd;
  };

  static double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

  Tensor forward_layer(Layer& layer, const Tensor& x, LayerCache& cache) {
    const std::int64_t B = x.dim(0), T = x.dim(1), D = x.dim(2), H = hidden_;
    cache.input = x;
    Tensor out(Shape{B, T, 2 * H});
    for (int d = 0; d < 2; ++d) {
      const bool reverse = d == 1;
      Direction& dir = reverse ? layer.bwd : layer.fwd;
      DirCache& dc = reverse ? cache.bwd : cache.fwd;
      for (Tensor* t : {&dc.r, &dc.z, &dc.n, &dc.u_n, &dc.h_prev}) *t = Tensor(Shape{B, T, H});

      std::vector<double> a(static_cast<std::size_t>(3 * H)), u(static_cast<std::size_t>(3 * H));
      std::vector<double> h(static_cast<std::size_t>(H), 0.0);
      for (std::int64_t b = 0; b < B; ++b) {
        std::fill(h.begin(), h.end(), 0.0);
        for (std::int64_t s = 0; s < T; ++s) {
          const std::int64_t t = reverse ? T - 1 - s : s;
          const double* xt = &x.data[static_cast<std::size_t>((b * T + t) * D)];
          // a = W_ih x_t + bias, u = W_hh h.
          for (std::int64_t i = 0; i < 3 * H; ++i) {
            const double* wi = &dir.w_ih.data[static_cast<std::size_t>(i * D)];
            double acc = dir.bias.data[static_cast<std::size_t>(i)];
            for (std::int64_t k = 0; k < D; ++k) acc += wi[k] * xt[k];
            a[static_cast<std::size_t>(i)] = acc;
            const double* wh = &dir.w_hh.data[static_cast<std::size_t>(i * H)];
            double uacc = 0.0;
            for (std::int64_t k = 0; k < H; ++k) uacc += wh[k] * h[static_cast<std::size_t>(k)];
            u[static_cast<std::size_t>(i)] = uacc;
          }
          for (std::int64_t j = 0; j < H; ++j) {
            const auto ji = static_cast<std::size_t>(j);
            const double rg = sigmoid(a[ji] + u[ji]);
            const double zg = sigmoid(a[static_cast<std::size_t>(H + j)] + u[static_cast<std::size_t>(H + j)]);
            const double un = u[static_cast<std::size_t>(2 * H + j)];
            const double ng = std::tanh(a[static_cast<std::size_t>(2 * H + j)] + rg * un);
            dc.r(b, t, j) = rg;
            dc.z(b, t, j) = zg;
            dc.n(b, t, j) = ng;
            dc.u_n(b, t, j) = un;
            dc.h_prev(b, t, j) = h[ji];
            h[ji] = (1.0 - zg) * ng + zg * h[ji];
          }
          double* o = &out.data[static_cast<std::size_t>((b * T + t) * 2 * H + d * H)];
          for (std::int64_t j = 0; j < H; ++j) o[j] = h[static_cast<std::size_t>(j)];
        }
      }
    }
    return out;
  }

  Tensor backward_layer(Layer& layer, const Tensor& gout, const LayerCache& cache) {
    const Tensor& x = cache.input;
    const std::int64_t B = x.dim(0), T = x.dim(1), D = x.dim(2), H = hidden_;
    gout.require_shape(Shape{B, T, 2 * H}, "bigru backward");
    Tensor gin(x.shape);

    for (int d = 0; d < 2; ++d) {
      const bool reverse = d == 1;
      Direction& dir = reverse ? layer.bwd : layer.fwd;
      const DirCache& dc = reverse ? cache.bwd : cache.fwd;
      dir.w_ih.ensure_grad();
      dir.w_hh.ensure_grad();
      dir.bias.ensure_grad();

      std::vector<double> dh(static_cast<std::size_t>(H));
      std::vector<double> da(static_cast<std::size_t>(3 * H)), du(static_cast<std::size_t>(3 * H));
      std::vector<double> dh_next(static_cast<std::size_t>(H), 0.0);

      for (std::int64_t b = 0; b < B; ++b) {
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        for (std::int64_t s = T; s-- > 0;) {
          const std::int64_t t = reverse ? T - 1 - s : s;
          const double* go = &gout.data[static_cast<std::size_t>((b * T + t) * 2 * H + d * H)];
          for (std::int64_t j = 0; j < H; ++j) {
            const auto ji = static_cast<std::size_t>(j);
            dh[ji] = go[j] + dh_next[ji];
          }
          for (std::int64_t j = 0; j < H; ++j) {
            const auto ji = static_cast<std::size_t>(j);
            const double rg = dc.r(b, t, j), zg = dc.z(b, t, j), ng = dc.n(b, t, j);
            const double un = dc.u_n(b, t, j), hp = dc.h_prev(b, t, j);
            const double dz = dh[ji] * (hp - ng);
            const double dn = dh[ji] * (1.0 - zg);
            const double dnp = dn * (1.0 - ng * ng);
            const double dr = dnp * un;
            const double drp = dr * rg * (1.0 - rg);
            const double dzp = dz * zg * (1.0 - zg);
            da[ji] = drp;
            da[static_cast<std::size_t>(H + j)] = dzp;
            da[static_cast<std::size_t>(2 * H + j)] = dnp;
            du[ji] = drp;
            du[static_cast<std::size_t>(H + j)] = dzp;
            du[static_cast<std::size_t>(2 * H + j)] = dnp * rg;
            dh_next[ji] = dh[ji] * zg;  // plus W_hh^T du, added below
          }
          const double* xt = &x.data[static_cast<std::size_t>((b * T + t) * D)];
          double* gx = &gin.data[static_cast<std::size_t>((b * T + t) * D)];
          for (std::int64_t i = 0; i < 3 * H; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            dir.bias.grad[ii] += da[ii];
            double* wig = &dir.w_ih.grad[static_cast<std::size_t>(i * D)];
            const double* wi = &dir.w_ih.data[static_cast<std::size_t>(i * D)];
            for (std::int64_t k = 0; k < D; ++k) {
              wig[k] += da[ii] * xt[k];
              gx[k] += wi[k] * da[ii];
            }
            double* whg = &dir.w_hh.grad[static_cast<std::size_t>(i * H)];
            const double* wh = &dir.w_hh.data[static_cast<std::size_t>(i * H)];
            for (std::int64_t k = 0; k < H; ++k) {
              whg[k] += du[ii] * dc.h_prev(b, t, k);
              dh_next[static_cast<std::size_t>(k)] += wh[k] * du[ii];
            }
          }
        }
      }
    }
    return gin;
  }

  std::int64_t input_dim_, hidden_;
  std::vector<LayerCache> caches_;
};

}  // namespace sedkit
