// Minimal neural kernel: dense, 2-D convolution (plus its transpose), LSTM,
// pointwise activations, the losses used by the autoencoder and sequence
// models, an Adam optimizer, finite-difference gradient checking and
// temperature sampling. Layers implement explicit forward/backward passes
// and accumulate parameter gradients; there is no graph compiler.
//
// Everything runs in double precision. Training is single-threaded per model
// and bitwise reproducible given (seed, hyperparameters, data order).

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cte/common.hpp"
#include "cte/rng.hpp"
#include "cte/tensor.hpp"

namespace cte::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, std::vector<int> shape)
      : name(std::move(n)), value(shape), grad(shape) {}

  void zero_grad() { grad.fill(0.0); }
};

inline void glorot_uniform(Tensor& t, int fan_in, int fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& x : t.v) x = rng.uniform(-a, a);
}

// ---------------------------------------------------------------------------
// Pointwise activations
// ---------------------------------------------------------------------------

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                : std::exp(x) / (1.0 + std::exp(x));
}

struct Relu {
  Tensor y;
  Tensor forward(const Tensor& x) {
    y = x;
    for (double& v : y.v) v = v > 0.0 ? v : 0.0;
    return y;
  }
  Tensor backward(const Tensor& dy) const {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (y[i] <= 0.0) dx[i] = 0.0;
    }
    return dx;
  }
};

struct SigmoidLayer {
  Tensor y;
  Tensor forward(const Tensor& x) {
    y = x;
    for (double& v : y.v) v = sigmoid(v);
    return y;
  }
  Tensor backward(const Tensor& dy) const {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= y[i] * (1.0 - y[i]);
    return dx;
  }
};

// Row-wise softmax of a [B][K] tensor; strictly positive, rows sum to 1.
inline Tensor softmax(const Tensor& logits) {
  require(logits.ndim() == 2, "softmax: 2-D tensor required");
  Tensor out = logits;
  const int b = logits.dim(0);
  const int k = logits.dim(1);
  for (int r = 0; r < b; ++r) {
    double* row = &out.v[static_cast<std::size_t>(r) * k];
    const double m = *std::max_element(row, row + k);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
      row[i] = std::exp(row[i] - m);
      sum += row[i];
    }
    for (int i = 0; i < k; ++i) row[i] /= sum;
  }
  return out;
}

inline std::vector<double> softmax_vec(const std::vector<double>& logits) {
  Tensor t = Tensor::from({1, static_cast<int>(logits.size())}, logits);
  return softmax(t).v;
}

// ---------------------------------------------------------------------------
// Dense layer
// ---------------------------------------------------------------------------

struct Dense {
  int in = 0, out = 0;
  Param w;  // [in][out]
  Param b;  // [out]
  Tensor cache_x;

  Dense() = default;
  Dense(const std::string& name, int in_dim, int out_dim, Rng& rng)
      : in(in_dim),
        out(out_dim),
        w(name + ".w", {in_dim, out_dim}),
        b(name + ".b", {out_dim}) {
    glorot_uniform(w.value, in_dim, out_dim, rng);
  }

  Tensor forward(const Tensor& x) {
    require(x.ndim() == 2, "Dense: 2-D input required");
    if (x.dim(1) != in) {
      throw DimensionError("Dense " + w.name + ": input width " +
                           std::to_string(x.dim(1)) + " != " +
                           std::to_string(in));
    }
    cache_x = x;
    Tensor y = matmul(x, w.value);
    const int bsz = y.dim(0);
    for (int r = 0; r < bsz; ++r) {
      for (int c = 0; c < out; ++c) y.at(r, c) += b.value[c];
    }
    return y;
  }

  Tensor backward(const Tensor& dy) {
    // dW += x^T dy ; db += colsum(dy) ; dx = dy W^T
    gemm(cache_x.v.data(), cache_x.dim(0), cache_x.dim(1), true, dy.v.data(),
         dy.dim(0), dy.dim(1), false, w.grad.v.data(), 1.0);
    const int bsz = dy.dim(0);
    for (int r = 0; r < bsz; ++r) {
      for (int c = 0; c < out; ++c) b.grad[c] += dy.at(r, c);
    }
    Tensor dx({bsz, in});
    gemm(dy.v.data(), dy.dim(0), dy.dim(1), false, w.value.v.data(), in, out,
         true, dx.v.data());
    return dx;
  }

  std::vector<Param*> params() { return {&w, &b}; }
};

// ---------------------------------------------------------------------------
// 2-D convolution (NCHW) via im2col + GEMM, and its transpose
// ---------------------------------------------------------------------------

struct ConvGeometry {
  int in_ch = 0, out_ch = 0, kernel = 3, stride = 1, pad = 0;
  int in_h = 0, in_w = 0;

  int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
};

namespace detail {

// cols: [in_ch*k*k][out_h*out_w]
inline void im2col(const double* x, const ConvGeometry& g, double* cols) {
  const int oh = g.out_h(), ow = g.out_w();
  std::size_t ci = 0;
  for (int c = 0; c < g.in_ch; ++c) {
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        for (int y = 0; y < oh; ++y) {
          const int sy = y * g.stride + ky - g.pad;
          for (int xo = 0; xo < ow; ++xo) {
            const int sx = xo * g.stride + kx - g.pad;
            double v = 0.0;
            if (sy >= 0 && sy < g.in_h && sx >= 0 && sx < g.in_w) {
              v = x[(static_cast<std::size_t>(c) * g.in_h + sy) * g.in_w + sx];
            }
            cols[ci++] = v;
          }
        }
      }
    }
  }
}

inline void col2im(const double* cols, const ConvGeometry& g, double* x) {
  const int oh = g.out_h(), ow = g.out_w();
  std::size_t ci = 0;
  for (int c = 0; c < g.in_ch; ++c) {
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        for (int y = 0; y < oh; ++y) {
          const int sy = y * g.stride + ky - g.pad;
          for (int xo = 0; xo < ow; ++xo) {
            const int sx = xo * g.stride + kx - g.pad;
            if (sy >= 0 && sy < g.in_h && sx >= 0 && sx < g.in_w) {
              x[(static_cast<std::size_t>(c) * g.in_h + sy) * g.in_w + sx] +=
                  cols[ci];
            }
            ++ci;
          }
        }
      }
    }
  }
}

}  // namespace detail

struct Conv2d {
  ConvGeometry geo;
  Param w;  // [out_ch][in_ch*k*k]
  Param b;  // [out_ch]
  Tensor cache_x;  // [B][in_ch][H][W]

  Conv2d() = default;
  Conv2d(const std::string& name, ConvGeometry g, Rng& rng)
      : geo(g),
        w(name + ".w", {g.out_ch, g.in_ch * g.kernel * g.kernel}),
        b(name + ".b", {g.out_ch}) {
    glorot_uniform(w.value, g.in_ch * g.kernel * g.kernel, g.out_ch, rng);
  }

  // x: [B][in_ch][in_h][in_w] -> y: [B][out_ch][out_h][out_w]
  Tensor forward(const Tensor& x) {
    const int bsz = x.dim(0);
    if (x.ndim() != 4 || x.dim(1) != geo.in_ch || x.dim(2) != geo.in_h ||
        x.dim(3) != geo.in_w) {
      throw DimensionError("Conv2d " + w.name + ": bad input " + x.shape_str());
    }
    cache_x = x;
    const int oh = geo.out_h(), ow = geo.out_w();
    const int patch = geo.in_ch * geo.kernel * geo.kernel;
    Tensor y({bsz, geo.out_ch, oh, ow});
    std::vector<double> cols(static_cast<std::size_t>(patch) * oh * ow);
    const std::size_t xs = static_cast<std::size_t>(geo.in_ch) * geo.in_h * geo.in_w;
    const std::size_t ys = static_cast<std::size_t>(geo.out_ch) * oh * ow;
    for (int s = 0; s < bsz; ++s) {
      detail::im2col(&x.v[s * xs], geo, cols.data());
      gemm(w.value.v.data(), geo.out_ch, patch, false, cols.data(), patch,
           oh * ow, false, &y.v[s * ys]);
      for (int c = 0; c < geo.out_ch; ++c) {
        double* dst = &y.v[s * ys + static_cast<std::size_t>(c) * oh * ow];
        for (int i = 0; i < oh * ow; ++i) dst[i] += b.value[c];
      }
    }
    return y;
  }

  Tensor backward(const Tensor& dy) {
    const int bsz = cache_x.dim(0);
    const int oh = geo.out_h(), ow = geo.out_w();
    const int patch = geo.in_ch * geo.kernel * geo.kernel;
    Tensor dx(cache_x.shape);
    std::vector<double> cols(static_cast<std::size_t>(patch) * oh * ow);
    std::vector<double> dcols(cols.size());
    const std::size_t xs = static_cast<std::size_t>(geo.in_ch) * geo.in_h * geo.in_w;
    const std::size_t ys = static_cast<std::size_t>(geo.out_ch) * oh * ow;
    for (int s = 0; s < bsz; ++s) {
      const double* dys = &dy.v[s * ys];
      detail::im2col(&cache_x.v[s * xs], geo, cols.data());
      // dW += dy * cols^T
      gemm(dys, geo.out_ch, oh * ow, false, cols.data(), patch, oh * ow, true,
           w.grad.v.data(), 1.0);
      // db += rowsum(dy)
      for (int c = 0; c < geo.out_ch; ++c) {
        const double* src = dys + static_cast<std::size_t>(c) * oh * ow;
        double acc = 0.0;
        for (int i = 0; i < oh * ow; ++i) acc += src[i];
        b.grad[c] += acc;
      }
      // dcols = W^T dy ; dx = col2im(dcols)
      gemm(w.value.v.data(), geo.out_ch, patch, true, dys, geo.out_ch, oh * ow,
           false, dcols.data());
      detail::col2im(dcols.data(), geo, &dx.v[s * xs]);
    }
    return dx;
  }

  std::vector<Param*> params() { return {&w, &b}; }
};

// Transposed convolution: the exact adjoint of a Conv2d with the same
// geometry. Maps [B][out_ch][out_h][out_w] back to [B][in_ch][in_h][in_w]
// of the mirror convolution (upsampling).
struct ConvTranspose2d {
  ConvGeometry geo;  // geometry of the mirror (downsampling) convolution
  Param w;           // [out_ch][in_ch*k*k], as in the mirror conv
  Param b;           // per output channel of the transpose = geo.in_ch
  Tensor cache_x;

  ConvTranspose2d() = default;
  ConvTranspose2d(const std::string& name, ConvGeometry mirror, Rng& rng)
      : geo(mirror),
        w(name + ".w", {mirror.out_ch, mirror.in_ch * mirror.kernel * mirror.kernel}),
        b(name + ".b", {mirror.in_ch}) {
    glorot_uniform(w.value, mirror.out_ch,
                   mirror.in_ch * mirror.kernel * mirror.kernel, rng);
  }

  // x: [B][geo.out_ch][out_h][out_w] -> y: [B][geo.in_ch][in_h][in_w]
  Tensor forward(const Tensor& x) {
    const int oh = geo.out_h(), ow = geo.out_w();
    if (x.ndim() != 4 || x.dim(1) != geo.out_ch || x.dim(2) != oh ||
        x.dim(3) != ow) {
      throw DimensionError("ConvTranspose2d " + w.name + ": bad input " +
                           x.shape_str());
    }
    cache_x = x;
    const int bsz = x.dim(0);
    const int patch = geo.in_ch * geo.kernel * geo.kernel;
    Tensor y({bsz, geo.in_ch, geo.in_h, geo.in_w});
    std::vector<double> dcols(static_cast<std::size_t>(patch) * oh * ow);
    const std::size_t xs = static_cast<std::size_t>(geo.out_ch) * oh * ow;
    const std::size_t ys = static_cast<std::size_t>(geo.in_ch) * geo.in_h * geo.in_w;
    for (int s = 0; s < bsz; ++s) {
      gemm(w.value.v.data(), geo.out_ch, patch, true, &x.v[s * xs], geo.out_ch,
           oh * ow, false, dcols.data());
      detail::col2im(dcols.data(), geo, &y.v[s * ys]);
      for (int c = 0; c < geo.in_ch; ++c) {
        double* dst = &y.v[s * ys + static_cast<std::size_t>(c) * geo.in_h * geo.in_w];
        for (int i = 0; i < geo.in_h * geo.in_w; ++i) dst[i] += b.value[c];
      }
    }
    return y;
  }

  Tensor backward(const Tensor& dy) {
    const int oh = geo.out_h(), ow = geo.out_w();
    const int bsz = cache_x.dim(0);
    const int patch = geo.in_ch * geo.kernel * geo.kernel;
    Tensor dx(cache_x.shape);
    std::vector<double> cols(static_cast<std::size_t>(patch) * oh * ow);
    const std::size_t xs = static_cast<std::size_t>(geo.out_ch) * oh * ow;
    const std::size_t ys = static_cast<std::size_t>(geo.in_ch) * geo.in_h * geo.in_w;
    for (int s = 0; s < bsz; ++s) {
      const double* dys = &dy.v[s * ys];
      detail::im2col(dys, geo, cols.data());
      // dW += x * cols^T   (x plays the role dy had in Conv2d::backward)
      gemm(&cache_x.v[s * xs], geo.out_ch, oh * ow, false, cols.data(), patch,
           oh * ow, true, w.grad.v.data(), 1.0);
      for (int c = 0; c < geo.in_ch; ++c) {
        const double* src = dys + static_cast<std::size_t>(c) * geo.in_h * geo.in_w;
        double acc = 0.0;
        for (int i = 0; i < geo.in_h * geo.in_w; ++i) acc += src[i];
        b.grad[c] += acc;
      }
      // dx = conv_forward(dy) with the shared weights
      gemm(w.value.v.data(), geo.out_ch, patch, false, cols.data(), patch,
           oh * ow, false, &dx.v[s * xs]);
    }
    return dx;
  }

  std::vector<Param*> params() { return {&w, &b}; }
};

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

// Gate order in all 4H-wide tensors: input, forget, candidate, output.
struct LstmParams {
  Param wx;  // [in][4H]
  Param wh;  // [H][4H]
  Param b;   // [4H]
};

struct LstmState {
  Tensor h;  // [B][H]
  Tensor c;  // [B][H]
};

struct LstmLayer {
  int in = 0, hidden = 0;
  LstmParams p;

  struct StepCache {
    Tensor x, h_prev, c_prev;
    Tensor gates;   // [B][4H] post-activation
    Tensor c, tanh_c;
  };
  std::vector<StepCache> caches;

  LstmLayer() = default;
  LstmLayer(const std::string& name, int in_dim, int hidden_dim, Rng& rng)
      : in(in_dim), hidden(hidden_dim) {
    p.wx = Param(name + ".wx", {in_dim, 4 * hidden_dim});
    p.wh = Param(name + ".wh", {hidden_dim, 4 * hidden_dim});
    p.b = Param(name + ".b", {4 * hidden_dim});
    glorot_uniform(p.wx.value, in_dim, 4 * hidden_dim, rng);
    glorot_uniform(p.wh.value, hidden_dim, 4 * hidden_dim, rng);
    // Forget-gate bias starts at 1 so early training does not flush state.
    for (int i = 0; i < hidden_dim; ++i) p.b.value[hidden_dim + i] = 1.0;
  }

  LstmState zero_state(int batch) const {
    return LstmState{Tensor({batch, hidden}), Tensor({batch, hidden})};
  }

  // One step without caching (inference).
  void step(const Tensor& x, LstmState& state) const {
    StepCache scratch;
    step_impl(x, state, scratch, false);
  }

  // One step with caching (training).
  void step_cached(const Tensor& x, LstmState& state) {
    caches.emplace_back();
    step_impl(x, state, caches.back(), true);
  }

  void clear_cache() { caches.clear(); }

  // Backward through all cached steps, newest first. dh_top[t] is the
  // gradient arriving at h_t from above. Returns dx per step (oldest first).
  std::vector<Tensor> backward(const std::vector<Tensor>& dh_top) {
    const int t_steps = static_cast<int>(caches.size());
    require(static_cast<int>(dh_top.size()) == t_steps,
            "LstmLayer::backward: cache/gradient length mismatch");
    const int bsz = t_steps ? caches[0].x.dim(0) : 0;
    std::vector<Tensor> dxs(t_steps);
    Tensor dh_next({bsz, hidden});
    Tensor dc_next({bsz, hidden});
    Tensor dz({bsz, 4 * hidden});
    for (int t = t_steps - 1; t >= 0; --t) {
      const StepCache& cc = caches[t];
      for (int r = 0; r < bsz; ++r) {
        for (int j = 0; j < hidden; ++j) {
          const double i_g = cc.gates.at(r, j);
          const double f_g = cc.gates.at(r, hidden + j);
          const double g_g = cc.gates.at(r, 2 * hidden + j);
          const double o_g = cc.gates.at(r, 3 * hidden + j);
          const double tc = cc.tanh_c.at(r, j);
          const double dh = dh_top[t].at(r, j) + dh_next.at(r, j);
          double dc = dc_next.at(r, j) + dh * o_g * (1.0 - tc * tc);
          const double d_o = dh * tc;
          const double d_i = dc * g_g;
          const double d_g = dc * i_g;
          const double d_f = dc * cc.c_prev.at(r, j);
          dc_next.at(r, j) = dc * f_g;
          dz.at(r, j) = d_i * i_g * (1.0 - i_g);
          dz.at(r, hidden + j) = d_f * f_g * (1.0 - f_g);
          dz.at(r, 2 * hidden + j) = d_g * (1.0 - g_g * g_g);
          dz.at(r, 3 * hidden + j) = d_o * o_g * (1.0 - o_g);
        }
      }
      // Parameter grads and input grads.
      gemm(cc.x.v.data(), bsz, in, true, dz.v.data(), bsz, 4 * hidden, false,
           p.wx.grad.v.data(), 1.0);
      gemm(cc.h_prev.v.data(), bsz, hidden, true, dz.v.data(), bsz, 4 * hidden,
           false, p.wh.grad.v.data(), 1.0);
      for (int r = 0; r < bsz; ++r) {
        for (int j = 0; j < 4 * hidden; ++j) p.b.grad[j] += dz.at(r, j);
      }
      dxs[t] = Tensor({bsz, in});
      gemm(dz.v.data(), bsz, 4 * hidden, false, p.wx.value.v.data(), in,
           4 * hidden, true, dxs[t].v.data());
      dh_next.fill(0.0);
      gemm(dz.v.data(), bsz, 4 * hidden, false, p.wh.value.v.data(), hidden,
           4 * hidden, true, dh_next.v.data());
    }
    return dxs;
  }

  std::vector<Param*> params() { return {&p.wx, &p.wh, &p.b}; }

 private:
  void step_impl(const Tensor& x, LstmState& state, StepCache& cache,
                 bool keep) const {
    if (x.ndim() != 2 || x.dim(1) != in) {
      throw DimensionError("LstmLayer: bad input " + x.shape_str() +
                           ", expected [B][" + std::to_string(in) + "]");
    }
    const int bsz = x.dim(0);
    check_same_shape(state.h, Tensor({bsz, hidden}), "LstmLayer state");
    Tensor z({bsz, 4 * hidden});
    gemm(x.v.data(), bsz, in, false, p.wx.value.v.data(), in, 4 * hidden,
         false, z.v.data());
    gemm(state.h.v.data(), bsz, hidden, false, p.wh.value.v.data(), hidden,
         4 * hidden, false, z.v.data(), 1.0);
    Tensor c_new({bsz, hidden});
    Tensor tanh_c({bsz, hidden});
    Tensor h_new({bsz, hidden});
    for (int r = 0; r < bsz; ++r) {
      for (int j = 0; j < hidden; ++j) {
        const double zi = z.at(r, j) + p.b.value[j];
        const double zf = z.at(r, hidden + j) + p.b.value[hidden + j];
        const double zg = z.at(r, 2 * hidden + j) + p.b.value[2 * hidden + j];
        const double zo = z.at(r, 3 * hidden + j) + p.b.value[3 * hidden + j];
        const double i_g = sigmoid(zi);
        const double f_g = sigmoid(zf);
        const double g_g = std::tanh(zg);
        const double o_g = sigmoid(zo);
        const double c_v = f_g * state.c.at(r, j) + i_g * g_g;
        const double tc = std::tanh(c_v);
        z.at(r, j) = i_g;
        z.at(r, hidden + j) = f_g;
        z.at(r, 2 * hidden + j) = g_g;
        z.at(r, 3 * hidden + j) = o_g;
        c_new.at(r, j) = c_v;
        tanh_c.at(r, j) = tc;
        h_new.at(r, j) = o_g * tc;
      }
    }
    if (keep) {
      cache.x = x;
      cache.h_prev = state.h;
      cache.c_prev = state.c;
      cache.gates = std::move(z);
      cache.c = c_new;
      cache.tanh_c = std::move(tanh_c);
    }
    state.c = std::move(c_new);
    state.h = std::move(h_new);
  }
};

// Standard single-sample LSTM cell step on plain vectors (reference surface).
inline std::pair<std::vector<double>, std::pair<std::vector<double>, std::vector<double>>>
lstm_step(const std::vector<double>& x, const std::vector<double>& h,
          const std::vector<double>& c, const Tensor& wx, const Tensor& wh,
          const Tensor& b) {
  const int in = static_cast<int>(x.size());
  const int hidden = static_cast<int>(h.size());
  if (wx.ndim() != 2 || wx.dim(0) != in || wx.dim(1) != 4 * hidden ||
      wh.dim(0) != hidden || wh.dim(1) != 4 * hidden ||
      static_cast<int>(b.size()) != 4 * hidden ||
      static_cast<int>(c.size()) != hidden) {
    throw DimensionError("lstm_step: inconsistent parameter shapes");
  }
  std::vector<double> h_new(hidden), c_new(hidden);
  for (int j = 0; j < hidden; ++j) {
    double zi = b[j], zf = b[hidden + j], zg = b[2 * hidden + j],
           zo = b[3 * hidden + j];
    for (int i = 0; i < in; ++i) {
      zi += x[i] * wx.at(i, j);
      zf += x[i] * wx.at(i, hidden + j);
      zg += x[i] * wx.at(i, 2 * hidden + j);
      zo += x[i] * wx.at(i, 3 * hidden + j);
    }
    for (int i = 0; i < hidden; ++i) {
      zi += h[i] * wh.at(i, j);
      zf += h[i] * wh.at(i, hidden + j);
      zg += h[i] * wh.at(i, 2 * hidden + j);
      zo += h[i] * wh.at(i, 3 * hidden + j);
    }
    c_new[j] = sigmoid(zf) * c[j] + sigmoid(zi) * std::tanh(zg);
    h_new[j] = sigmoid(zo) * std::tanh(c_new[j]);
  }
  return {h_new, {h_new, c_new}};
}

// A stack of LSTM layers (sequence models use 1..3).
struct LstmStack {
  std::vector<LstmLayer> layers;

  LstmStack() = default;
  LstmStack(const std::string& name, int in_dim, int hidden, int n_layers,
            Rng& rng) {
    for (int l = 0; l < n_layers; ++l) {
      layers.emplace_back(name + ".l" + std::to_string(l),
                          l == 0 ? in_dim : hidden, hidden, rng);
    }
  }

  std::vector<LstmState> zero_state(int batch) const {
    std::vector<LstmState> s;
    for (const auto& l : layers) s.push_back(l.zero_state(batch));
    return s;
  }

  // Inference step: returns the top layer's h.
  Tensor step(const Tensor& x, std::vector<LstmState>& states) const {
    Tensor cur = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].step(cur, states[l]);
      cur = states[l].h;
    }
    return cur;
  }

  // Training forward over a whole sequence; returns top h per step.
  std::vector<Tensor> forward_sequence(const std::vector<Tensor>& xs) {
    for (auto& l : layers) l.clear_cache();
    const int bsz = xs.empty() ? 0 : xs[0].dim(0);
    auto states = zero_state(bsz);
    std::vector<Tensor> top;
    top.reserve(xs.size());
    for (const auto& x : xs) {
      Tensor cur = x;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].step_cached(cur, states[l]);
        cur = states[l].h;
      }
      top.push_back(cur);
    }
    return top;
  }

  // Backward given gradients at the top layer's h per step.
  void backward_sequence(std::vector<Tensor> d_top) {
    for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
      d_top = layers[l].backward(d_top);
    }
  }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    for (auto& l : layers) {
      for (Param* p : l.params()) out.push_back(p);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Losses (value + gradient w.r.t. the pre-activation logits where fused)
// ---------------------------------------------------------------------------

// Mean squared error over all elements; grad w.r.t. pred.
inline std::pair<double, Tensor> mse_loss(const Tensor& pred,
                                          const Tensor& target) {
  check_same_shape(pred, target, "mse_loss");
  const double n = static_cast<double>(pred.size());
  double loss = 0.0;
  Tensor grad(pred.shape);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    loss += d * d;
    grad[i] = 2.0 * d / n;
  }
  return {loss / n, grad};
}

// Binary cross entropy on probabilities (mean over elements).
inline double bce_value(const Tensor& prob, const Tensor& target) {
  check_same_shape(prob, target, "bce");
  double loss = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = std::clamp(prob[i], 1e-12, 1.0 - 1e-12);
    loss += -(target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p));
  }
  return loss / static_cast<double>(prob.size());
}

// Fused sigmoid + BCE: prob = sigmoid(logits); returns loss and dlogits.
inline std::pair<double, Tensor> bce_with_logits(const Tensor& logits,
                                                 const Tensor& target,
                                                 const Tensor& prob) {
  const double n = static_cast<double>(logits.size());
  Tensor grad(logits.shape);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    grad[i] = (prob[i] - target[i]) / n;
  }
  return {bce_value(prob, target), grad};
}

// MSE measured after a sigmoid head; returns loss and dlogits.
inline std::pair<double, Tensor> mse_on_sigmoid(const Tensor& logits,
                                                const Tensor& target,
                                                const Tensor& prob) {
  const double n = static_cast<double>(logits.size());
  double loss = 0.0;
  Tensor grad(logits.shape);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double d = prob[i] - target[i];
    loss += d * d;
    grad[i] = 2.0 * d / n * prob[i] * (1.0 - prob[i]);
  }
  return {loss / n, grad};
}

// Categorical cross entropy of row-wise probabilities vs one-hot targets
// (mean over rows).
inline double cce_value(const Tensor& prob, const Tensor& onehot) {
  check_same_shape(prob, onehot, "cce");
  const int bsz = prob.dim(0);
  const int k = prob.dim(1);
  double loss = 0.0;
  for (int r = 0; r < bsz; ++r) {
    for (int c = 0; c < k; ++c) {
      if (onehot.at(r, c) > 0.0) {
        loss -= onehot.at(r, c) * std::log(std::max(prob.at(r, c), 1e-12));
      }
    }
  }
  return loss / bsz;
}

// Fused softmax + CE: prob = softmax(logits); returns loss and dlogits.
inline std::pair<double, Tensor> softmax_ce(const Tensor& logits,
                                            const Tensor& onehot,
                                            const Tensor& prob) {
  const int bsz = logits.dim(0);
  Tensor grad(logits.shape);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    grad[i] = (prob[i] - onehot[i]) / bsz;
  }
  return {cce_value(prob, onehot), grad};
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamSlot {
  Tensor m;
  Tensor v;
};

// One Adam update on a single tensor. `t` is the 1-based step count after
// this update. Deterministic; zero gradient leaves the value unchanged.
inline void optimizer_step(Tensor& value, const Tensor& grad, AdamSlot& slot,
                           std::int64_t t, const AdamConfig& cfg) {
  check_same_shape(value, grad, "optimizer_step");
  if (slot.m.size() != value.size()) {
    slot.m = Tensor(value.shape);
    slot.v = Tensor(value.shape);
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < value.size(); ++i) {
    slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * grad[i];
    slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mh = slot.m[i] / bc1;
    const double vh = slot.v[i] / bc2;
    value[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
  }
}

class Adam {
 public:
  explicit Adam(AdamConfig cfg = AdamConfig{}) : cfg_(cfg) {}

  void step(const std::vector<Param*>& params) {
    if (slots_.size() != params.size()) slots_.resize(params.size());
    ++t_;
    for (std::size_t i = 0; i < params.size(); ++i) {
      optimizer_step(params[i]->value, params[i]->grad, slots_[i], t_, cfg_);
    }
  }

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<AdamSlot> slots_;
  std::int64_t t_ = 0;
};

inline void zero_grads(const std::vector<Param*>& params) {
  for (Param* p : params) p->zero_grad();
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

// Compares analytic gradients against central finite differences on a
// sampled subset of at least `min_components` parameter components (all of
// them when fewer exist). `loss_and_grads` must zero the gradients, run
// forward+backward and return the loss. Returns the maximum relative error;
// the denominator is floored to absorb finite-difference roundoff.
inline double grad_check(const std::function<double()>& loss_and_grads,
                         const std::vector<Param*>& params, double epsilon,
                         Rng& rng, int min_components = 200) {
  require(epsilon > 0, "grad_check: epsilon must be positive");
  const double base = loss_and_grads();
  require_finite(base, "grad_check loss");

  std::vector<std::pair<std::size_t, std::size_t>> all;  // (param, component)
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p]->value.size(); ++i) {
      all.emplace_back(p, i);
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  if (static_cast<int>(all.size()) <= min_components) {
    chosen = all;
  } else {
    rng.shuffle(all);
    chosen.assign(all.begin(), all.begin() + min_components);
  }

  std::vector<std::vector<double>> analytic(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    analytic[p] = params[p]->grad.v;
  }

  double max_rel = 0.0;
  for (const auto& [p, i] : chosen) {
    double& slot = params[p]->value.v[i];
    const double keep = slot;
    slot = keep + epsilon;
    const double up = loss_and_grads();
    slot = keep - epsilon;
    const double down = loss_and_grads();
    slot = keep;
    require_finite(up, "grad_check loss");
    require_finite(down, "grad_check loss");
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = analytic[p][i];
    const double rel =
        std::abs(a - numeric) / std::max(1e-4, std::abs(a) + std::abs(numeric));
    max_rel = std::max(max_rel, rel);
  }
  // Restore the analytic gradients for the unperturbed parameters.
  loss_and_grads();
  return max_rel;
}

// ---------------------------------------------------------------------------
// Temperature sampling
// ---------------------------------------------------------------------------

// Draws an index from softmax(log(probs) / temperature). Temperature 1
// reproduces probs; temperature 0 is the argmax (greedy) limit.
inline int categorical_sample(const std::vector<double>& probs,
                              double temperature, Rng& rng) {
  require(!probs.empty(), "categorical_sample: empty distribution");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw NumericError("categorical_sample: invalid probability");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw NumericError("categorical_sample: probabilities sum to " +
                       std::to_string(sum) + ", not 1");
  }
  if (temperature < 0.0) {
    throw NumericError("categorical_sample: negative temperature");
  }
  if (temperature < 1e-12) {
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) -
                            probs.begin());
  }
  // w_i = exp(log p_i / T), computed with max subtraction for stability.
  std::vector<double> logw(probs.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    logw[i] = probs[i] > 0.0 ? std::log(probs[i]) / temperature
                             : -std::numeric_limits<double>::infinity();
    mx = std::max(mx, logw[i]);
  }
  double z = 0.0;
  std::vector<double> w(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    w[i] = std::exp(logw[i] - mx);
    z += w[i];
  }
  const double u = rng.uniform() * z;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(w.size()) - 1;
}

}  // namespace cte::nn
