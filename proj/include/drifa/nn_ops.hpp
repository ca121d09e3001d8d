#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "drifa/random.hpp"
#include "drifa/tensor.hpp"

namespace drifa {

enum class Padding { Same, Valid };

namespace detail {

struct ConvDims {
  std::size_t n, h, w, cin, k, cout, stride;
  std::size_t oh, ow;
  std::ptrdiff_t pad_h, pad_w;  // leading padding (TF-style: extra pad trails)
};

inline ConvDims conv_dims(const Shape& xs, const Shape& ws, std::size_t stride, Padding pad) {
  if (xs.size() != 4)
    fail(ErrorKind::ShapeMismatch, "conv2d: input must be rank-4 NHWC, got " + shape_str(xs));
  if (ws.size() != 4 || ws[0] != ws[1])
    fail(ErrorKind::ShapeMismatch, "conv2d: kernel must be KxKxCinxCout, got " + shape_str(ws));
  const std::size_t k = ws[0];
  if (k != 1 && k != 3)
    fail(ErrorKind::ShapeMismatch, "conv2d: kernel size " + std::to_string(k) + " unsupported");
  if (ws[2] != xs[3])
    fail(ErrorKind::ShapeMismatch,
         "conv2d: input channels " + std::to_string(xs[3]) + " vs kernel " + std::to_string(ws[2]));
  if (stride == 0) fail(ErrorKind::ShapeMismatch, "conv2d: stride must be positive");

  ConvDims d{xs[0], xs[1], xs[2], xs[3], k, ws[3], stride, 0, 0, 0, 0};
  if (pad == Padding::Same) {
    d.oh = (d.h + stride - 1) / stride;
    d.ow = (d.w + stride - 1) / stride;
    const std::size_t need_h = (d.oh - 1) * stride + k;
    const std::size_t need_w = (d.ow - 1) * stride + k;
    d.pad_h = need_h > d.h ? static_cast<std::ptrdiff_t>((need_h - d.h) / 2) : 0;
    d.pad_w = need_w > d.w ? static_cast<std::ptrdiff_t>((need_w - d.w) / 2) : 0;
  } else {
    if (d.h < k || d.w < k)
      fail(ErrorKind::ShapeMismatch, "conv2d: input smaller than kernel under valid padding");
    d.oh = (d.h - k) / stride + 1;
    d.ow = (d.w - k) / stride + 1;
  }
  return d;
}

}  // namespace detail

// 2-D convolution, NHWC input, KxKxCinxCout kernel, zero padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride = 1,
                 Padding padding = Padding::Same) {
  const auto d = detail::conv_dims(x->shape, w->shape, stride, padding);
  std::vector<T> out(d.n * d.oh * d.ow * d.cout, T(0));
  const T* xv = x->values.data();
  const T* wv = w->values.data();
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t oh = 0; oh < d.oh; ++oh)
      for (std::size_t ow = 0; ow < d.ow; ++ow) {
        T* acc = &out[((n * d.oh + oh) * d.ow + ow) * d.cout];
        for (std::size_t kh = 0; kh < d.k; ++kh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * d.stride + kh) - d.pad_h;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) continue;
          for (std::size_t kw = 0; kw < d.k; ++kw) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * d.stride + kw) - d.pad_w;
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(d.w)) continue;
            const T* xrow = &xv[((n * d.h + ih) * d.w + iw) * d.cin];
            const T* wbase = &wv[(kh * d.k + kw) * d.cin * d.cout];
            for (std::size_t ci = 0; ci < d.cin; ++ci) {
              const T xs = xrow[ci];
              const T* wrow = &wbase[ci * d.cout];
              for (std::size_t co = 0; co < d.cout; ++co) acc[co] += xs * wrow[co];
            }
          }
        }
      }
  auto bw = [d](TensorNode<T>& self) {
    TensorNode<T>& xn = *self.parents[0];
    TensorNode<T>& wn = *self.parents[1];
    const bool xr = xn.requires_grad;
    const bool wr = wn.requires_grad;
    const T* xv = xn.values.data();
    const T* wv = wn.values.data();
    for (std::size_t n = 0; n < d.n; ++n)
      for (std::size_t oh = 0; oh < d.oh; ++oh)
        for (std::size_t ow = 0; ow < d.ow; ++ow) {
          const T* g = &self.grad[((n * d.oh + oh) * d.ow + ow) * d.cout];
          for (std::size_t kh = 0; kh < d.k; ++kh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * d.stride + kh) - d.pad_h;
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) continue;
            for (std::size_t kw = 0; kw < d.k; ++kw) {
              const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * d.stride + kw) - d.pad_w;
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(d.w)) continue;
              const std::size_t xbase = ((n * d.h + ih) * d.w + iw) * d.cin;
              const std::size_t wbase = (kh * d.k + kw) * d.cin * d.cout;
              for (std::size_t ci = 0; ci < d.cin; ++ci) {
                const T xs = xv[xbase + ci];
                const T* wrow = &wv[wbase + ci * d.cout];
                T xacc = T(0);
                if (wr) {
                  T* wg = &wn.grad[wbase + ci * d.cout];
                  for (std::size_t co = 0; co < d.cout; ++co) {
                    const T gv = g[co];
                    wg[co] += xs * gv;
                    xacc += wrow[co] * gv;
                  }
                } else {
                  for (std::size_t co = 0; co < d.cout; ++co) xacc += wrow[co] * g[co];
                }
                if (xr) xn.grad[xbase + ci] += xacc;
              }
            }
          }
        }
  };
  return detail::make_node<T>({d.n, d.oh, d.ow, d.cout}, std::move(out), {x, w}, std::move(bw),
                              "conv2d");
}

// Dense layer: x [N,Fin] * w [Fin,Fout] + b [Fout].
template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x->rank() != 2 || w->rank() != 2 || b->rank() != 1 || x->shape[1] != w->shape[0] ||
      b->shape[0] != w->shape[1])
    fail(ErrorKind::ShapeMismatch, "fully_connected: " + shape_str(x->shape) + " * " +
                                       shape_str(w->shape) + " + " + shape_str(b->shape));
  const std::size_t n = x->shape[0], fin = x->shape[1], fout = w->shape[1];
  std::vector<T> out(n * fout);
  for (std::size_t i = 0; i < n; ++i) {
    T* row = &out[i * fout];
    std::copy_n(b->values.data(), fout, row);
    for (std::size_t fi = 0; fi < fin; ++fi) {
      const T xs = x->values[i * fin + fi];
      const T* wrow = &w->values[fi * fout];
      for (std::size_t fo = 0; fo < fout; ++fo) row[fo] += xs * wrow[fo];
    }
  }
  auto bw = [n, fin, fout](TensorNode<T>& self) {
    TensorNode<T>& xn = *self.parents[0];
    TensorNode<T>& wn = *self.parents[1];
    TensorNode<T>& bn = *self.parents[2];
    for (std::size_t i = 0; i < n; ++i) {
      const T* g = &self.grad[i * fout];
      if (bn.requires_grad)
        for (std::size_t fo = 0; fo < fout; ++fo) bn.grad[fo] += g[fo];
      for (std::size_t fi = 0; fi < fin; ++fi) {
        const T xs = xn.values[i * fin + fi];
        const T* wrow = &wn.values[fi * fout];
        T xacc = T(0);
        if (wn.requires_grad) {
          T* wg = &wn.grad[fi * fout];
          for (std::size_t fo = 0; fo < fout; ++fo) {
            wg[fo] += xs * g[fo];
            xacc += wrow[fo] * g[fo];
          }
        } else {
          for (std::size_t fo = 0; fo < fout; ++fo) xacc += wrow[fo] * g[fo];
        }
        if (xn.requires_grad) xn.grad[i * fin + fi] += xacc;
      }
    }
  };
  return detail::make_node<T>({n, fout}, std::move(out), {x, w, b}, std::move(bw),
                              "fully_connected");
}

// ---------------------------------------------------------------------------
// Pooling.  Global pools collapse H and W to 1; local pools use an odd kernel
// with stride 1 and same padding, where border windows are clipped (average
// divides by the number of valid cells).  Max/min ties resolve to the first
// cell in row-major window order.
// ---------------------------------------------------------------------------

enum class PoolKind { Avg, Max, Min };
enum class PoolScope { Global, Local };

template <typename T>
Tensor<T> pool(PoolKind kind, PoolScope scope, const Tensor<T>& x, std::size_t kernel = 3,
               std::size_t stride = 1) {
  if (x->rank() != 4)
    fail(ErrorKind::ShapeMismatch, "pool: input must be rank-4 NHWC, got " + shape_str(x->shape));
  const std::size_t n = x->shape[0], h = x->shape[1], w = x->shape[2], c = x->shape[3];
  const T* xv = x->values.data();

  if (scope == PoolScope::Global) {
    std::vector<T> out(n * c);
    std::vector<std::uint32_t> arg;
    if (kind != PoolKind::Avg) arg.assign(n * c, 0);
    const std::size_t hw = h * w;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) {
        if (kind == PoolKind::Avg) {
          T acc = T(0);
          for (std::size_t p = 0; p < hw; ++p) acc += xv[(i * hw + p) * c + ch];
          out[i * c + ch] = acc / static_cast<T>(hw);
        } else {
          T best = xv[i * hw * c + ch];
          std::uint32_t bp = 0;
          for (std::size_t p = 1; p < hw; ++p) {
            const T v = xv[(i * hw + p) * c + ch];
            const bool better = kind == PoolKind::Max ? v > best : v < best;
            if (better) {
              best = v;
              bp = static_cast<std::uint32_t>(p);
            }
          }
          out[i * c + ch] = best;
          arg[i * c + ch] = bp;
        }
      }
    auto bw = [n, h, w, c, kind, arg](TensorNode<T>& self) {
      TensorNode<T>& p = *self.parents[0];
      if (!p.requires_grad) return;
      const std::size_t hw = h * w;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
          const T g = self.grad[i * c + ch];
          if (kind == PoolKind::Avg) {
            const T share = g / static_cast<T>(hw);
            for (std::size_t q = 0; q < hw; ++q) p.grad[(i * hw + q) * c + ch] += share;
          } else {
            p.grad[(i * hw + arg[i * c + ch]) * c + ch] += g;
          }
        }
    };
    return detail::make_node<T>({n, 1, 1, c}, std::move(out), {x}, std::move(bw), "pool");
  }

  if (stride != 1)
    fail(ErrorKind::ShapeMismatch, "pool: local scope supports stride 1 only");
  if (kernel % 2 == 0 || kernel == 0)
    fail(ErrorKind::ShapeMismatch, "pool: local kernel must be odd");
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(kernel / 2);
  std::vector<T> out(n * h * w * c);
  std::vector<std::uint32_t> arg;
  if (kind != PoolKind::Avg) arg.assign(n * h * w * c, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t oh = 0; oh < h; ++oh)
      for (std::size_t ow = 0; ow < w; ++ow)
        for (std::size_t ch = 0; ch < c; ++ch) {
          const std::size_t oi = ((i * h + oh) * w + ow) * c + ch;
          T acc = T(0);
          T best = T(0);
          std::uint32_t bp = 0;
          bool first = true;
          std::size_t count = 0;
          for (std::ptrdiff_t dh = -r; dh <= r; ++dh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh) + dh;
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::ptrdiff_t dw = -r; dw <= r; ++dw) {
              const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow) + dw;
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
              const std::size_t pi = (i * h + ih) * w + iw;
              const T v = xv[pi * c + ch];
              if (kind == PoolKind::Avg) {
                acc += v;
              } else if (first || (kind == PoolKind::Max ? v > best : v < best)) {
                best = v;
                bp = static_cast<std::uint32_t>(ih * static_cast<std::ptrdiff_t>(w) + iw);
                first = false;
              }
              ++count;
            }
          }
          out[oi] = kind == PoolKind::Avg ? acc / static_cast<T>(count) : best;
          if (kind != PoolKind::Avg) arg[oi] = bp;
        }
  auto bw = [n, h, w, c, r, kind, arg](TensorNode<T>& self) {
    TensorNode<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t oh = 0; oh < h; ++oh)
        for (std::size_t ow = 0; ow < w; ++ow)
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t oi = ((i * h + oh) * w + ow) * c + ch;
            const T g = self.grad[oi];
            if (kind == PoolKind::Avg) {
              const std::size_t h0 = oh >= static_cast<std::size_t>(r) ? oh - r : 0;
              const std::size_t h1 = std::min(h - 1, oh + static_cast<std::size_t>(r));
              const std::size_t w0 = ow >= static_cast<std::size_t>(r) ? ow - r : 0;
              const std::size_t w1 = std::min(w - 1, ow + static_cast<std::size_t>(r));
              const std::size_t count = (h1 - h0 + 1) * (w1 - w0 + 1);
              const T share = g / static_cast<T>(count);
              for (std::size_t ih = h0; ih <= h1; ++ih)
                for (std::size_t iw = w0; iw <= w1; ++iw)
                  p.grad[((i * h + ih) * w + iw) * c + ch] += share;
            } else {
              p.grad[(i * h * w + arg[oi]) * c + ch] += g;
            }
          }
  };
  return detail::make_node<T>({n, h, w, c}, std::move(out), {x}, std::move(bw), "pool");
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  const std::size_t n = x->size();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T v = x->values[i];
    // Split on sign so exp never overflows.
    if (v >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T(1) + e);
    }
  }
  auto bw = [](TensorNode<T>& self) {
    TensorNode<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.size(); ++i) {
      const T y = self.values[i];
      p.grad[i] += self.grad[i] * y * (T(1) - y);
    }
  };
  return detail::make_node<T>(x->shape, std::move(out), {x}, std::move(bw), "sigmoid");
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  const std::size_t n = x->size();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x->values[i] > T(0) ? x->values[i] : T(0);
  auto bw = [](TensorNode<T>& self) {
    TensorNode<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.size(); ++i)
      if (p.values[i] > T(0)) p.grad[i] += self.grad[i];
  };
  return detail::make_node<T>(x->shape, std::move(out), {x}, std::move(bw), "relu");
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x->rank()) fail(ErrorKind::ShapeMismatch, "softmax: axis out of range");
  const std::size_t k = x->shape[axis];
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x->shape[i];
  for (std::size_t i = axis + 1; i < x->rank(); ++i) inner *= x->shape[i];
  std::vector<T> out(x->size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * k * inner + in;
      T m = x->values[base];
      for (std::size_t j = 1; j < k; ++j) m = std::max(m, x->values[base + j * inner]);
      T sum = T(0);
      for (std::size_t j = 0; j < k; ++j) {
        const T e = std::exp(x->values[base + j * inner] - m);
        out[base + j * inner] = e;
        sum += e;
      }
      for (std::size_t j = 0; j < k; ++j) out[base + j * inner] /= sum;
    }
  auto bw = [k, outer, inner](TensorNode<T>& self) {
    TensorNode<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * k * inner + in;
        T dot = T(0);
        for (std::size_t j = 0; j < k; ++j)
          dot += self.grad[base + j * inner] * self.values[base + j * inner];
        for (std::size_t j = 0; j < k; ++j) {
          const std::size_t idx = base + j * inner;
          p.grad[idx] += self.values[idx] * (self.grad[idx] - dot);
        }
      }
  };
  return detail::make_node<T>(x->shape, std::move(out), {x}, std::move(bw), "softmax");
}

// Inverted dropout.  Inactive (training=false or rate=0) it returns the input
// node unchanged and draws nothing from the stream.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, RandomStream& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0)
    fail(ErrorKind::InvalidRate, "dropout: rate " + std::to_string(rate) + " outside [0,1)");
  if (!training || rate == 0.0) return x;
  const std::size_t n = x->size();
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(n);
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = rng.uniform() < rate ? T(0) : keep_scale;
    out[i] = x->values[i] * mask[i];
  }
  auto bw = [mask](TensorNode<T>& self) {
    TensorNode<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.size(); ++i) p.grad[i] += self.grad[i] * mask[i];
  };
  return detail::make_node<T>(x->shape, std::move(out), {x}, std::move(bw), "dropout");
}

// Mean cross-entropy from raw logits [N,K] and integer labels, computed via
// log-sum-exp so large logits stay finite.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  if (logits->rank() != 2)
    fail(ErrorKind::ShapeMismatch, "cross_entropy: logits must be [N,K], got " + shape_str(logits->shape));
  const std::size_t n = logits->shape[0], k = logits->shape[1];
  if (labels.size() != n)
    fail(ErrorKind::ShapeMismatch, "cross_entropy: " + std::to_string(labels.size()) +
                                       " labels for batch of " + std::to_string(n));
  std::vector<T> probs(n * k);
  T total = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k)
      fail(ErrorKind::LabelOutOfRange,
           "cross_entropy: label " + std::to_string(labels[i]) + " for " + std::to_string(k) + " classes");
    const T* row = &logits->values[i * k];
    T m = row[0];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
    T sum = T(0);
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - m);
    const T lse = m + std::log(sum);
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] = std::exp(row[j] - lse);
    total += lse - row[labels[i]];
  }
  total /= static_cast<T>(n);
  auto bw = [probs, labels, n, k](TensorNode<T>& self) {
    TensorNode<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    const T g = self.grad[0] / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        T d = probs[i * k + j];
        if (static_cast<std::size_t>(labels[i]) == j) d -= T(1);
        p.grad[i * k + j] += g * d;
      }
  };
  return detail::make_node<T>({1}, {total}, {logits}, std::move(bw), "cross_entropy");
}

}  // namespace drifa
