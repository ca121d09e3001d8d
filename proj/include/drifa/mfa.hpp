#pragma once

#include <array>
#include <string>
#include <vector>

#include "drifa/layers.hpp"
#include "drifa/model_config.hpp"

namespace drifa {

// ---------------------------------------------------------------------------
// Multi-branch fusion attention.  A global branch (HIFA) distils a cascade of
// 1x1 projections into one descriptor per channel; a local branch (CLIA)
// keeps a per-pixel map.  Learnable scalars weigh the two before a sigmoid,
// and a per-channel vector modulates the re-weighted feature map.
// ---------------------------------------------------------------------------

template <typename T>
struct HifaModule {
  std::size_t channels = 0;
  std::array<Conv2dLayer<T>, 4> psi;  // 1x1 projections along the cascade
  DenseLayer<T> f;                    // fuses the four pooled descriptors, 4C -> C

  void init(std::size_t c, RandomStream& rng) {
    channels = c;
    for (auto& layer : psi) layer.init(1, c, c, 1, rng);
    f.init(4 * c, c, rng);
  }

  // x: [N,H,W,C] -> descriptor [N,C].
  // Cascade: p = psi0(x); a = psi1(p); b = psi2(p + a); d = psi3(b).
  // Alternating global average/max pools of (p, a, b, d) are concatenated
  // pairwise and fused by a dense layer.
  Tensor<T> forward(const Tensor<T>& x) const {
    if (x->rank() != 4 || x->shape[3] != channels)
      fail(ErrorKind::ShapeMismatch,
           "hifa: expected [N,H,W," + std::to_string(channels) + "], got " + shape_str(x->shape));
    const std::size_t n = x->shape[0];
    auto p = psi[0].forward(x);
    auto a = psi[1].forward(p);
    auto b = psi[2].forward(add(p, a));
    auto d = psi[3].forward(b);
    auto v0 = reshape(pool(PoolKind::Avg, PoolScope::Global, p), {n, channels});
    auto v1 = reshape(pool(PoolKind::Max, PoolScope::Global, a), {n, channels});
    auto v2 = reshape(pool(PoolKind::Avg, PoolScope::Global, b), {n, channels});
    auto v3 = reshape(pool(PoolKind::Max, PoolScope::Global, d), {n, channels});
    auto h0 = concat<T>({v0, v1}, 1);
    auto h1 = concat<T>({v2, v3}, 1);
    return f.forward(concat<T>({h0, h1}, 1));
  }

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    for (std::size_t i = 0; i < psi.size(); ++i)
      psi[i].collect(prefix + ".psi" + std::to_string(i), out);
    f.collect(prefix + ".f", out);
  }
};

template <typename T>
struct CliaModule {
  std::size_t channels = 0;
  std::array<Conv2dLayer<T>, 2> psi;  // 1x1 projections

  void init(std::size_t c, RandomStream& rng) {
    channels = c;
    for (auto& layer : psi) layer.init(1, c, c, 1, rng);
  }

  // x: [N,H,W,C] -> local map [N,H,W,C].
  // Two sigmoid gates, each smoothed by a 3x3 average; the first smoothed
  // gate both feeds the second stage and joins the sum.
  Tensor<T> forward(const Tensor<T>& x) const {
    if (x->rank() != 4 || x->shape[3] != channels)
      fail(ErrorKind::ShapeMismatch,
           "clia: expected [N,H,W," + std::to_string(channels) + "], got " + shape_str(x->shape));
    auto e1 = sigmoid(psi[0].forward(x));
    auto d1 = pool(PoolKind::Avg, PoolScope::Local, e1, 3, 1);
    auto e2 = sigmoid(psi[1].forward(d1));
    auto d2 = pool(PoolKind::Avg, PoolScope::Local, e2, 3, 1);
    return add(d1, d2);
  }

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    for (std::size_t i = 0; i < psi.size(); ++i)
      psi[i].collect(prefix + ".psi" + std::to_string(i), out);
  }
};

template <typename T>
struct MfaWeights {
  Parameter<T> omega_d;  // scalar on the global descriptor
  Parameter<T> omega_l;  // scalar on the local map
  Parameter<T> omega_c;  // per-channel [1,1,1,C] on the re-weighted output
  bool omega_d_enabled = true;
  bool omega_l_enabled = true;
  bool omega_c_enabled = true;

  void init(std::size_t channels) {
    omega_d = make_parameter<T>({1}, {T(1)});
    omega_l = make_parameter<T>({1}, {T(1)});
    omega_c = make_parameter<T>({1, 1, 1, channels}, std::vector<T>(channels, T(1)));
  }

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    out.push_back({prefix + ".omega_d", &omega_d});
    out.push_back({prefix + ".omega_l", &omega_l});
    out.push_back({prefix + ".omega_c", &omega_c});
  }
};

// a = sigmoid(d_hat * omega_d + l_hat * omega_l).  Either branch may be null
// (ablated); its term is dropped.  With only the global branch the map is
// [N,1,1,C] and broadcasts over space when applied.
template <typename T>
Tensor<T> mfa_attention(const Tensor<T>& d_hat, const Tensor<T>& l_hat, const MfaWeights<T>& w) {
  if (!d_hat && !l_hat) fail(ErrorKind::ShapeMismatch, "mfa_attention: both branches absent");
  Tensor<T> dterm;
  if (d_hat) {
    if (d_hat->rank() != 2)
      fail(ErrorKind::ShapeMismatch, "mfa_attention: descriptor must be [N,C], got " + shape_str(d_hat->shape));
    dterm = reshape(d_hat, {d_hat->shape[0], 1, 1, d_hat->shape[1]});
    if (w.omega_d_enabled) dterm = scale(dterm, w.omega_d.tensor);
  }
  Tensor<T> lterm;
  if (l_hat) {
    if (l_hat->rank() != 4)
      fail(ErrorKind::ShapeMismatch, "mfa_attention: local map must be [N,H,W,C], got " + shape_str(l_hat->shape));
    lterm = l_hat;
    if (w.omega_l_enabled) lterm = scale(lterm, w.omega_l.tensor);
  }
  if (dterm && lterm) {
    if (dterm->shape[0] != lterm->shape[0] || dterm->shape[3] != lterm->shape[3])
      fail(ErrorKind::ShapeMismatch, "mfa_attention: branch shapes disagree");
    return sigmoid(add(lterm, dterm));
  }
  return sigmoid(dterm ? dterm : lterm);
}

// x' = x * a * omega_c.  Pass a null omega_c to skip the channel modulation.
template <typename T>
Tensor<T> mfa_apply(const Tensor<T>& x, const Tensor<T>& a, const Tensor<T>& omega_c) {
  if (x->rank() != 4 || a->rank() != 4)
    fail(ErrorKind::ShapeMismatch, "mfa_apply: rank-4 tensors expected");
  if (x->shape[3] != a->shape[3] || x->shape[0] != a->shape[0])
    fail(ErrorKind::ShapeMismatch,
         "mfa_apply: " + shape_str(a->shape) + " incompatible with " + shape_str(x->shape));
  auto y = mul(x, a);
  if (omega_c) y = mul(y, omega_c);
  return y;
}

template <typename T>
struct MfaModule {
  std::size_t channels = 0;
  HifaModule<T> hifa;
  CliaModule<T> clia;
  MfaWeights<T> weights;

  void init(std::size_t c, RandomStream& rng, const WeightToggles& toggles = {}) {
    channels = c;
    hifa.init(c, rng);
    clia.init(c, rng);
    weights.init(c);
    weights.omega_d_enabled = toggles.omega_d;
    weights.omega_l_enabled = toggles.omega_l;
    weights.omega_c_enabled = toggles.omega_c;
  }

  // Identity when the stage is ablated away.  Optionally exposes the
  // attention map for range checks and inspection.
  Tensor<T> apply(const Tensor<T>& x, const AblationFlags& flags, Tensor<T>* a_tap = nullptr) const {
    if (!flags.mfa_active()) return x;
    Tensor<T> d = flags.hifa ? hifa.forward(x) : nullptr;
    Tensor<T> l = flags.clia ? clia.forward(x) : nullptr;
    auto a = mfa_attention(d, l, weights);
    if (a_tap) *a_tap = a;
    return mfa_apply(x, a, weights.omega_c_enabled ? weights.omega_c.tensor : nullptr);
  }

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    hifa.collect(prefix + ".hifa", out);
    clia.collect(prefix + ".clia", out);
    weights.collect(prefix, out);
  }
};

}  // namespace drifa
