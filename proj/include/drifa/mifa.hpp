#pragma once

#include <string>
#include <vector>

#include "drifa/layers.hpp"
#include "drifa/model_config.hpp"

namespace drifa {

// ---------------------------------------------------------------------------
// Multimodal information fusion attention.  Branch outputs are pooled three
// ways (min/max/avg), summed across modalities, passed through pool-specific
// transforms and fused into one shared attention map that re-weights every
// modality, followed by a per-modality channel modulation.
// ---------------------------------------------------------------------------

template <typename T>
struct MifaWeights {
  Parameter<T> omega_dm;                 // scalar on the global descriptor
  Parameter<T> omega_lm;                 // scalar on the local map
  std::vector<Parameter<T>> omega_cm;    // per-modality [1,1,1,C]
  bool omega_dm_enabled = true;
  bool omega_lm_enabled = true;
  bool omega_cm_enabled = true;

  void init(std::size_t channels, std::size_t modalities) {
    omega_dm = make_parameter<T>({1}, {T(1)});
    omega_lm = make_parameter<T>({1}, {T(1)});
    omega_cm.clear();
    for (std::size_t i = 0; i < modalities; ++i)
      omega_cm.push_back(make_parameter<T>({1, 1, 1, channels}, std::vector<T>(channels, T(1))));
  }

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    out.push_back({prefix + ".omega_dm", &omega_dm});
    out.push_back({prefix + ".omega_lm", &omega_lm});
    for (std::size_t i = 0; i < omega_cm.size(); ++i)
      out.push_back({prefix + ".omega_cm." + std::to_string(i), &omega_cm[i]});
  }
};

template <typename T>
Tensor<T> mifa_attention(const Tensor<T>& g_prime, const Tensor<T>& l_prime,
                         const MifaWeights<T>& w);

template <typename T>
std::vector<Tensor<T>> mifa_apply(const std::vector<Tensor<T>>& xs, const Tensor<T>& attention,
                                  const MifaWeights<T>& w);

namespace detail {

template <typename T>
void check_modal_stack(const std::vector<Tensor<T>>& xs, std::size_t channels) {
  if (xs.size() < 2)
    fail(ErrorKind::ShapeMismatch, "mifa: at least two modalities required");
  const Shape& base = xs[0]->shape;
  if (base.size() != 4 || base[3] != channels)
    fail(ErrorKind::ShapeMismatch, "mifa: expected [N,H,W," + std::to_string(channels) +
                                       "], got " + shape_str(base));
  for (const auto& x : xs)
    if (x->shape != base)
      fail(ErrorKind::ShapeMismatch,
           "mifa: modality shapes disagree: " + shape_str(x->shape) + " vs " + shape_str(base));
}

}  // namespace detail

template <typename T>
struct MifaModule {
  std::size_t channels = 0;
  std::size_t modalities = 0;
  DenseLayer<T> f_gmin, f_gmax, f_gavg;    // C -> C on pooled descriptors
  Conv2dLayer<T> f_lmin, f_lmax, f_lavg;   // 1x1 C -> C on pooled maps
  MifaWeights<T> weights;

  void init(std::size_t c, std::size_t m, RandomStream& rng, const WeightToggles& toggles = {}) {
    channels = c;
    modalities = m;
    f_gmin.init(c, c, rng);
    f_gmax.init(c, c, rng);
    f_gavg.init(c, c, rng);
    f_lmin.init(1, c, c, 1, rng);
    f_lmax.init(1, c, c, 1, rng);
    f_lavg.init(1, c, c, 1, rng);
    weights.init(c, m);
    weights.omega_dm_enabled = toggles.omega_dm;
    weights.omega_lm_enabled = toggles.omega_lm;
    weights.omega_cm_enabled = toggles.omega_cm;
  }

  // Global interaction: per pool kind, global-pool each modality, sum the
  // descriptors, transform, and add the three results.  Returns [N,C].
  Tensor<T> mglif_global(const std::vector<Tensor<T>>& xs) const {
    detail::check_modal_stack(xs, channels);
    const std::size_t n = xs[0]->shape[0];
    auto pooled_sum = [&](PoolKind kind) {
      Tensor<T> acc;
      for (const auto& x : xs) {
        auto p = reshape(pool(kind, PoolScope::Global, x), {n, channels});
        acc = acc ? add(acc, p) : p;
      }
      return acc;
    };
    auto g = f_gmin.forward(pooled_sum(PoolKind::Min));
    g = add(g, f_gmax.forward(pooled_sum(PoolKind::Max)));
    g = add(g, f_gavg.forward(pooled_sum(PoolKind::Avg)));
    return g;
  }

  // Local interaction: same recipe with 3x3 stride-1 pools and 1x1 convs.
  // Returns [N,H,W,C].
  Tensor<T> mglif_local(const std::vector<Tensor<T>>& xs) const {
    detail::check_modal_stack(xs, channels);
    auto pooled_sum = [&](PoolKind kind) {
      Tensor<T> acc;
      for (const auto& x : xs) {
        auto p = pool(kind, PoolScope::Local, x, 3, 1);
        acc = acc ? add(acc, p) : p;
      }
      return acc;
    };
    auto l = f_lmin.forward(pooled_sum(PoolKind::Min));
    l = add(l, f_lmax.forward(pooled_sum(PoolKind::Max)));
    l = add(l, f_lavg.forward(pooled_sum(PoolKind::Avg)));
    return l;
  }

  std::vector<Tensor<T>> apply(const std::vector<Tensor<T>>& xs, const AblationFlags& flags,
                               Tensor<T>* attention_tap = nullptr) const {
    if (!flags.mifa_active()) return xs;
    Tensor<T> g = flags.mgifa ? mglif_global(xs) : nullptr;
    Tensor<T> l = flags.mlifa ? mglif_local(xs) : nullptr;
    auto a = mifa_attention(g, l, weights);
    if (attention_tap) *attention_tap = a;
    return mifa_apply(xs, a, weights);
  }

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    f_gmin.collect(prefix + ".fpool.gmin", out);
    f_gmax.collect(prefix + ".fpool.gmax", out);
    f_gavg.collect(prefix + ".fpool.gavg", out);
    f_lmin.collect(prefix + ".fpool.lmin", out);
    f_lmax.collect(prefix + ".fpool.lmax", out);
    f_lavg.collect(prefix + ".fpool.lavg", out);
    weights.collect(prefix, out);
  }
};

// A = sigmoid(g' * omega_dm + l' * omega_lm); either branch may be null.
template <typename T>
Tensor<T> mifa_attention(const Tensor<T>& g_prime, const Tensor<T>& l_prime,
                         const MifaWeights<T>& w) {
  if (!g_prime && !l_prime) fail(ErrorKind::ShapeMismatch, "mifa_attention: both branches absent");
  Tensor<T> gterm;
  if (g_prime) {
    if (g_prime->rank() != 2)
      fail(ErrorKind::ShapeMismatch,
           "mifa_attention: descriptor must be [N,C], got " + shape_str(g_prime->shape));
    gterm = reshape(g_prime, {g_prime->shape[0], 1, 1, g_prime->shape[1]});
    if (w.omega_dm_enabled) gterm = scale(gterm, w.omega_dm.tensor);
  }
  Tensor<T> lterm;
  if (l_prime) {
    if (l_prime->rank() != 4)
      fail(ErrorKind::ShapeMismatch,
           "mifa_attention: local map must be [N,H,W,C], got " + shape_str(l_prime->shape));
    lterm = l_prime;
    if (w.omega_lm_enabled) lterm = scale(lterm, w.omega_lm.tensor);
  }
  if (gterm && lterm) {
    if (gterm->shape[0] != lterm->shape[0] || gterm->shape[3] != lterm->shape[3])
      fail(ErrorKind::ShapeMismatch, "mifa_attention: branch shapes disagree");
    return sigmoid(add(lterm, gterm));
  }
  return sigmoid(gterm ? gterm : lterm);
}

// X_i^s = X_i * A * omega_cm[i]; the same map A re-weights every modality.
template <typename T>
std::vector<Tensor<T>> mifa_apply(const std::vector<Tensor<T>>& xs, const Tensor<T>& attention,
                                  const MifaWeights<T>& w) {
  if (w.omega_cm_enabled && w.omega_cm.size() != xs.size())
    fail(ErrorKind::WeightCountMismatch,
         "mifa_apply: " + std::to_string(w.omega_cm.size()) + " channel weights for " +
             std::to_string(xs.size()) + " modalities");
  std::vector<Tensor<T>> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    auto y = mul(xs[i], attention);
    if (w.omega_cm_enabled) y = mul(y, w.omega_cm[i].tensor);
    out.push_back(y);
  }
  return out;
}

}  // namespace drifa
