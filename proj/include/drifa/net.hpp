#pragma once

#include <optional>
#include <string>
#include <vector>

#include "drifa/mfa.hpp"
#include "drifa/mifa.hpp"
#include "drifa/model_config.hpp"

namespace drifa {

template <typename T>
struct Batch {
  std::vector<Tensor<T>> inputs;          // one [N,H,W,C] tensor per modality
  std::vector<std::vector<int>> labels;   // one label vector per task; may be empty
};

enum class RunMode { Train, Eval, Stochastic };

struct ForwardOptions {
  RunMode mode = RunMode::Eval;
  double dropout_rate = -1.0;   // negative: use the model's configured rate
  RandomStream* rng = nullptr;  // required when dropout is active
  bool build_graph = false;     // Train implies true
};

template <typename T>
struct ForwardTaps {
  std::vector<Tensor<T>> branch_features;   // refined per-modality features x'
  std::vector<Tensor<T>> mfa_maps;          // every MFA attention map, in order
  Tensor<T> shared_attention;               // MIFA map A (null when ablated)
  std::vector<Tensor<T>> shared_features;   // X^s fed to the heads
};

template <typename T>
struct ForwardResult {
  std::vector<Tensor<T>> logits;  // one [N,classes_t] tensor per task
  ForwardTaps<T> taps;
};

// Residual block: two 3x3 convs, each followed by ReLU and the block's MFA
// stage; the skip path is the identity, or a strided 1x1 projection when the
// block downsamples.
template <typename T>
struct RraBlock {
  bool downsample = false;
  Conv2dLayer<T> conv1, conv2;
  std::optional<Conv2dLayer<T>> skip;
  MfaModule<T> mfa;

  void init(std::size_t cin, std::size_t cout, bool ds, RandomStream& rng,
            const WeightToggles& toggles) {
    downsample = ds;
    conv1.init(3, cin, cout, ds ? 2 : 1, rng);
    conv2.init(3, cout, cout, 1, rng);
    if (ds || cin != cout) {
      skip.emplace();
      skip->init(1, cin, cout, ds ? 2 : 1, rng);
    }
    mfa.init(cout, rng, toggles);
  }

  Tensor<T> forward(const Tensor<T>& x, const AblationFlags& flags,
                    std::vector<Tensor<T>>* mfa_taps) const {
    auto tap = [&](Tensor<T>* slot) { return flags.mfa_active() && mfa_taps ? slot : nullptr; };
    Tensor<T> a1, a2;
    auto h = relu(conv1.forward(x));
    h = mfa.apply(h, flags, tap(&a1));
    h = relu(conv2.forward(h));
    h = mfa.apply(h, flags, tap(&a2));
    if (mfa_taps && a1) mfa_taps->push_back(a1);
    if (mfa_taps && a2) mfa_taps->push_back(a2);
    auto s = skip ? skip->forward(x) : x;
    return add(s, h);
  }

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    conv1.collect(prefix + ".conv1", out);
    conv2.collect(prefix + ".conv2", out);
    if (skip) skip->collect(prefix + ".skip", out);
    mfa.collect(prefix + ".mfa", out);
  }
};

// One per-modality encoder: stem conv, residual attention blocks, and a
// final refining MFA stage.
template <typename T>
struct BranchEncoder {
  Conv2dLayer<T> stem;
  std::vector<RraBlock<T>> blocks;
  MfaModule<T> refine_mfa;

  void init(const DrifaNetConfig& cfg, RandomStream& rng) {
    stem.init(3, cfg.input_channels, cfg.base_channels, 1, rng);
    std::size_t c = cfg.base_channels;
    blocks.clear();
    blocks.resize(cfg.block_downsample.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const bool ds = cfg.block_downsample[i];
      const std::size_t cout = ds ? c * 2 : c;
      blocks[i].init(c, cout, ds, rng, cfg.weights);
      c = cout;
    }
    refine_mfa.init(c, rng, cfg.weights);
  }

  Tensor<T> forward(const Tensor<T>& x, const AblationFlags& flags,
                    std::vector<Tensor<T>>* mfa_taps) const {
    auto h = relu(stem.forward(x));
    for (const auto& block : blocks) h = block.forward(h, flags, mfa_taps);
    Tensor<T> a;
    h = refine_mfa.apply(h, flags, mfa_taps ? &a : nullptr);
    if (mfa_taps && a) mfa_taps->push_back(a);
    return h;
  }

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    stem.collect(prefix + ".stem", out);
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks[i].collect(prefix + ".rra" + std::to_string(i), out);
    refine_mfa.collect(prefix + ".refine_mfa", out);
  }
};

template <typename T>
struct MtlLoss {
  Tensor<T> total;               // scalar, weighted sum over tasks
  std::vector<double> per_task;  // unweighted per-task cross-entropy values
};

// Weighted multitask cross-entropy.  Weights must be non-negative and match
// the task count; a zero weight detaches its task from the gradient.
template <typename T>
MtlLoss<T> mtl_loss(const std::vector<Tensor<T>>& logits,
                    const std::vector<std::vector<int>>& labels,
                    const std::vector<double>& task_weights) {
  if (logits.empty()) fail(ErrorKind::ShapeMismatch, "mtl_loss: no task logits");
  if (labels.size() != logits.size())
    fail(ErrorKind::LengthMismatch, "mtl_loss: " + std::to_string(labels.size()) +
                                        " label sets for " + std::to_string(logits.size()) + " tasks");
  if (task_weights.size() != logits.size())
    fail(ErrorKind::WeightCountMismatch,
         "mtl_loss: " + std::to_string(task_weights.size()) + " weights for " +
             std::to_string(logits.size()) + " tasks");
  for (double w : task_weights)
    if (w < 0.0) fail(ErrorKind::WeightCountMismatch, "mtl_loss: negative task weight");

  MtlLoss<T> result;
  Tensor<T> total;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    auto ce = cross_entropy(logits[t], labels[t]);
    result.per_task.push_back(static_cast<double>(ce->values[0]));
    auto weighted = scale(ce, scalar_tensor(static_cast<T>(task_weights[t])));
    total = total ? add(total, weighted) : weighted;
  }
  result.total = total;
  return result;
}

template <typename T>
class DrifaNet {
 public:
  explicit DrifaNet(const DrifaNetConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    RandomStream rng(cfg_.init_seed);
    branches_.resize(cfg_.modalities);
    for (auto& b : branches_) b.init(cfg_, rng);
    const std::size_t fc = cfg_.feature_channels();
    mifa_.init(fc, cfg_.modalities, rng, cfg_.weights);
    heads_.resize(cfg_.tasks);
    for (std::size_t t = 0; t < cfg_.tasks; ++t)
      heads_[t].init(cfg_.modalities * fc, cfg_.classes_per_task[t], rng);
  }

  const DrifaNetConfig& config() const { return cfg_; }
  std::size_t feature_channels() const { return cfg_.feature_channels(); }

  ForwardResult<T> forward(const Batch<T>& batch, const ForwardOptions& opt = {}) const {
    validate_batch(batch);
    const bool training_graph = opt.mode == RunMode::Train || opt.build_graph;
    std::optional<NoGradGuard> guard;
    if (!training_graph) guard.emplace();
    return forward_impl(batch, opt);
  }

  std::vector<NamedParameter<T>> parameters() {
    std::vector<NamedParameter<T>> out;
    for (std::size_t i = 0; i < branches_.size(); ++i)
      branches_[i].collect("branch" + std::to_string(i), out);
    mifa_.collect("mifa", out);
    for (std::size_t t = 0; t < heads_.size(); ++t)
      heads_[t].collect("head" + std::to_string(t), out);
    return out;
  }

  void zero_grad() {
    for (auto& np : parameters()) np.param->tensor->zero_grad();
  }

 private:
  void validate_batch(const Batch<T>& batch) const {
    if (batch.inputs.size() != cfg_.modalities)
      fail(ErrorKind::ConfigMismatch, "forward: " + std::to_string(batch.inputs.size()) +
                                          " modalities for a model with " +
                                          std::to_string(cfg_.modalities));
    const Shape& base = batch.inputs[0]->shape;
    if (base.size() != 4 || base[3] != cfg_.input_channels)
      fail(ErrorKind::ConfigMismatch,
           "forward: expected [N,H,W," + std::to_string(cfg_.input_channels) + "], got " +
               shape_str(base));
    for (const auto& x : batch.inputs)
      if (x->shape != base)
        fail(ErrorKind::ConfigMismatch, "forward: modality shapes disagree");
    if (!batch.labels.empty()) {
      if (batch.labels.size() != cfg_.tasks)
        fail(ErrorKind::ConfigMismatch, "forward: " + std::to_string(batch.labels.size()) +
                                            " label sets for " + std::to_string(cfg_.tasks) +
                                            " tasks");
      for (const auto& l : batch.labels)
        if (l.size() != base[0])
          fail(ErrorKind::ConfigMismatch, "forward: label count does not match batch size");
    }
  }

  ForwardResult<T> forward_impl(const Batch<T>& batch, const ForwardOptions& opt) const {
    ForwardResult<T> result;
    auto& taps = result.taps;
    for (std::size_t i = 0; i < batch.inputs.size(); ++i)
      taps.branch_features.push_back(
          branches_[i].forward(batch.inputs[i], cfg_.ablation, &taps.mfa_maps));

    taps.shared_features =
        mifa_.apply(taps.branch_features, cfg_.ablation, &taps.shared_attention);

    const std::size_t n = batch.inputs[0]->shape[0];
    const std::size_t fc = cfg_.feature_channels();
    std::vector<Tensor<T>> pooled;
    pooled.reserve(taps.shared_features.size());
    for (const auto& xs : taps.shared_features)
      pooled.push_back(reshape(pool(PoolKind::Avg, PoolScope::Global, xs), {n, fc}));
    auto features = concat<T>(pooled, 1);

    const bool stochastic = opt.mode == RunMode::Train || opt.mode == RunMode::Stochastic;
    const double rate = opt.dropout_rate >= 0.0 ? opt.dropout_rate : cfg_.dropout_rate;
    if (stochastic && rate > 0.0) {
      if (!opt.rng)
        fail(ErrorKind::Internal, "forward: dropout is active but no random stream was given");
      features = dropout(features, rate, *opt.rng, true);
    }

    for (const auto& head : heads_) result.logits.push_back(head.forward(features));
    return result;
  }

  DrifaNetConfig cfg_;
  std::vector<BranchEncoder<T>> branches_;
  MifaModule<T> mifa_;
  std::vector<DenseLayer<T>> heads_;
};

// ---------------------------------------------------------------------------
// Saliency: gradient-weighted activation maps at the refined branch features.
// Channel weights are the spatially averaged gradients of the chosen class
// logit; maps are ReLU'd weighted sums, scaled per image to peak at 1 (all-
// zero maps stay zero).
// ---------------------------------------------------------------------------

template <typename T>
struct SaliencyResult {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::vector<T>> maps;  // per modality: N*height*width values
};

template <typename T>
SaliencyResult<T> saliency_maps(const DrifaNet<T>& net, const Batch<T>& batch, std::size_t task,
                                std::size_t cls) {
  const auto& cfg = net.config();
  if (task >= cfg.tasks || cls >= cfg.classes_per_task[task])
    fail(ErrorKind::InvalidTaskOrClass,
         "saliency: task " + std::to_string(task) + " class " + std::to_string(cls));
  ForwardOptions opt;
  opt.mode = RunMode::Eval;
  opt.build_graph = true;
  auto fr = net.forward(batch, opt);
  auto objective = reduce_sum(slice(fr.logits[task], 1, cls, 1));
  backward(objective);

  SaliencyResult<T> result;
  const Shape& fs = fr.taps.branch_features[0]->shape;
  const std::size_t n = fs[0], h = fs[1], w = fs[2], c = fs[3];
  result.height = h;
  result.width = w;
  for (const auto& feat : fr.taps.branch_features) {
    feat->ensure_grad();
    std::vector<T> map(n * h * w, T(0));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<T> cw(c, T(0));
      for (std::size_t p = 0; p < h * w; ++p)
        for (std::size_t ch = 0; ch < c; ++ch) cw[ch] += feat->grad[(i * h * w + p) * c + ch];
      for (auto& v : cw) v /= static_cast<T>(h * w);
      T peak = T(0);
      for (std::size_t p = 0; p < h * w; ++p) {
        T acc = T(0);
        for (std::size_t ch = 0; ch < c; ++ch)
          acc += cw[ch] * feat->values[(i * h * w + p) * c + ch];
        const T v = acc > T(0) ? acc : T(0);
        map[i * h * w + p] = v;
        peak = std::max(peak, v);
      }
      if (peak > T(0))
        for (std::size_t p = 0; p < h * w; ++p) map[i * h * w + p] /= peak;
    }
    result.maps.push_back(std::move(map));
  }
  return result;
}

}  // namespace drifa
