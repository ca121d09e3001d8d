#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "drifa/net.hpp"

namespace drifa {

// Monte-Carlo dropout ensemble: `ensembles` chains of `iterations` stochastic
// passes each.  Pass (i, j) draws its dropout masks from a stream derived
// from (seeds[i], j), so the set of passes is fixed by the seed list alone.
struct EnsembleConfig {
  std::size_t ensembles = 5;
  std::size_t iterations = 20;
  double dropout_rate = 0.25;
  std::vector<std::uint64_t> seeds;  // one per ensemble; filled from a base seed if empty

  void validate() const {
    require(ensembles >= 1, ErrorKind::InvalidSpec, "uq: at least one ensemble required");
    require(iterations >= 1, ErrorKind::InvalidSpec, "uq: at least one iteration required");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorKind::InvalidRate,
            "uq: dropout rate outside [0,1)");
    if (!seeds.empty())
      require(seeds.size() == ensembles, ErrorKind::ConfigMismatch,
              "uq: seed list must match ensemble count");
  }
};

inline std::vector<std::uint64_t> resolve_ensemble_seeds(const EnsembleConfig& cfg,
                                                         std::uint64_t base_seed) {
  if (!cfg.seeds.empty()) return cfg.seeds;
  std::vector<std::uint64_t> seeds(cfg.ensembles);
  for (std::size_t i = 0; i < seeds.size(); ++i)
    seeds[i] = detail::mix64(base_seed ^ detail::mix64(0xE5Eull + i));
  return seeds;
}

// Per-task predictive distribution.  Probabilities are accumulated in double
// in fixed pass order, so results do not depend on scheduling.
struct PredictiveDistribution {
  std::size_t samples = 0;
  std::size_t classes = 0;
  std::vector<double> mean_probs;  // samples x classes
  std::vector<double> variance;    // samples x classes, population variance over passes
  std::vector<int> predicted;      // argmax of mean_probs, lowest index wins ties
  std::vector<double> entropy;     // -sum p ln p of mean_probs, in nats

  double prob(std::size_t i, std::size_t k) const { return mean_probs[i * classes + k]; }
};

struct McResult {
  std::vector<PredictiveDistribution> tasks;
  std::size_t total_passes = 0;
};

template <typename T>
McResult mc_predict_all(const DrifaNet<T>& net, const Batch<T>& batch,
                        const EnsembleConfig& cfg) {
  cfg.validate();
  const auto seeds = resolve_ensemble_seeds(cfg, 0);
  if (seeds.size() != cfg.ensembles)
    fail(ErrorKind::ConfigMismatch, "uq: seed list must match ensemble count");
  const auto& mcfg = net.config();
  const std::size_t n = batch.inputs.at(0)->shape[0];
  const std::size_t passes = cfg.ensembles * cfg.iterations;

  // pass-major storage: probs[task][pass][sample*classes + k]
  std::vector<std::vector<std::vector<double>>> probs(mcfg.tasks);
  for (std::size_t t = 0; t < mcfg.tasks; ++t)
    probs[t].assign(passes, std::vector<double>(n * mcfg.classes_per_task[t]));

  for (std::size_t e = 0; e < cfg.ensembles; ++e)
    for (std::size_t j = 0; j < cfg.iterations; ++j) {
      RandomStream stream = RandomStream::derive(seeds[e], j);
      ForwardOptions opt;
      opt.mode = RunMode::Stochastic;
      opt.dropout_rate = cfg.dropout_rate;
      opt.rng = &stream;
      auto fr = net.forward(batch, opt);
      const std::size_t p = e * cfg.iterations + j;
      for (std::size_t t = 0; t < mcfg.tasks; ++t) {
        auto sm = softmax(fr.logits[t], 1);
        for (std::size_t i = 0; i < sm->size(); ++i)
          probs[t][p][i] = static_cast<double>(sm->values[i]);
      }
    }

  McResult result;
  result.total_passes = passes;
  for (std::size_t t = 0; t < mcfg.tasks; ++t) {
    PredictiveDistribution dist;
    dist.samples = n;
    dist.classes = mcfg.classes_per_task[t];
    const std::size_t cells = n * dist.classes;
    dist.mean_probs.assign(cells, 0.0);
    dist.variance.assign(cells, 0.0);
    for (std::size_t p = 0; p < passes; ++p)
      for (std::size_t i = 0; i < cells; ++i) dist.mean_probs[i] += probs[t][p][i];
    for (auto& v : dist.mean_probs) v /= static_cast<double>(passes);
    for (std::size_t i = 0; i < cells; ++i) {
      bool all_equal = true;
      for (std::size_t p = 1; p < passes && all_equal; ++p)
        all_equal = probs[t][p][i] == probs[t][0][i];
      if (all_equal) continue;  // exact zero for degenerate (e.g. rate 0) passes
      double acc = 0.0;
      for (std::size_t p = 0; p < passes; ++p) {
        const double d = probs[t][p][i] - dist.mean_probs[i];
        acc += d * d;
      }
      dist.variance[i] = acc / static_cast<double>(passes);
    }
    dist.predicted.resize(n);
    dist.entropy.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = &dist.mean_probs[i * dist.classes];
      std::size_t best = 0;
      double h = 0.0;
      for (std::size_t k = 0; k < dist.classes; ++k) {
        if (row[k] > row[best]) best = k;
        if (row[k] > 0.0) h -= row[k] * std::log(row[k]);
      }
      dist.predicted[i] = static_cast<int>(best);
      dist.entropy[i] = h;
    }
    result.tasks.push_back(std::move(dist));
  }
  return result;
}

// Single-task view over the shared multi-task passes.
template <typename T>
PredictiveDistribution mc_predict(const DrifaNet<T>& net, const Batch<T>& batch,
                                  const EnsembleConfig& cfg, std::size_t task = 0) {
  if (task >= net.config().tasks)
    fail(ErrorKind::InvalidTaskOrClass, "uq: task " + std::to_string(task) + " out of range");
  return mc_predict_all(net, batch, cfg).tasks[task];
}

}  // namespace drifa
