#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "drifa/param.hpp"

namespace drifa {

// Adam with bias correction.  Moments are stored per parameter in the order
// the parameter list is first seen; the list must stay stable between steps.
template <typename T>
class AdamOptimizer {
 public:
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamOptimizer(double learning_rate = 1e-3) : lr(learning_rate) {}

  std::size_t step_count() const { return t_; }

  void step(const std::vector<NamedParameter<T>>& params) {
    if (m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        const std::size_t n = params[i].param->tensor->size();
        m_[i].assign(n, T(0));
        v_[i].assign(n, T(0));
      }
    }
    if (m_.size() != params.size())
      fail(ErrorKind::Internal, "adam: parameter list changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter<T>& p = *params[i].param;
      if (!p.trainable) continue;
      TensorNode<T>& t = *p.tensor;
      if (t.grad.size() != t.values.size())
        fail(ErrorKind::MissingGrad, "adam: parameter '" + params[i].name + "' has no gradient");
      if (m_[i].size() != t.values.size())
        fail(ErrorKind::Internal, "adam: moment size mismatch for '" + params[i].name + "'");
      for (std::size_t j = 0; j < t.values.size(); ++j) {
        const double g = static_cast<double>(t.grad[j]);
        const double m = beta1 * static_cast<double>(m_[i][j]) + (1.0 - beta1) * g;
        const double v = beta2 * static_cast<double>(v_[i][j]) + (1.0 - beta2) * g * g;
        m_[i][j] = static_cast<T>(m);
        v_[i][j] = static_cast<T>(v);
        const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
        t.values[j] = static_cast<T>(static_cast<double>(t.values[j]) - update);
      }
    }
  }

 private:
  std::size_t t_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

// Reduce-on-plateau for a minimised metric (validation loss).  Improvement is
// a strict decrease of the best value seen; after `patience` stale epochs the
// rate is multiplied by `factor` and floored at `min_lr`.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, double factor = 0.2, std::size_t patience = 5,
                   double min_lr = 1e-5)
      : lr_(initial_lr), factor_(factor), patience_(patience), min_lr_(min_lr) {}

  double step(double metric) {
    if (metric < best_) {
      best_ = metric;
      stale_ = 0;
    } else if (++stale_ >= patience_) {
      lr_ = std::max(lr_ * factor_, min_lr_);
      stale_ = 0;
    }
    return lr_;
  }

  double lr() const { return lr_; }
  double best_metric() const { return best_; }
  std::size_t epochs_since_improvement() const { return stale_; }

 private:
  double lr_;
  double factor_;
  std::size_t patience_;
  double min_lr_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
};

// L2 norm of all trainable-parameter gradients; frozen parameters are skipped.
template <typename T>
double grad_norm(const std::vector<NamedParameter<T>>& params) {
  double acc = 0.0;
  for (const auto& np : params) {
    if (!np.param->trainable) continue;
    for (const T& g : np.param->tensor->grad) acc += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(acc);
}

}  // namespace drifa
