#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "drifa/layers.hpp"
#include "drifa/mfa.hpp"
#include "drifa/mifa.hpp"
#include "drifa/random.hpp"
#include "drifa/tensor.hpp"
#include "oracle.hpp"

namespace testutil {

template <typename T>
drifa::Tensor<T> random_tensor(drifa::Shape shape, drifa::RandomStream& rng, double lo = -1.0,
                               double hi = 1.0, bool requires_grad = false) {
  std::vector<T> v(drifa::shape_size(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return drifa::make_tensor<T>(std::move(shape), std::move(v), requires_grad);
}

template <typename T>
double max_abs_diff(const drifa::Tensor<T>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a->values.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a->values[i]) - b[i]));
  return worst;
}

// ---------------------------------------------------------------------------
// Converters into the scalar oracle's parameter structs
// ---------------------------------------------------------------------------

template <typename T>
oracle::Arr to_arr(const drifa::Tensor<T>& t) {
  oracle::Arr a;
  a.shape = t->shape;
  a.v.assign(t->values.begin(), t->values.end());
  return a;
}

template <typename T>
std::vector<double> to_vec(const drifa::Tensor<T>& t) {
  return std::vector<double>(t->values.begin(), t->values.end());
}

template <typename T>
oracle::ConvP conv_params(const drifa::Conv2dLayer<T>& layer) {
  oracle::ConvP p;
  p.w = to_arr(layer.weight.tensor);
  p.b = to_vec(layer.bias.tensor);
  p.stride = layer.stride;
  p.same = layer.padding == drifa::Padding::Same;
  return p;
}

template <typename T>
oracle::DenseP dense_params(const drifa::DenseLayer<T>& layer) {
  return {to_arr(layer.weight.tensor), to_vec(layer.bias.tensor)};
}

template <typename T>
oracle::HifaP hifa_params(const drifa::HifaModule<T>& m) {
  oracle::HifaP p;
  for (int i = 0; i < 4; ++i) p.psi[i] = conv_params(m.psi[i]);
  p.f = dense_params(m.f);
  return p;
}

template <typename T>
oracle::CliaP clia_params(const drifa::CliaModule<T>& m) {
  oracle::CliaP p;
  for (int i = 0; i < 2; ++i) p.psi[i] = conv_params(m.psi[i]);
  return p;
}

template <typename T>
oracle::MglifP mglif_params(const drifa::MifaModule<T>& m) {
  oracle::MglifP p;
  p.gmin = dense_params(m.f_gmin);
  p.gmax = dense_params(m.f_gmax);
  p.gavg = dense_params(m.f_gavg);
  p.lmin = conv_params(m.f_lmin);
  p.lmax = conv_params(m.f_lmax);
  p.lavg = conv_params(m.f_lavg);
  return p;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking (double precision, central differences).
// `make_loss` must rebuild the graph from the leaves' current values.
// Returns the worst relative error over all leaf elements.
// ---------------------------------------------------------------------------

inline double fd_worst_rel_error(const std::vector<drifa::Tensor<double>>& leaves,
                                 const std::function<drifa::Tensor<double>()>& make_loss,
                                 double h = 1e-5) {
  for (const auto& leaf : leaves) leaf->zero_grad();
  auto loss = make_loss();
  drifa::backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const auto& leaf : leaves) {
    leaf->ensure_grad();
    analytic.push_back(leaf->grad);
  }

  auto eval = [&]() {
    drifa::NoGradGuard guard;
    return make_loss()->values[0];
  };

  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto& vals = leaves[li]->values;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + h;
      const double fp = eval();
      vals[i] = saved - h;
      const double fm = eval();
      vals[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[li][i];
      const double scale = std::max({1e-6, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, std::abs(a - numeric) / scale);
    }
  }
  return worst;
}

}  // namespace testutil
