#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "drifa/nn_ops.hpp"
#include "drifa/param.hpp"
#include "drifa/random.hpp"

namespace drifa {

namespace detail {

// He-style uniform init: bound = sqrt(6 / fan_in), biases start at zero.
template <typename T>
std::vector<T> he_uniform(std::size_t count, std::size_t fan_in, RandomStream& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<T> v(count);
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return v;
}

}  // namespace detail

template <typename T>
struct Conv2dLayer {
  std::size_t kernel = 3;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t stride = 1;
  Padding padding = Padding::Same;
  Parameter<T> weight;
  Parameter<T> bias;

  void init(std::size_t k, std::size_t cin, std::size_t cout, std::size_t s, RandomStream& rng) {
    kernel = k;
    in_channels = cin;
    out_channels = cout;
    stride = s;
    const std::size_t fan_in = k * k * cin;
    weight = make_parameter<T>({k, k, cin, cout}, detail::he_uniform<T>(k * k * cin * cout, fan_in, rng));
    bias = make_parameter<T>({cout}, std::vector<T>(cout, T(0)));
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    auto y = conv2d(x, weight.tensor, stride, padding);
    return add(y, reshape(bias.tensor, {1, 1, 1, out_channels}));
  }

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    out.push_back({prefix + ".weight", &weight});
    out.push_back({prefix + ".bias", &bias});
  }
};

template <typename T>
struct DenseLayer {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  Parameter<T> weight;
  Parameter<T> bias;

  void init(std::size_t fin, std::size_t fout, RandomStream& rng) {
    in_features = fin;
    out_features = fout;
    weight = make_parameter<T>({fin, fout}, detail::he_uniform<T>(fin * fout, fin, rng));
    bias = make_parameter<T>({fout}, std::vector<T>(fout, T(0)));
  }

  Tensor<T> forward(const Tensor<T>& x) const { return fully_connected(x, weight.tensor, bias.tensor); }

  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    out.push_back({prefix + ".weight", &weight});
    out.push_back({prefix + ".bias", &bias});
  }
};

}  // namespace drifa
