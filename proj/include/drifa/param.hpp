#pragma once

#include <string>
#include <vector>

#include "drifa/tensor.hpp"

namespace drifa {

// A learnable tensor.  The optimizer skips parameters with trainable=false
// but they are still saved to and restored from checkpoints.
template <typename T>
struct Parameter {
  Tensor<T> tensor;
  bool trainable = true;
};

template <typename T>
Parameter<T> make_parameter(Shape shape, std::vector<T> values) {
  return Parameter<T>{make_tensor<T>(std::move(shape), std::move(values), true), true};
}

// View used for optimizer state, checkpoints and reporting.  Names are
// dotted paths assembled by each module ("branch0.rra1.mfa.omega_d").
template <typename T>
struct NamedParameter {
  std::string name;
  Parameter<T>* param = nullptr;
};

}  // namespace drifa
