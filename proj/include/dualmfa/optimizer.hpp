// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "dualmfa/config.hpp"
#include "dualmfa/graph.hpp"

namespace dualmfa {

/// RMSProp state: one running mean-square accumulator per parameter.
/// The 0.99 coefficient decays the squared-gradient accumulator; there is
/// no separate momentum buffer.
struct OptimizerState {
  double learning_rate = 3e-4;
  double decay = 0.99;
  double weight_decay = 1e-8;
  double epsilon = 1e-8;
  std::vector<Tensor> acc;
  std::size_t step_count = 0;

  static OptimizerState init(const std::vector<Parameter*>& params, const TrainConfig& cfg);
};

/// Per coordinate: g = grad + wd * param; acc = d * acc + (1 - d) * g^2;
/// param -= lr * g / (sqrt(acc) + eps). Throws numeric_error on non-finite
/// gradients before touching any parameter.
void rmsprop_step(const std::vector<Parameter*>& params, OptimizerState& state);

double global_grad_norm(const std::vector<Parameter*>& params);

/// Global-norm clipping: when ||g|| exceeds the threshold, every gradient
/// is scaled by threshold / ||g||.
void clip_gradients(const std::vector<Parameter*>& params, double threshold);

}  // namespace dualmfa
