// SPDX-License-Identifier: Apache-2.0
#include "dualmfa/optimizer.hpp"

#include <cmath>

#include "dualmfa/error.hpp"

namespace dualmfa {

OptimizerState OptimizerState::init(const std::vector<Parameter*>& params,
                                    const TrainConfig& cfg) {
  OptimizerState s;
  s.learning_rate = cfg.learning_rate;
  s.decay = cfg.decay;
  s.weight_decay = cfg.weight_decay;
  s.epsilon = cfg.epsilon;
  s.acc.reserve(params.size());
  for (const Parameter* p : params) s.acc.emplace_back(p->value.shape());
  return s;
}

void rmsprop_step(const std::vector<Parameter*>& params, OptimizerState& state) {
  if (state.acc.size() != params.size()) {
    throw dimension_error("optimizer state covers " + std::to_string(state.acc.size()) +
                          " parameters, got " + std::to_string(params.size()));
  }
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) {
      throw numeric_error("non-finite gradient in parameter '" + p->name + "'");
    }
  }
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    Tensor& acc = state.acc[pi];
    if (!acc.same_shape(p.value)) {
      throw dimension_error("optimizer accumulator shape " + shape_str(acc.shape()) +
                            " does not match parameter '" + p.name + "' " +
                            shape_str(p.value.shape()));
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i] + state.weight_decay * p.value[i];
      acc[i] = state.decay * acc[i] + (1.0 - state.decay) * g * g;
      p.value[i] -= state.learning_rate * g / (std::sqrt(acc[i]) + state.epsilon);
    }
  }
  ++state.step_count;
}

double global_grad_norm(const std::vector<Parameter*>& params) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) sq += p->grad[i] * p->grad[i];
  }
  return std::sqrt(sq);
}

void clip_gradients(const std::vector<Parameter*>& params, double threshold) {
  if (threshold <= 0.0) throw contract_error("clip_gradients: threshold must be positive");
  const double norm = global_grad_norm(params);
  if (norm <= threshold) return;
  const double scale = threshold / norm;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= scale;
  }
}

}  // namespace dualmfa
