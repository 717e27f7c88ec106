// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dualmfa/attention.hpp"
#include "dualmfa/config.hpp"
#include "dualmfa/dataset.hpp"
#include "dualmfa/graph.hpp"
#include "dualmfa/gru.hpp"
#include "dualmfa/head.hpp"

namespace dualmfa {

struct ModelForward {
  Var logits;         // [n_answers]
  Var probabilities;  // softmax of the logits
  AttentionResult attention;  // value snapshots; empty tensors for a disabled branch
};

/// Dual-branch co-attention model: GRU question encoding, two multiplicative
/// fusion + attention branches over the grid and the detection boxes, and a
/// question-gated answer classifier.
class DualMfaModel {
 public:
  explicit DualMfaModel(ModelConfig cfg);

  void init_params(std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  /// Stable registry order; used by the optimizer, checkpoints and sweeps.
  std::vector<Parameter*> parameters();

  GruParameters& gru() { return gru_; }
  BranchParameters& region_branch() { return branch1_; }
  BranchParameters& detection_branch() { return branch2_; }
  HeadParameters& head() { return head_; }

  ModelForward forward(Graph& g, const VqaInstance& inst, const DropoutCtx& dctx = {});
  /// Forward pass with an already-encoded question (e.g. one row of a
  /// batched encode); shares the tape with the encoder.
  ModelForward forward_from_question(Graph& g, Var question, const VqaInstance& inst,
                                     const DropoutCtx& dctx = {});
  Var loss(Graph& g, const ModelForward& out, std::size_t target);

  /// Class id of the highest-probability answer; with a non-empty choice
  /// set, the argmax is restricted to choices present in the vocabulary.
  std::size_t predict(const Tensor& probabilities, const std::vector<std::string>& choices,
                      const AnswerVocabulary& vocab) const;

 private:
  ModelConfig cfg_;
  GruParameters gru_;
  BranchParameters branch1_, branch2_;
  HeadParameters head_;
};

/// Max relative error between every parameter gradient of the full loss
/// and central finite differences at step h, on one instance (eval mode).
double model_gradient_check(DualMfaModel& model, const VqaInstance& inst, std::size_t target,
                            double h = 1e-6);

}  // namespace dualmfa
