// SPDX-License-Identifier: Apache-2.0
#include "dualmfa/model.hpp"

#include <random>

#include "dualmfa/error.hpp"
#include "dualmfa/gradcheck.hpp"

namespace dualmfa {

DualMfaModel::DualMfaModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  init_params(0);
}

void DualMfaModel::init_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  gru_.init(cfg_, rng);
  branch1_.init(cfg_, rng, "branch1");
  branch2_.init(cfg_, rng, "branch2");
  head_.init(cfg_, rng);
}

std::vector<Parameter*> DualMfaModel::parameters() {
  std::vector<Parameter*> out;
  for (Parameter* p : gru_.all()) out.push_back(p);
  for (Parameter* p : branch1_.all()) out.push_back(p);
  for (Parameter* p : branch2_.all()) out.push_back(p);
  for (Parameter* p : head_.all()) out.push_back(p);
  return out;
}

ModelForward DualMfaModel::forward(Graph& g, const VqaInstance& inst, const DropoutCtx& dctx) {
  return forward_from_question(g, encode(g, inst.question, gru_, cfg_), inst, dctx);
}

ModelForward DualMfaModel::forward_from_question(Graph& g, Var question, const VqaInstance& inst,
                                                 const DropoutCtx& dctx) {
  ModelForward out;
  std::optional<Var> v1, v2;
  if (cfg_.use_region_branch) {
    FusedRegion fr = fuse_region(g, question, inst.image, inst.detections, branch1_, cfg_, dctx);
    Attended at = attend_region(g, fr.fused, fr.projected_image, branch1_, dctx);
    v1 = at.pooled;
    out.attention.a1 = g.value(at.weights);
    out.attention.v1 = g.value(at.pooled);
  }
  if (cfg_.use_detection_branch) {
    FusedDetection fd =
        fuse_detection(g, question, inst.image, inst.detections, branch2_, cfg_, dctx);
    Attended at = attend_detection(g, fd.fused, fd.projected_boxes, branch2_, dctx);
    v2 = at.pooled;
    out.attention.a2 = g.value(at.weights);
    out.attention.v2 = g.value(at.pooled);
  }

  Var combined = combine(g, v1, v2, question, head_, cfg_, dctx);
  out.logits = answer_logits(g, combined, head_);
  out.probabilities = g.softmax_axis(out.logits, 0);
  return out;
}

Var DualMfaModel::loss(Graph& g, const ModelForward& out, std::size_t target) {
  return cross_entropy(g, out.logits, target);
}

double model_gradient_check(DualMfaModel& model, const VqaInstance& inst, std::size_t target,
                            double h) {
  auto loss_fn = [&](bool with_grad) {
    Graph g;
    ModelForward out = model.forward(g, inst);
    Var loss = model.loss(g, out, target);
    if (with_grad) g.backward(loss);
    return g.value(loss)[0];
  };
  return finite_diff_check_params(loss_fn, model.parameters(), h);
}

std::size_t DualMfaModel::predict(const Tensor& probabilities,
                                  const std::vector<std::string>& choices,
                                  const AnswerVocabulary& vocab) const {
  if (probabilities.size() != cfg_.n_answers) {
    throw dimension_error("probability vector " + shape_str(probabilities.shape()) +
                          " does not match " + std::to_string(cfg_.n_answers) + " answers");
  }
  if (!choices.empty()) {
    std::size_t best = cfg_.n_answers;
    double best_p = -1.0;
    for (const std::string& c : choices) {
      if (auto id = vocab.find(c); id && probabilities[*id] > best_p) {
        best_p = probabilities[*id];
        best = *id;
      }
    }
    if (best != cfg_.n_answers) return best;
    // fall through when no choice is in the vocabulary
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < probabilities.size(); ++i) {
    if (probabilities[i] > probabilities[best]) best = i;
  }
  return best;
}

}  // namespace dualmfa
