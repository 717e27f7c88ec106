// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <string>
#include <vector>

#include "dualmfa/config.hpp"
#include "dualmfa/graph.hpp"

namespace dualmfa {

/// Whole-image grid features. [C_r x H x W]
struct ImageFeature {
  Tensor values;
};

/// Pre-extracted detection-box features. [C_d x N_d]
struct DetectionFeature {
  Tensor values;
};

void validate_image(const ImageFeature& f, const ModelConfig& cfg);
void validate_detections(const DetectionFeature& f, const ModelConfig& cfg);

/// One attention branch's projections. The two branches hold independent
/// instances; nothing is shared between them.
struct BranchParameters {
  Parameter W_r, b_r;  // image projection      [d_c x C_r], [d_c]
  Parameter W_d, b_d;  // detection projection  [d_c x C_d], [d_c]
  Parameter W_q, b_q;  // question projection   [d_c x k],   [d_c]
  Parameter W_c, b_c;  // attention logits      [G x d_c],   [G]

  void init(const ModelConfig& cfg, std::mt19937_64& rng, const std::string& prefix);
  std::vector<Parameter*> all();
};

/// Exported attention weights and attended vectors of one sample.
/// Rows of a1/a2 are probability vectors, one per glimpse.
struct AttentionResult {
  Tensor a1;  // [G x H*W]
  Tensor a2;  // [G x N_d]
  Tensor v1;  // [G*d_c]
  Tensor v2;  // [G*d_c]
};

struct FusedRegion {
  Var fused;            // C1 [d_c x H*W]
  Var projected_image;  // R1 [d_c x H*W]
};

struct FusedDetection {
  Var fused;            // C2 [d_c x N_d]
  Var projected_boxes;  // D2 [d_c x N_d]
};

struct Attended {
  Var weights;  // [G x N]
  Var pooled;   // [G*d_c], glimpse 0 first
};

/// Element-wise fusion of the three projected modalities followed by the
/// configured normalization (per grid cell / box over the channel axis).
Var fuse_modalities(Graph& g, Var q, Var r, Var d, const ModelConfig& cfg);

/// Projects all three inputs into the common space, averages the projected
/// boxes, replicates the question/detection vectors over the grid and fuses.
FusedRegion fuse_region(Graph& g, Var question, const ImageFeature& image,
                        const DetectionFeature& det, BranchParameters& p, const ModelConfig& cfg,
                        const DropoutCtx& dctx = {});

/// Attention logits per cell, softmax over the grid, weighted pooling of
/// the projected image feature. Glimpse vectors are concatenated.
Attended attend_region(Graph& g, Var fused, Var projected_image, BranchParameters& p,
                       const DropoutCtx& dctx = {});

/// Mirror of fuse_region with roles swapped: boxes stay per-box, the
/// projected grid is averaged over cells.
FusedDetection fuse_detection(Graph& g, Var question, const ImageFeature& image,
                              const DetectionFeature& det, BranchParameters& p,
                              const ModelConfig& cfg, const DropoutCtx& dctx = {});

Attended attend_detection(Graph& g, Var fused, Var projected_boxes, BranchParameters& p,
                          const DropoutCtx& dctx = {});

}  // namespace dualmfa
