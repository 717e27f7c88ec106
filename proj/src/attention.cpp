// SPDX-License-Identifier: Apache-2.0
#include "dualmfa/attention.hpp"

#include "dualmfa/error.hpp"

namespace dualmfa {

void validate_image(const ImageFeature& f, const ModelConfig& cfg) {
  const Shape want{cfg.image_channels, cfg.grid_h, cfg.grid_w};
  if (f.values.shape() != want) {
    throw dimension_error("image feature shape " + shape_str(f.values.shape()) +
                          " does not match configured " + shape_str(want));
  }
  if (!f.values.all_finite()) throw numeric_error("image feature contains non-finite values");
}

void validate_detections(const DetectionFeature& f, const ModelConfig& cfg) {
  const Shape want{cfg.det_channels, cfg.num_boxes};
  if (f.values.shape() != want) {
    throw dimension_error("detection feature shape " + shape_str(f.values.shape()) +
                          " does not match configured " + shape_str(want));
  }
  if (!f.values.all_finite()) throw numeric_error("detection feature contains non-finite values");
}

void BranchParameters::init(const ModelConfig& cfg, std::mt19937_64& rng,
                            const std::string& prefix) {
  const std::size_t dc = cfg.common_dim;
  W_r = Parameter(prefix + ".W_r", Tensor({dc, cfg.image_channels}));
  b_r = Parameter(prefix + ".b_r", Tensor({dc}));
  W_d = Parameter(prefix + ".W_d", Tensor({dc, cfg.det_channels}));
  b_d = Parameter(prefix + ".b_d", Tensor({dc}));
  W_q = Parameter(prefix + ".W_q", Tensor({dc, cfg.hidden_dim}));
  b_q = Parameter(prefix + ".b_q", Tensor({dc}));
  W_c = Parameter(prefix + ".W_c", Tensor({cfg.glimpses, dc}));
  b_c = Parameter(prefix + ".b_c", Tensor({cfg.glimpses}));
  fan_in_uniform_init(W_r.value, cfg.image_channels, rng);
  fan_in_uniform_init(W_d.value, cfg.det_channels, rng);
  fan_in_uniform_init(W_q.value, cfg.hidden_dim, rng);
  fan_in_uniform_init(W_c.value, dc, rng);
}

std::vector<Parameter*> BranchParameters::all() {
  return {&W_r, &b_r, &W_d, &b_d, &W_q, &b_q, &W_c, &b_c};
}

Var fuse_modalities(Graph& g, Var q, Var r, Var d, const ModelConfig& cfg) {
  Var fused = cfg.fusion == FusionOp::Mul ? g.hadamard(g.hadamard(q, r), d)
                                          : g.add(g.add(q, r), d);
  switch (cfg.normalization) {
    case NormOp::L2:
      return g.l2_normalize_axis(fused, {0});  // per location over channels
    case NormOp::Power:
      return g.abs_cbrt(fused);
    default:
      return fused;
  }
}

namespace {

// Shared attention: logits per location, softmax across locations,
// weighted pooling of the projected features.
Attended attend(Graph& g, Var fused, Var projected, BranchParameters& p, const DropoutCtx& dctx) {
  Var logits = dctx.apply(g, affine(g, p.W_c, p.b_c, fused));  // [G x N]
  Var a = g.softmax_axis(logits, 1);
  Var pooled = g.matmul(a, g.transpose(projected));  // [G x d_c]
  const std::size_t flat = g.value(pooled).size();
  return {a, g.reshape(pooled, {flat})};
}

}  // namespace

FusedRegion fuse_region(Graph& g, Var question, const ImageFeature& image,
                        const DetectionFeature& det, BranchParameters& p, const ModelConfig& cfg,
                        const DropoutCtx& dctx) {
  validate_image(image, cfg);
  validate_detections(det, cfg);
  const std::size_t cells = cfg.grid_cells();

  Var r_flat = g.reshape(g.leaf(image.values), {cfg.image_channels, cells});
  Var r1 = dctx.apply(g, g.tanh(affine(g, p.W_r, p.b_r, r_flat)));  // [d_c x HW]

  Var d_proj = dctx.apply(g, g.tanh(affine(g, p.W_d, p.b_d, g.leaf(det.values))));
  Var d1 = g.mean_axis(d_proj, 1);  // [d_c], averaged over boxes

  Var q1 = dctx.apply(g, g.tanh(affine(g, p.W_q, p.b_q, question)));  // [d_c]

  Var q1_grid = g.replicate_axis(q1, 1, cells);
  Var d1_grid = g.replicate_axis(d1, 1, cells);
  return {fuse_modalities(g, q1_grid, r1, d1_grid, cfg), r1};
}

Attended attend_region(Graph& g, Var fused, Var projected_image, BranchParameters& p,
                       const DropoutCtx& dctx) {
  return attend(g, fused, projected_image, p, dctx);
}

FusedDetection fuse_detection(Graph& g, Var question, const ImageFeature& image,
                              const DetectionFeature& det, BranchParameters& p,
                              const ModelConfig& cfg, const DropoutCtx& dctx) {
  validate_image(image, cfg);
  validate_detections(det, cfg);
  const std::size_t cells = cfg.grid_cells();

  Var d2 = dctx.apply(g, g.tanh(affine(g, p.W_d, p.b_d, g.leaf(det.values))));  // [d_c x N_d]

  Var r_flat = g.reshape(g.leaf(image.values), {cfg.image_channels, cells});
  Var r_proj = dctx.apply(g, g.tanh(affine(g, p.W_r, p.b_r, r_flat)));
  Var r2 = g.mean_axis(r_proj, 1);  // [d_c], averaged over grid cells

  Var q2 = dctx.apply(g, g.tanh(affine(g, p.W_q, p.b_q, question)));

  Var q2_boxes = g.replicate_axis(q2, 1, cfg.num_boxes);
  Var r2_boxes = g.replicate_axis(r2, 1, cfg.num_boxes);
  return {fuse_modalities(g, q2_boxes, r2_boxes, d2, cfg), d2};
}

Attended attend_detection(Graph& g, Var fused, Var projected_boxes, BranchParameters& p,
                          const DropoutCtx& dctx) {
  return attend(g, fused, projected_boxes, p, dctx);
}

}  // namespace dualmfa
