// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace dualmfa {

/// Element-wise op fusing the three projected modalities.
enum class FusionOp { Mul, Add };
/// Normalization applied to the fused feature.
enum class NormOp { L2, Power, None };
/// How the two branch encodings h_r and h_d are merged.
enum class CombineOp { Add, Mul, Cat };

std::string to_string(FusionOp v);
std::string to_string(NormOp v);
std::string to_string(CombineOp v);
FusionOp parse_fusion(const std::string& s);
NormOp parse_norm(const std::string& s);
CombineOp parse_combine(const std::string& s);

/// All dimensions and ablation switches of the model.
struct ModelConfig {
  // question encoder
  std::size_t vocab_size = 10000;
  std::size_t embed_dim = 620;
  std::size_t hidden_dim = 2400;  // question embedding length k
  std::size_t question_len = 26;  // fixed sequence length T

  // visual inputs
  std::size_t image_channels = 2048;  // C_r
  std::size_t grid_h = 14;
  std::size_t grid_w = 14;
  std::size_t det_channels = 4097;  // C_d
  std::size_t num_boxes = 19;       // N_d

  // fusion and attention
  std::size_t common_dim = 1200;  // d_c
  std::size_t glimpses = 2;       // G
  std::size_t n_answers = 2000;
  FusionOp fusion = FusionOp::Mul;
  NormOp normalization = NormOp::L2;
  CombineOp combine = CombineOp::Add;
  bool use_region_branch = true;
  bool use_detection_branch = true;

  std::size_t grid_cells() const { return grid_h * grid_w; }
  std::size_t pooled_dim() const { return glimpses * common_dim; }
  bool dual() const { return use_region_branch && use_detection_branch; }
  std::size_t combine_dim() const;
  void validate() const;

  /// Small dimensions for exhaustive finite-difference sweeps.
  static ModelConfig tiny();
  /// Dimensions for synthetic-data training on one CPU.
  static ModelConfig desk();
};

/// Optimization hyperparameters and loop control.
struct TrainConfig {
  std::size_t batch_size = 300;
  std::size_t max_iterations = 250000;
  std::size_t validation_interval = 10000;
  std::size_t early_stop_patience = 5;
  double learning_rate = 3e-4;
  double decay = 0.99;  // squared-gradient accumulator decay
  double weight_decay = 1e-8;
  double epsilon = 1e-8;
  double dropout_rate = 0.5;
  double clip_threshold = 10.0;
  std::uint64_t seed = 0;

  void validate() const;

  /// Loop settings for desk-scale synthetic runs.
  static TrainConfig desk();
};

/// Flat key=value text, fixed key order, round-trip exact.
std::string write_config(const ModelConfig& model, const TrainConfig& train);
void parse_config_text(const std::string& text, ModelConfig& model, TrainConfig& train);
void load_config_file(const std::string& path, ModelConfig& model, TrainConfig& train);

}  // namespace dualmfa
