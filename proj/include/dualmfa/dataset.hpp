// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dualmfa/attention.hpp"
#include "dualmfa/config.hpp"
#include "dualmfa/gru.hpp"
#include "dualmfa/head.hpp"

namespace dualmfa {

/// Where the generator planted the answer signal. Generator output only;
/// the label is a deterministic function of these fields plus the features.
struct PlantedMeta {
  enum class Type { Region, Detection };
  Type type = Type::Region;
  std::size_t channel = 0;   // query channel carrying the spike
  std::size_t location = 0;  // grid cell (patch top-left) or box index
  std::size_t bucket = 0;    // answer class
};

std::string to_string(PlantedMeta::Type t);

/// One sample: question, visual features, ground-truth answers.
struct VqaInstance {
  TokenSequence question;
  ImageFeature image;
  DetectionFeature detections;
  std::vector<std::string> answers;  // 10 for VQA-style, 1 for COCO-QA-style
  std::vector<std::string> choices;  // optional multiple-choice set
  std::optional<PlantedMeta> planted;

  std::string question_type() const;
};

struct Dataset {
  std::vector<VqaInstance> instances;
  std::vector<std::string> vocabulary;  // line number = token id, line 0 = <pad>
  AnswerVocabulary answers;

  std::size_t size() const { return instances.size(); }
};

/// Knobs of the synthetic planted task. The answer is a bucket of a
/// planted value channel; the question names the spike channel to find.
struct PlantedGenConfig {
  double spike = 3.0;
  double noise_sigma = 0.1;
  std::size_t buckets = 4;
  std::size_t query_channels = 4;
  std::size_t patch = 2;  // side length of the planted grid patch

  std::size_t value_channel() const { return query_channels; }
  void validate(const ModelConfig& cfg) const;
};

std::vector<std::string> planted_vocabulary(const PlantedGenConfig& gen);
std::vector<std::string> planted_answer_names(const PlantedGenConfig& gen);

/// Deterministic given the seed: background ~ N(0, sigma), a spike on the
/// question's channel marks one box (detection-type) or one grid patch
/// (region-type), and the value channel at the marked location encodes the
/// answer bucket.
Dataset generate_planted(std::size_t n, const ModelConfig& cfg, const PlantedGenConfig& gen,
                         std::uint64_t seed);

/// Recomputes the label from features and the planted location alone.
std::size_t planted_label_rule(const VqaInstance& inst, const ModelConfig& cfg,
                               const PlantedGenConfig& gen);

/// Unstructured instance (features ~ N(0,1), random tokens, one random
/// answer id as a string) for gradient and invariant sweeps.
VqaInstance random_instance(const ModelConfig& cfg, std::mt19937_64& rng);

/// Directory layout: manifest.txt, features.bin, vocab.txt, answers.txt.
void write_dataset(const std::string& dir, const Dataset& data);
/// Validates per-record lengths and CRC32 before returning anything; with
/// `expect`, also validates feature shapes against the config.
Dataset read_dataset(const std::string& dir, const ModelConfig* expect = nullptr);

std::vector<std::string> load_vocabulary(const std::string& path);
void save_vocabulary(const std::string& path, const std::vector<std::string>& vocab);

/// CRC-32 (IEEE), for blob integrity checks.
std::uint32_t crc32(const unsigned char* data, std::size_t len);

}  // namespace dualmfa
