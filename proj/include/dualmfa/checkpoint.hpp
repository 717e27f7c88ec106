// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dualmfa/config.hpp"
#include "dualmfa/model.hpp"

namespace dualmfa {

/// Versioned container: magic + version, config echo, named parameter
/// payloads as little-endian 64-bit floats, trailing CRC32. Byte-identical
/// for identical states.
struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  std::vector<std::pair<std::string, Tensor>> params;
};

void save_checkpoint(const std::string& path, DualMfaModel& model, const TrainConfig& train);
Checkpoint load_checkpoint(const std::string& path);

/// Rebuilds the model from the embedded config and loads the parameters.
DualMfaModel model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace dualmfa
