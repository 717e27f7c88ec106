// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dualmfa/dataset.hpp"
#include "dualmfa/model.hpp"

namespace dualmfa {

/// P2 (ASCII) graymap, values rescaled to 0..255 row-major.
void write_pgm(const std::string& path, const std::vector<double>& values, std::size_t width,
               std::size_t height);

/// One JSON record per sample with flattened a1/a2 plus per-glimpse PGM
/// maps of the grid attention. Writes <dir>/attention.jsonl and
/// <dir>/a1_sample<i>_g<j>.pgm.
void write_attention_dump(const std::string& dir, DualMfaModel& model, const Dataset& data);

}  // namespace dualmfa
