// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dualmfa {

/// Shape disagreement between operands; message names both shapes.
struct dimension_error : std::runtime_error {
  explicit dimension_error(const std::string& what) : std::runtime_error(what) {}
};

/// A caller broke an operation contract (e.g. non-scalar loss in backward).
struct contract_error : std::logic_error {
  explicit contract_error(const std::string& what) : std::logic_error(what) {}
};

/// Token id outside the vocabulary.
struct vocabulary_error : std::runtime_error {
  explicit vocabulary_error(const std::string& what) : std::runtime_error(what) {}
};

/// Answer label outside the answer vocabulary.
struct label_error : std::runtime_error {
  explicit label_error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid or inconsistent configuration.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Dataset / checkpoint file problem; message names the offending record.
struct data_error : std::runtime_error {
  explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values where finite ones are required (training aborts).
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dualmfa
