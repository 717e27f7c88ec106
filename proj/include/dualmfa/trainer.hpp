// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "dualmfa/config.hpp"
#include "dualmfa/dataset.hpp"
#include "dualmfa/model.hpp"

namespace dualmfa {

enum class TrainStatus { Completed, EarlyStopped, Aborted };

struct TraceEntry {
  std::size_t iteration = 0;
  double loss = 0.0;
};

struct ValidationEntry {
  std::size_t iteration = 0;
  double accuracy = 0.0;
};

struct TrainResult {
  TrainStatus status = TrainStatus::Completed;
  std::string abort_reason;
  std::vector<TraceEntry> loss_trace;
  std::vector<ValidationEntry> validation_trace;
  double best_validation_accuracy = 0.0;
  std::size_t iterations_run = 0;
};

struct EvalTypeStats {
  std::size_t count = 0;
  double accuracy_sum = 0.0;
  double accuracy() const { return count ? accuracy_sum / static_cast<double>(count) : 0.0; }
};

/// Per-question-type breakdown. The overall figures are derived from the
/// per-type partition sums, so the recomposition is exact.
struct EvalReport {
  std::map<std::string, EvalTypeStats> per_type;

  std::size_t count() const;
  double accuracy_sum() const;
  double overall() const { return count() ? accuracy_sum() / static_cast<double>(count()) : 0.0; }
};

EvalReport evaluate(DualMfaModel& model, const Dataset& data);

/// Mini-batch loop: shuffle, forward, mean loss, backward, clip, RMSProp
/// step; validation every interval with early stopping and best-parameter
/// restore. Deterministic per seed. A non-finite gradient aborts the run
/// with the parameters from before the failing step retained.
TrainResult train(DualMfaModel& model, const Dataset& train_data, const Dataset* validation,
                  const TrainConfig& cfg);

}  // namespace dualmfa
