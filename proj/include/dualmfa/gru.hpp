// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <string>
#include <vector>

#include "dualmfa/config.hpp"
#include "dualmfa/graph.hpp"

namespace dualmfa {

/// Fixed-length token sequence. Id 0 is the pad token; padding sits at
/// the tail and is still consumed by the recurrence.
struct TokenSequence {
  std::vector<std::size_t> ids;
  std::size_t pad_len = 0;

  static TokenSequence padded(std::vector<std::size_t> tokens, std::size_t length);
  void validate(std::size_t vocab_size) const;
};

/// Embedding plus the three gate weight groups of the recurrent unit.
struct GruParameters {
  Parameter W_e;             // [embed x vocab]
  Parameter W_z, W_r, W_h;   // [hidden x embed]
  Parameter U_z, U_r, U_h;   // [hidden x hidden]
  Parameter b_z, b_r, b_h;   // [hidden]

  void init(const ModelConfig& cfg, std::mt19937_64& rng, const std::string& prefix = "gru");
  std::vector<Parameter*> all();
};

/// Row t is column ids[t] of the embedding matrix. [T x embed]
Var embed(Graph& g, const TokenSequence& ids, GruParameters& p, std::size_t vocab_size);

/// One recurrent update:
///   z = sigmoid(W_z x + U_z h + b_z)
///   r = sigmoid(W_r x + U_r h + b_r)
///   c = tanh(W_h x + U_h (r o h) + b_h)
///   h' = z o h + (1 - z) o c
/// Accepts vectors ([embed], [hidden]) or a leading batch axis
/// ([B x embed], [B x hidden]).
Var gru_step(Graph& g, Var x_t, Var h_prev, GruParameters& p);

/// Folds gru_step over all positions from a zero state; returns h_T. [hidden]
Var encode(Graph& g, const TokenSequence& ids, GruParameters& p, const ModelConfig& cfg);

/// Batched encode with per-sample-independent semantics. [B x hidden]
Var encode_batch(Graph& g, const std::vector<TokenSequence>& batch, GruParameters& p,
                 const ModelConfig& cfg);

}  // namespace dualmfa
