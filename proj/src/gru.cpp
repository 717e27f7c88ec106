// SPDX-License-Identifier: Apache-2.0
#include "dualmfa/gru.hpp"

#include "dualmfa/error.hpp"

namespace dualmfa {

TokenSequence TokenSequence::padded(std::vector<std::size_t> tokens, std::size_t length) {
  if (tokens.size() > length) {
    throw dimension_error("token sequence of length " + std::to_string(tokens.size()) +
                          " exceeds the fixed question length " + std::to_string(length));
  }
  TokenSequence seq;
  seq.pad_len = length - tokens.size();
  seq.ids = std::move(tokens);
  seq.ids.resize(length, 0);
  return seq;
}

void TokenSequence::validate(std::size_t vocab_size) const {
  for (std::size_t id : ids) {
    if (id >= vocab_size) {
      throw vocabulary_error("token id " + std::to_string(id) + " outside vocabulary of size " +
                             std::to_string(vocab_size));
    }
  }
}

void GruParameters::init(const ModelConfig& cfg, std::mt19937_64& rng, const std::string& prefix) {
  const std::size_t e = cfg.embed_dim, h = cfg.hidden_dim, v = cfg.vocab_size;
  W_e = Parameter(prefix + ".W_e", Tensor({e, v}));
  W_z = Parameter(prefix + ".W_z", Tensor({h, e}));
  W_r = Parameter(prefix + ".W_r", Tensor({h, e}));
  W_h = Parameter(prefix + ".W_h", Tensor({h, e}));
  U_z = Parameter(prefix + ".U_z", Tensor({h, h}));
  U_r = Parameter(prefix + ".U_r", Tensor({h, h}));
  U_h = Parameter(prefix + ".U_h", Tensor({h, h}));
  b_z = Parameter(prefix + ".b_z", Tensor({h}));
  b_r = Parameter(prefix + ".b_r", Tensor({h}));
  b_h = Parameter(prefix + ".b_h", Tensor({h}));
  fan_in_uniform_init(W_e.value, v, rng);
  for (Parameter* w : {&W_z, &W_r, &W_h}) fan_in_uniform_init(w->value, e, rng);
  for (Parameter* u : {&U_z, &U_r, &U_h}) fan_in_uniform_init(u->value, h, rng);
}

std::vector<Parameter*> GruParameters::all() {
  return {&W_e, &W_z, &W_r, &W_h, &U_z, &U_r, &U_h, &b_z, &b_r, &b_h};
}

Var embed(Graph& g, const TokenSequence& ids, GruParameters& p, std::size_t vocab_size) {
  ids.validate(vocab_size);
  return g.gather_columns(g.param(p.W_e), ids.ids);
}

namespace {

// W x + b, or x W^T + b per row when x carries a batch axis.
Var gate_affine(Graph& g, Parameter& W, Parameter& U, Parameter& b, Var x, Var h) {
  if (g.value(x).rank() == 2) {
    Var pre = g.add(g.matmul(x, g.transpose(g.param(W))), g.matmul(h, g.transpose(g.param(U))));
    return g.add(pre, g.replicate_axis(g.param(b), 0, g.value(x).extent(0)));
  }
  Var pre = g.add(g.matmul(g.param(W), x), g.matmul(g.param(U), h));
  return g.add(pre, g.param(b));
}

}  // namespace

Var gru_step(Graph& g, Var x_t, Var h_prev, GruParameters& p) {
  Var z = g.sigmoid(gate_affine(g, p.W_z, p.U_z, p.b_z, x_t, h_prev));
  Var r = g.sigmoid(gate_affine(g, p.W_r, p.U_r, p.b_r, x_t, h_prev));
  Var candidate = g.tanh(gate_affine(g, p.W_h, p.U_h, p.b_h, x_t, g.hadamard(r, h_prev)));
  Var one_minus_z = g.scale_shift(z, -1.0, 1.0);
  return g.add(g.hadamard(z, h_prev), g.hadamard(one_minus_z, candidate));
}

Var encode(Graph& g, const TokenSequence& ids, GruParameters& p, const ModelConfig& cfg) {
  if (ids.ids.size() != cfg.question_len) {
    throw dimension_error("question length " + std::to_string(ids.ids.size()) +
                          " does not match configured length " + std::to_string(cfg.question_len));
  }
  Var x = embed(g, ids, p, cfg.vocab_size);  // [T x embed]
  Var h = g.leaf(Tensor({cfg.hidden_dim}));
  for (std::size_t t = 0; t < cfg.question_len; ++t) {
    h = gru_step(g, g.select_axis(x, 0, t), h, p);
  }
  return h;
}

Var encode_batch(Graph& g, const std::vector<TokenSequence>& batch, GruParameters& p,
                 const ModelConfig& cfg) {
  if (batch.empty()) throw contract_error("encode_batch: empty batch");
  for (const TokenSequence& seq : batch) {
    if (seq.ids.size() != cfg.question_len) {
      throw dimension_error("question length " + std::to_string(seq.ids.size()) +
                            " does not match configured length " +
                            std::to_string(cfg.question_len));
    }
    seq.validate(cfg.vocab_size);
  }
  std::vector<std::size_t> step_ids(batch.size());
  Var we = g.param(p.W_e);
  Var h = g.leaf(Tensor({batch.size(), cfg.hidden_dim}));
  for (std::size_t t = 0; t < cfg.question_len; ++t) {
    for (std::size_t b = 0; b < batch.size(); ++b) step_ids[b] = batch[b].ids[t];
    Var x_t = g.gather_columns(we, step_ids);  // [B x embed]
    h = gru_step(g, x_t, h, p);
  }
  return h;
}

}  // namespace dualmfa
