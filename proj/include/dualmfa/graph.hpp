// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <random>
#include <unordered_map>
#include <vector>

#include "dualmfa/tensor.hpp"

namespace dualmfa {

/// A learnable tensor with a persistent gradient buffer. Gradients
/// accumulate across backward calls until zero_grad().
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(0.0); }
};

/// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
void fan_in_uniform_init(Tensor& t, std::size_t fan_in, std::mt19937_64& rng);

/// Handle to a node on a Graph tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

enum class Activation { Tanh, Sigmoid };
enum class RunMode { Train, Eval };

inline constexpr double kL2NormalizeEps = 1e-12;

/// Eager tape. Every operation evaluates immediately and records itself;
/// backward() walks the records once in reverse, accumulating gradients
/// additively into every input (so reuse of a tensor sums contributions).
/// Single-threaded; one tape per sample.
class Graph {
 public:
  Var leaf(Tensor value, bool requires_grad = false);
  /// Registers a parameter as a leaf; idempotent per graph. After
  /// backward(), the node gradient is added into p.grad.
  Var param(Parameter& p);

  const Tensor& value(Var v) const;
  /// Gradient of a node after backward(); zeros if no gradient reached it.
  const Tensor& grad(Var v);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var hadamard(Var a, Var b);
  /// y = scale * x + shift, element-wise.
  Var scale_shift(Var x, double scale, double shift);
  Var unary_map(Var x, Activation f);
  Var tanh(Var x) { return unary_map(x, Activation::Tanh); }
  Var sigmoid(Var x) { return unary_map(x, Activation::Sigmoid); }
  Var softmax_axis(Var x, std::size_t axis);
  Var l2_normalize_axis(Var x, std::vector<std::size_t> axes, double eps = kL2NormalizeEps);
  /// y = |x|^(1/3), element-wise (unsigned power map).
  Var abs_cbrt(Var x);
  Var mean_axis(Var x, std::size_t axis);
  Var replicate_axis(Var x, std::size_t axis, std::size_t count);
  Var concat_axis(const std::vector<Var>& parts, std::size_t axis);
  /// Removes the given axis, keeping the slice at `index` (e.g. row t).
  Var select_axis(Var x, std::size_t axis, std::size_t index);
  Var transpose(Var x);
  Var reshape(Var x, Shape shape);
  /// out[t, :] = m[:, cols[t]]; gradient scatters (and sums) into columns.
  Var gather_columns(Var m, std::vector<std::size_t> cols);
  Var sum_all(Var x);
  /// -log softmax(logits)[target], fused log-sum-exp form.
  Var cross_entropy_logits(Var logits, std::size_t target);
  /// Inverted dropout: zero with probability rate, scale survivors by 1/(1-rate).
  Var dropout_mask(Var x, double rate, std::mt19937_64& rng);

  /// Reverse accumulation from a scalar loss. `seed` scales the upstream
  /// gradient (1/batch for mean reduction). One call per tape.
  void backward(Var loss, double seed = 1.0);

  std::size_t node_count() const { return nodes_.size(); }
  const char* op_kind(Var v) const { return node(v.id).kind; }

 private:
  struct Node {
    const char* kind = "";
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_ready = false;
    Parameter* parameter = nullptr;
    std::function<void(Graph&, std::size_t)> backprop;
  };

  Var push(const char* kind, std::vector<std::size_t> inputs, Tensor value,
           std::function<void(Graph&, std::size_t)> backprop);
  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  Tensor& grad_buf(std::size_t id);
  bool wants_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  void check_var(Var v, const char* who) const;

  // deque keeps value()/grad() references stable while the tape grows
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_ids_;
};

/// W x + b for a vector x, or per-column for a matrix x ([d x N]).
Var affine(Graph& g, Parameter& W, Parameter& b, Var x);
/// x W^T + b per row, for inputs with a leading batch axis ([B x in]).
Var affine_rows(Graph& g, Parameter& W, Parameter& b, Var x);

/// Mode-aware dropout: identity in eval mode or at rate 0.
Var dropout(Graph& g, Var x, double rate, RunMode mode, std::mt19937_64& rng);

/// Dropout site configuration threaded through the forward pass.
struct DropoutCtx {
  double rate = 0.0;
  RunMode mode = RunMode::Eval;
  std::mt19937_64* rng = nullptr;

  Var apply(Graph& g, Var x) const {
    if (mode == RunMode::Eval || rate == 0.0 || rng == nullptr) return x;
    return dropout(g, x, rate, mode, *rng);
  }
};

}  // namespace dualmfa
