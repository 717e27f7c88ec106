// SPDX-License-Identifier: Apache-2.0
#include "dualmfa/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "dualmfa/error.hpp"

namespace dualmfa {

namespace {

void axis_split(const Shape& s, std::size_t axis, std::size_t& outer, std::size_t& extent,
                std::size_t& inner) {
  outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  extent = s[axis];
  inner = 1;
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
}

}  // namespace

void fan_in_uniform_init(Tensor& t, std::size_t fan_in, std::mt19937_64& rng) {
  double a = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  std::uniform_real_distribution<double> dist(-a, a);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
}

void Graph::check_var(Var v, const char* who) const {
  if (!v.valid() || v.id >= nodes_.size()) {
    throw contract_error(std::string(who) + ": variable does not belong to this graph");
  }
}

Var Graph::push(const char* kind, std::vector<std::size_t> inputs, Tensor value,
                std::function<void(Graph&, std::size_t)> backprop) {
  std::size_t id = nodes_.size();
  bool req = false;
  for (std::size_t in : inputs) {
    if (in >= id) throw contract_error("graph: node inputs must precede the node");
    req = req || nodes_[in].requires_grad;
  }
  Node n;
  n.kind = kind;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  n.requires_grad = req;
  if (req) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{id};
}

Tensor& Graph::grad_buf(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad_ready) {
    n.grad = Tensor(n.value.shape());
    n.grad_ready = true;
  }
  return n.grad;
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  Var v = push("leaf", {}, std::move(value), nullptr);
  nodes_[v.id].requires_grad = requires_grad;
  return v;
}

Var Graph::param(Parameter& p) {
  auto it = param_ids_.find(&p);
  if (it != param_ids_.end()) return Var{it->second};
  if (!p.grad.same_shape(p.value)) {
    throw dimension_error("parameter '" + p.name + "': grad shape " + shape_str(p.grad.shape()) +
                          " does not match value shape " + shape_str(p.value.shape()));
  }
  Var v = push("param", {}, p.value, nullptr);
  nodes_[v.id].requires_grad = true;
  nodes_[v.id].parameter = &p;
  param_ids_.emplace(&p, v.id);
  return v;
}

const Tensor& Graph::value(Var v) const {
  check_var(v, "value");
  return nodes_[v.id].value;
}

const Tensor& Graph::grad(Var v) {
  check_var(v, "grad");
  return grad_buf(v.id);
}

Var Graph::matmul(Var a, Var b) {
  check_var(a, "matmul");
  check_var(b, "matmul");
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.rank() != 2 || (B.rank() != 2 && B.rank() != 1)) {
    throw dimension_error("matmul: expected [m x k] by [k x n] or [k], got " +
                          shape_str(A.shape()) + " by " + shape_str(B.shape()));
  }
  const std::size_t m = A.extent(0), k = A.extent(1);
  const std::size_t n = B.rank() == 1 ? 1 : B.extent(1);
  if (B.extent(0) != k) {
    throw dimension_error("matmul: inner extents disagree: " + shape_str(A.shape()) + " by " +
                          shape_str(B.shape()));
  }
  Tensor out(B.rank() == 1 ? Shape{m} : Shape{m, n});
  const double* pa = A.data();
  const double* pb = B.data();
  double* po = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = pa[i * k + kk];
      const double* brow = pb + kk * n;
      double* orow = po + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  return push("matmul", {a.id, b.id}, std::move(out), [](Graph& g, std::size_t self) {
    Node& nd = g.node(self);
    const std::size_t ia = nd.inputs[0], ib = nd.inputs[1];
    const Tensor& A = g.node(ia).value;
    const Tensor& B = g.node(ib).value;
    const Tensor& G = nd.grad;
    const std::size_t m = A.extent(0), k = A.extent(1);
    const std::size_t n = B.rank() == 1 ? 1 : B.extent(1);
    if (g.wants_grad(ia)) {
      Tensor& dA = g.grad_buf(ia);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * B[kk * n + j];
          dA[i * k + kk] += s;
        }
      }
    }
    if (g.wants_grad(ib)) {
      Tensor& dB = g.grad_buf(ib);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double aik = A[i * k + kk];
          for (std::size_t j = 0; j < n; ++j) dB[kk * n + j] += aik * G[i * n + j];
        }
      }
    }
  });
}

Var Graph::add(Var a, Var b) {
  check_var(a, "add");
  check_var(b, "add");
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B)) {
    throw dimension_error("add: shapes disagree: " + shape_str(A.shape()) + " vs " +
                          shape_str(B.shape()));
  }
  Tensor out(A.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
  return push("add", {a.id, b.id}, std::move(out), [](Graph& g, std::size_t self) {
    Node& nd = g.node(self);
    const Tensor& G = nd.grad;
    for (std::size_t s = 0; s < 2; ++s) {
      const std::size_t in = nd.inputs[s];
      if (!g.wants_grad(in)) continue;
      Tensor& d = g.grad_buf(in);
      for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i];
    }
  });
}

Var Graph::hadamard(Var a, Var b) {
  check_var(a, "hadamard");
  check_var(b, "hadamard");
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B)) {
    throw dimension_error("hadamard: shapes disagree: " + shape_str(A.shape()) + " vs " +
                          shape_str(B.shape()));
  }
  Tensor out(A.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return push("hadamard", {a.id, b.id}, std::move(out), [](Graph& g, std::size_t self) {
    Node& nd = g.node(self);
    const std::size_t ia = nd.inputs[0], ib = nd.inputs[1];
    const Tensor& A = g.node(ia).value;
    const Tensor& B = g.node(ib).value;
    const Tensor& G = nd.grad;
    if (g.wants_grad(ia)) {
      Tensor& dA = g.grad_buf(ia);
      for (std::size_t i = 0; i < G.size(); ++i) dA[i] += G[i] * B[i];
    }
    if (g.wants_grad(ib)) {
      Tensor& dB = g.grad_buf(ib);
      for (std::size_t i = 0; i < G.size(); ++i) dB[i] += G[i] * A[i];
    }
  });
}

Var Graph::scale_shift(Var x, double scale, double shift) {
  check_var(x, "scale_shift");
  const Tensor& X = value(x);
  Tensor out(X.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * X[i] + shift;
  return push("scale_shift", {x.id}, std::move(out), [scale](Graph& g, std::size_t self) {
    Node& nd = g.node(self);
    const std::size_t in = nd.inputs[0];
    if (!g.wants_grad(in)) return;
    Tensor& d = g.grad_buf(in);
    const Tensor& G = nd.grad;
    for (std::size_t i = 0; i < G.size(); ++i) d[i] += scale * G[i];
  });
}

Var Graph::unary_map(Var x, Activation f) {
  check_var(x, "unary_map");
  const Tensor& X = value(x);
  Tensor out(X.shape());
  if (f == Activation::Tanh) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(X[i]);
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-X[i]));
  }
  const char* kind = f == Activation::Tanh ? "tanh" : "sigmoid";
  return push(kind, {x.id}, std::move(out), [f](Graph& g, std::size_t self) {
    Node& nd = g.node(self);
    const std::size_t in = nd.inputs[0];
    if (!g.wants_grad(in)) return;
    Tensor& d = g.grad_buf(in);
    const Tensor& Y = nd.value;
    const Tensor& G = nd.grad;
    if (f == Activation::Tanh) {
      for (std::size_t i = 0; i < G.size(); ++i) d[i] += (1.0 - Y[i] * Y[i]) * G[i];
    } else {
      for (std::size_t i = 0; i < G.size(); ++i) d[i] += Y[i] * (1.0 - Y[i]) * G[i];
    }
  });
}

Var Graph::softmax_axis(Var x, std::size_t axis) {
  check_var(x, "softmax_axis");
  const Tensor& X = value(x);
  if (axis >= X.rank()) throw contract_error("softmax_axis: axis out of range");
  std::size_t outer, extent, inner;
  axis_split(X.shape(), axis, outer, extent, inner);
  Tensor out(X.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * extent * inner + i;
      double m = X[base];
      for (std::size_t a = 1; a < extent; ++a) m = std::max(m, X[base + a * inner]);
      double denom = 0.0;
      for (std::size_t a = 0; a < extent; ++a) {
        const double e = std::exp(X[base + a * inner] - m);
        out[base + a * inner] = e;
        denom += e;
      }
      for (std::size_t a = 0; a < extent; ++a) out[base + a * inner] /= denom;
    }
  }
  return push("softmax", {x.id}, std::move(out), [axis](Graph& g, std::size_t self) {
    Node& nd = g.node(self);
    const std::size_t in = nd.inputs[0];
    if (!g.wants_grad(in)) return;
    Tensor& d = g.grad_buf(in);
    const Tensor& Y = nd.value;
    const Tensor& G = nd.grad;
    std::size_t outer, extent, inner;
    axis_split(Y.shape(), axis, outer, extent, inner);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * extent * inner + i;
        double dot = 0.0;
        for (std::size_t a = 0; a < extent; ++a) {
          const std::size_t k = base + a * inner;
          dot += G[k] * Y[k];
        }
        for (std::size_t a = 0; a < extent; ++a) {
          const std::size_t k = base + a * inner;
          d[k] += Y[k] * (G[k] - dot);
        }
      }
    }
  });
}

Var Graph::l2_normalize_axis(Var x, std::vector<std::size_t> axes, double eps) {
  check_var(x, "l2_normalize_axis");
  const Tensor& X = value(x);
  if (axes.empty()) throw contract_error("l2_normalize_axis: empty axis set");
  std::sort(axes.begin(), axes.end());
  if (std::adjacent_find(axes.begin(), axes.end()) != axes.end()) {
    throw contract_error("l2_normalize_axis: duplicate axis");
  }
  if (axes.back() >= X.rank()) throw contract_error("l2_normalize_axis: axis out of range");
  if (eps <= 0.0) throw contract_error("l2_normalize_axis: eps must be positive");

  const std::size_t rank = X.rank();
  std::vector<bool> reduced(rank, false);
  for (std::size_t a : axes) reduced[a] = true;

  // Row-major strides of x and of the complement (group) index space.
  std::vector<std::size_t> stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) stride[i - 1] = stride[i] * X.extent(i);
  std::size_t groups = 1;
  std::vector<std::size_t> gstride(rank, 0);
  for (std::size_t i = rank; i-- > 0;) {
    if (!reduced[i]) {
      gstride[i] = groups;
      groups *= X.extent(i);
    }
  }

  std::vector<std::uint32_t> gid(X.size());
  std::vector<double> norm(groups, 0.0);
  for (std::size_t i = 0; i < X.size(); ++i) {
    std::size_t rem = i, gi = 0;
    for (std::size_t dim = 0; dim < rank; ++dim) {
      const std::size_t coord = rem / stride[dim];
      rem %= stride[dim];
      gi += coord * gstride[dim];
    }
    gid[i] = static_cast<std::uint32_t>(gi);
    norm[gi] += X[i] * X[i];
  }
  for (double& v : norm) v = std::sqrt(v);

  Tensor out(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = X[i] / std::max(norm[gid[i]], eps);

  return push("l2_normalize", {x.id}, std::move(out),
              [eps, gid = std::move(gid), norm = std::move(norm),
               groups](Graph& g, std::size_t self) {
                Node& nd = g.node(self);
                const std::size_t in = nd.inputs[0];
                if (!g.wants_grad(in)) return;
                Tensor& d = g.grad_buf(in);
                const Tensor& X = g.node(in).value;
                const Tensor& G = nd.grad;
                std::vector<double> dot(groups, 0.0);
                for (std::size_t i = 0; i < G.size(); ++i) dot[gid[i]] += X[i] * G[i];
                for (std::size_t i = 0; i < G.size(); ++i) {
                  const double n = norm[gid[i]];
                  if (n >= eps) {
                    d[i] += G[i] / n - X[i] * dot[gid[i]] / (n * n * n);
                  } else {
                    d[i] += G[i] / eps;
                  }
                }
              });
}

Var Graph::abs_cbrt(Var x) {
  check_var(x, "abs_cbrt");
  const Tensor& X = value(x);
  Tensor out(X.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::cbrt(std::fabs(X[i]));
  return push("abs_cbrt", {x.id}, std::move(out), [](Graph& g, std::size_t self) {
    Node& nd = g.node(self);
    const std::size_t in = nd.inputs[0];
    if (!g.wants_grad(in)) return;
    Tensor& d = g.grad_buf(in);
    const Tensor& X = g.node(in).value;
    const Tensor& G = nd.grad;
    // derivative clamped near zero so training stays finite
    constexpr double kClamp = 1e-9;
    for (std::size_t i = 0; i < G.size(); ++i) {
      const double ax = std::fabs(X[i]);
      if (ax == 0.0) continue;
      const double r = std::cbrt(std::max(ax, kClamp));
      const double slope = 1.0 / (3.0 * r * r);
      d[i] += (X[i] > 0.0 ? slope : -slope) * G[i];
    }
  });
}

Var Graph::mean_axis(Var x, std::size_t axis) {
  check_var(x, "mean_axis");
  const Tensor& X = value(x);
  if (axis >= X.rank()) throw contract_error("mean_axis: axis out of range");
  std::size_t outer, extent, inner;
  axis_split(X.shape(), axis, outer, extent, inner);
  Shape oshape;
  for (std::size_t i = 0; i < X.rank(); ++i) {
    if (i != axis) oshape.push_back(X.extent(i));
  }
  Tensor out(std::move(oshape));
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      // extended-precision accumulation keeps replicate -> mean an exact
      // round trip and costs nothing at these sizes
      long double s = 0.0L;
      for (std::size_t a = 0; a < extent; ++a) s += X[(o * extent + a) * inner + i];
      out[o * inner + i] = static_cast<double>(s / static_cast<long double>(extent));
    }
  }
  return push("mean_axis", {x.id}, std::move(out), [axis](Graph& g, std::size_t self) {
    Node& nd = g.node(self);
    const std::size_t in = nd.inputs[0];
    if (!g.wants_grad(in)) return;
    Tensor& d = g.grad_buf(in);
    const Tensor& G = nd.grad;
    std::size_t outer, extent, inner;
    axis_split(g.node(in).value.shape(), axis, outer, extent, inner);
    const double scale = 1.0 / static_cast<double>(extent);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        const double gv = G[o * inner + i] * scale;
        for (std::size_t a = 0; a < extent; ++a) d[(o * extent + a) * inner + i] += gv;
      }
    }
  });
}

Var Graph::replicate_axis(Var x, std::size_t axis, std::size_t count) {
  check_var(x, "replicate_axis");
  const Tensor& X = value(x);
  if (axis > X.rank()) throw contract_error("replicate_axis: axis out of range");
  if (count == 0) throw contract_error("replicate_axis: count must be positive");
  Shape oshape = X.shape();
  oshape.insert(oshape.begin() + static_cast<std::ptrdiff_t>(axis), count);
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= X.extent(i);
  const std::size_t inner = X.size() / outer;
  Tensor out(std::move(oshape));
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t c = 0; c < count; ++c) {
      for (std::size_t i = 0; i < inner; ++i) {
        out[(o * count + c) * inner + i] = X[o * inner + i];
      }
    }
  }
  return push("replicate_axis", {x.id}, std::move(out),
              [axis, count](Graph& g, std::size_t self) {
                Node& nd = g.node(self);
                const std::size_t in = nd.inputs[0];
                if (!g.wants_grad(in)) return;
                Tensor& d = g.grad_buf(in);
                const Tensor& X = g.node(in).value;
                const Tensor& G = nd.grad;
                std::size_t outer = 1;
                for (std::size_t i = 0; i < axis; ++i) outer *= X.extent(i);
                const std::size_t inner = X.size() / outer;
                for (std::size_t o = 0; o < outer; ++o) {
                  for (std::size_t c = 0; c < count; ++c) {
                    for (std::size_t i = 0; i < inner; ++i) {
                      d[o * inner + i] += G[(o * count + c) * inner + i];
                    }
                  }
                }
              });
}

Var Graph::concat_axis(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw contract_error("concat_axis: no parts");
  for (Var p : parts) check_var(p, "concat_axis");
  const Tensor& first = value(parts[0]);
  if (axis >= first.rank()) throw contract_error("concat_axis: axis out of range");
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& T = value(p);
    if (T.rank() != first.rank()) {
      throw dimension_error("concat_axis: rank mismatch: " + shape_str(first.shape()) + " vs " +
                            shape_str(T.shape()));
    }
    for (std::size_t i = 0; i < first.rank(); ++i) {
      if (i != axis && T.extent(i) != first.extent(i)) {
        throw dimension_error("concat_axis: shapes disagree off the concat axis: " +
                              shape_str(first.shape()) + " vs " + shape_str(T.shape()));
      }
    }
    total += T.extent(axis);
  }
  Shape oshape = first.shape();
  oshape[axis] = total;
  std::size_t outer, oextent, inner;
  axis_split(oshape, axis, outer, oextent, inner);
  Tensor out(oshape);
  std::vector<std::size_t> ids;
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& T = value(p);
    const std::size_t e = T.extent(axis);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t a = 0; a < e; ++a) {
        for (std::size_t i = 0; i < inner; ++i) {
          out[(o * oextent + off + a) * inner + i] = T[(o * e + a) * inner + i];
        }
      }
    }
    off += e;
    ids.push_back(p.id);
  }
  return push("concat_axis", std::move(ids), std::move(out),
              [axis](Graph& g, std::size_t self) {
                Node& nd = g.node(self);
                const Tensor& G = nd.grad;
                std::size_t outer, oextent, inner;
                axis_split(G.shape(), axis, outer, oextent, inner);
                std::size_t off = 0;
                for (std::size_t in : nd.inputs) {
                  const std::size_t e = g.node(in).value.extent(axis);
                  if (g.wants_grad(in)) {
                    Tensor& d = g.grad_buf(in);
                    for (std::size_t o = 0; o < outer; ++o) {
                      for (std::size_t a = 0; a < e; ++a) {
                        for (std::size_t i = 0; i < inner; ++i) {
                          d[(o * e + a) * inner + i] += G[(o * oextent + off + a) * inner + i];
                        }
                      }
                    }
                  }
                  off += e;
                }
              });
}

Var Graph::select_axis(Var x, std::size_t axis, std::size_t index) {
  check_var(x, "select_axis");
  const Tensor& X = value(x);
  if (axis >= X.rank()) throw contract_error("select_axis: axis out of range");
  if (index >= X.extent(axis)) throw contract_error("select_axis: index out of range");
  std::size_t outer, extent, inner;
  axis_split(X.shape(), axis, outer, extent, inner);
  Shape oshape;
  for (std::size_t i = 0; i < X.rank(); ++i) {
    if (i != axis) oshape.push_back(X.extent(i));
  }
  Tensor out(std::move(oshape));
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      out[o * inner + i] = X[(o * extent + index) * inner + i];
    }
  }
  return push("select_axis", {x.id}, std::move(out),
              [axis, index](Graph& g, std::size_t self) {
                Node& nd = g.node(self);
                const std::size_t in = nd.inputs[0];
                if (!g.wants_grad(in)) return;
                Tensor& d = g.grad_buf(in);
                const Tensor& G = nd.grad;
                std::size_t outer, extent, inner;
                axis_split(g.node(in).value.shape(), axis, outer, extent, inner);
                for (std::size_t o = 0; o < outer; ++o) {
                  for (std::size_t i = 0; i < inner; ++i) {
                    d[(o * extent + index) * inner + i] += G[o * inner + i];
                  }
                }
              });
}

Var Graph::transpose(Var x) {
  check_var(x, "transpose");
  const Tensor& X = value(x);
  if (X.rank() != 2) throw dimension_error("transpose: expected rank-2, got " + shape_str(X.shape()));
  const std::size_t r = X.extent(0), c = X.extent(1);
  Tensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = X[i * c + j];
  }
  return push("transpose", {x.id}, std::move(out), [](Graph& g, std::size_t self) {
    Node& nd = g.node(self);
    const std::size_t in = nd.inputs[0];
    if (!g.wants_grad(in)) return;
    Tensor& d = g.grad_buf(in);
    const Tensor& G = nd.grad;
    const std::size_t r = d.extent(0), c = d.extent(1);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) d[i * c + j] += G[j * r + i];
    }
  });
}

Var Graph::reshape(Var x, Shape shape) {
  check_var(x, "reshape");
  const Tensor& X = value(x);
  if (shape_size(shape) != X.size()) {
    throw dimension_error("reshape: cannot view " + shape_str(X.shape()) + " as " +
                          shape_str(shape));
  }
  Tensor out(std::move(shape), X.values());
  return push("reshape", {x.id}, std::move(out), [](Graph& g, std::size_t self) {
    Node& nd = g.node(self);
    const std::size_t in = nd.inputs[0];
    if (!g.wants_grad(in)) return;
    Tensor& d = g.grad_buf(in);
    const Tensor& G = nd.grad;
    for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i];
  });
}

Var Graph::gather_columns(Var m, std::vector<std::size_t> cols) {
  check_var(m, "gather_columns");
  const Tensor& M = value(m);
  if (M.rank() != 2) {
    throw dimension_error("gather_columns: expected rank-2, got " + shape_str(M.shape()));
  }
  const std::size_t rows = M.extent(0), ncols = M.extent(1);
  for (std::size_t c : cols) {
    if (c >= ncols) throw contract_error("gather_columns: column index out of range");
  }
  Tensor out(Shape{cols.size(), rows});
  for (std::size_t t = 0; t < cols.size(); ++t) {
    for (std::size_t j = 0; j < rows; ++j) out[t * rows + j] = M[j * ncols + cols[t]];
  }
  return push("gather_columns", {m.id}, std::move(out),
              [cols = std::move(cols)](Graph& g, std::size_t self) {
                Node& nd = g.node(self);
                const std::size_t in = nd.inputs[0];
                if (!g.wants_grad(in)) return;
                Tensor& d = g.grad_buf(in);
                const Tensor& G = nd.grad;
                const std::size_t rows = d.extent(0), ncols = d.extent(1);
                for (std::size_t t = 0; t < cols.size(); ++t) {
                  for (std::size_t j = 0; j < rows; ++j) {
                    d[j * ncols + cols[t]] += G[t * rows + j];
                  }
                }
              });
}

Var Graph::sum_all(Var x) {
  check_var(x, "sum_all");
  const Tensor& X = value(x);
  double s = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) s += X[i];
  return push("sum_all", {x.id}, Tensor::scalar(s), [](Graph& g, std::size_t self) {
    Node& nd = g.node(self);
    const std::size_t in = nd.inputs[0];
    if (!g.wants_grad(in)) return;
    Tensor& d = g.grad_buf(in);
    const double gv = nd.grad[0];
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += gv;
  });
}

Var Graph::cross_entropy_logits(Var logits, std::size_t target) {
  check_var(logits, "cross_entropy_logits");
  const Tensor& X = value(logits);
  if (X.rank() != 1) {
    throw dimension_error("cross_entropy_logits: expected rank-1 logits, got " +
                          shape_str(X.shape()));
  }
  if (target >= X.size()) throw contract_error("cross_entropy_logits: target out of range");
  double m = X[0];
  for (std::size_t i = 1; i < X.size(); ++i) m = std::max(m, X[i]);
  double denom = 0.0;
  std::vector<double> probs(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) {
    probs[i] = std::exp(X[i] - m);
    denom += probs[i];
  }
  for (double& p : probs) p /= denom;
  const double loss = m + std::log(denom) - X[target];
  return push("cross_entropy", {logits.id}, Tensor::scalar(loss),
              [target, probs = std::move(probs)](Graph& g, std::size_t self) {
                Node& nd = g.node(self);
                const std::size_t in = nd.inputs[0];
                if (!g.wants_grad(in)) return;
                Tensor& d = g.grad_buf(in);
                const double gv = nd.grad[0];
                for (std::size_t i = 0; i < d.size(); ++i) {
                  d[i] += gv * (probs[i] - (i == target ? 1.0 : 0.0));
                }
              });
}

Var Graph::dropout_mask(Var x, double rate, std::mt19937_64& rng) {
  check_var(x, "dropout_mask");
  if (rate < 0.0 || rate >= 1.0) throw contract_error("dropout: rate must be in [0, 1)");
  const Tensor& X = value(x);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(X.size());
  for (double& mv : mask) mv = dist(rng) < rate ? 0.0 : keep_scale;
  Tensor out(X.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * mask[i];
  return push("dropout", {x.id}, std::move(out),
              [mask = std::move(mask)](Graph& g, std::size_t self) {
                Node& nd = g.node(self);
                const std::size_t in = nd.inputs[0];
                if (!g.wants_grad(in)) return;
                Tensor& d = g.grad_buf(in);
                const Tensor& G = nd.grad;
                for (std::size_t i = 0; i < G.size(); ++i) d[i] += G[i] * mask[i];
              });
}

void Graph::backward(Var loss, double seed) {
  check_var(loss, "backward");
  const Node& ln = node(loss.id);
  if (!ln.value.is_scalar()) {
    throw contract_error("backward: loss must be scalar, got shape " +
                         shape_str(ln.value.shape()));
  }
  grad_buf(loss.id)[0] += seed;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.requires_grad && n.grad_ready && n.backprop) n.backprop(*this, id);
  }
  for (const auto& [p, id] : param_ids_) {
    Node& n = nodes_[id];
    if (!n.grad_ready) continue;
    Parameter* target = n.parameter;
    for (std::size_t i = 0; i < n.grad.size(); ++i) target->grad[i] += n.grad[i];
  }
}

Var affine(Graph& g, Parameter& W, Parameter& b, Var x) {
  Var w = g.param(W);
  Var bias = g.param(b);
  Var wx = g.matmul(w, x);
  if (g.value(x).rank() == 2) {
    return g.add(wx, g.replicate_axis(bias, 1, g.value(x).extent(1)));
  }
  return g.add(wx, bias);
}

Var affine_rows(Graph& g, Parameter& W, Parameter& b, Var x) {
  Var w = g.param(W);
  Var bias = g.param(b);
  Var xw = g.matmul(x, g.transpose(w));  // [B x out]
  return g.add(xw, g.replicate_axis(bias, 0, g.value(x).extent(0)));
}

Var dropout(Graph& g, Var x, double rate, RunMode mode, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw contract_error("dropout: rate must be in [0, 1)");
  if (mode == RunMode::Eval || rate == 0.0) return x;
  return g.dropout_mask(x, rate, rng);
}

}  // namespace dualmfa
