// SPDX-License-Identifier: Apache-2.0
#include "dualmfa/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dualmfa/error.hpp"

namespace dualmfa {

namespace {

double eval_scalar(const GraphFn& f, const Tensor& x) {
  Graph g;
  Var out = f(g, g.leaf(x, false));
  const Tensor& v = g.value(out);
  if (!v.is_scalar()) throw contract_error("finite_diff_check: f must be scalar-valued");
  return v[0];
}

double rel_error(double analytic, double numeric) {
  return std::fabs(analytic - numeric) / std::max(1.0, std::fabs(analytic));
}

}  // namespace

double finite_diff_check(const GraphFn& f, const Tensor& x, double h) {
  if (h <= 0.0) throw contract_error("finite_diff_check: h must be positive");
  Graph g;
  Var xv = g.leaf(x, true);
  Var out = f(g, xv);
  if (!g.value(out).is_scalar()) throw contract_error("finite_diff_check: f must be scalar-valued");
  g.backward(out);
  const Tensor analytic = g.grad(xv);

  double max_rel = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = probe[i];
    probe[i] = keep + h;
    const double lp = eval_scalar(f, probe);
    probe[i] = keep - h;
    const double lm = eval_scalar(f, probe);
    probe[i] = keep;
    const double numeric = (lp - lm) / (2.0 * h);
    max_rel = std::max(max_rel, rel_error(analytic[i], numeric));
  }
  return max_rel;
}

double finite_diff_check_params(const std::function<double(bool)>& loss_fn,
                                const std::vector<Parameter*>& params, double h) {
  if (h <= 0.0) throw contract_error("finite_diff_check_params: h must be positive");
  for (Parameter* p : params) p->zero_grad();
  loss_fn(true);

  double max_rel = 0.0;
  for (Parameter* p : params) {
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double keep = p->value[i];
      p->value[i] = keep + h;
      const double lp = loss_fn(false);
      p->value[i] = keep - h;
      const double lm = loss_fn(false);
      p->value[i] = keep;
      const double numeric = (lp - lm) / (2.0 * h);
      max_rel = std::max(max_rel, rel_error(analytic[i], numeric));
    }
  }
  return max_rel;
}

}  // namespace dualmfa
