// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "dualmfa/graph.hpp"

namespace dualmfa {

/// A scalar-valued function of one tensor, expressed on a fresh tape.
using GraphFn = std::function<Var(Graph&, Var)>;

/// Max over coordinates of |analytic - (f(x+h e_i) - f(x-h e_i)) / 2h| / max(1, |analytic|).
/// The analytic gradient comes from one backward pass of f at x.
double finite_diff_check(const GraphFn& f, const Tensor& x, double h = 1e-6);

/// Central-difference sweep over every coordinate of every parameter.
/// `loss_fn(true)` must run forward + backward (gradients accumulate into
/// the parameters); `loss_fn(false)` must return the loss value only.
double finite_diff_check_params(const std::function<double(bool)>& loss_fn,
                                const std::vector<Parameter*>& params, double h = 1e-6);

}  // namespace dualmfa
