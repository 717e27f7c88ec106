// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>

#include "dualmfa/attention.hpp"
#include "dualmfa/gru.hpp"
#include "dualmfa/head.hpp"
#include "scalar_oracle.hpp"

namespace testsup {

inline dualmfa::Tensor random_tensor(dualmfa::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                                     double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  dualmfa::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

inline oracle::Mat mat_of(const dualmfa::Tensor& t) {
  oracle::Mat m(t.extent(0), oracle::Vec(t.extent(1)));
  for (std::size_t i = 0; i < t.extent(0); ++i) {
    for (std::size_t j = 0; j < t.extent(1); ++j) m[i][j] = t.at(i, j);
  }
  return m;
}

inline oracle::Mat mat_of_flat(const dualmfa::Tensor& t, std::size_t rows, std::size_t cols) {
  oracle::Mat m(rows, oracle::Vec(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m[i][j] = t[i * cols + j];
  }
  return m;
}

inline oracle::Vec vec_of(const dualmfa::Tensor& t) { return t.values(); }

inline oracle::GruWeights gru_weights(dualmfa::GruParameters& p) {
  oracle::GruWeights w;
  w.We = mat_of(p.W_e.value);
  w.Wz = mat_of(p.W_z.value);
  w.Wr = mat_of(p.W_r.value);
  w.Wh = mat_of(p.W_h.value);
  w.Uz = mat_of(p.U_z.value);
  w.Ur = mat_of(p.U_r.value);
  w.Uh = mat_of(p.U_h.value);
  w.bz = vec_of(p.b_z.value);
  w.br = vec_of(p.b_r.value);
  w.bh = vec_of(p.b_h.value);
  return w;
}

inline oracle::BranchWeights branch_weights(dualmfa::BranchParameters& p) {
  oracle::BranchWeights w;
  w.Wr = mat_of(p.W_r.value);
  w.Wd = mat_of(p.W_d.value);
  w.Wq = mat_of(p.W_q.value);
  w.Wc = mat_of(p.W_c.value);
  w.br = vec_of(p.b_r.value);
  w.bd = vec_of(p.b_d.value);
  w.bq = vec_of(p.b_q.value);
  w.bc = vec_of(p.b_c.value);
  return w;
}

inline oracle::HeadWeights head_weights(dualmfa::HeadParameters& p) {
  oracle::HeadWeights w;
  w.Whr = mat_of(p.W_hr.value);
  w.Whd = mat_of(p.W_hd.value);
  w.bhr = vec_of(p.b_hr.value);
  w.bhd = vec_of(p.b_hd.value);
  w.Wp = mat_of(p.W_p.value);
  w.bp = vec_of(p.b_p.value);
  return w;
}

inline double max_abs_diff(const dualmfa::Tensor& a, const oracle::Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline double max_abs_diff_mat(const dualmfa::Tensor& a, const oracle::Mat& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = 0; j < b[i].size(); ++j) {
      m = std::max(m, std::fabs(a[i * b[i].size() + j] - b[i][j]));
    }
  }
  return m;
}

}  // namespace testsup
