// SPDX-License-Identifier: Apache-2.0
//
// Independent scalar re-implementation of the model's forward equations,
// written with plain loops over std::vector<double>. This is the reference
// the tensor-graph implementation is checked against; it must not use any
// library code from dualmfa_core beyond parameter extraction in the tests.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // rows of equal length

inline Vec matvec(const Mat& m, const Vec& x) {
  Vec out(m.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t k = 0; k < x.size(); ++k) out[i] += m[i][k] * x[k];
  }
  return out;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline Vec softmax(const Vec& x) {
  double denom = 0.0;
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i]);
    denom += out[i];
  }
  for (double& v : out) v /= denom;
  return out;
}

// --- question encoder -------------------------------------------------------

struct GruWeights {
  Mat We;              // [embed x vocab]
  Mat Wz, Wr, Wh;      // [hidden x embed]
  Mat Uz, Ur, Uh;      // [hidden x hidden]
  Vec bz, br, bh;      // [hidden]
};

inline Vec gru_step(const Vec& x, const Vec& h_prev, const GruWeights& w) {
  const std::size_t n = h_prev.size();
  const Vec wzx = matvec(w.Wz, x), uzh = matvec(w.Uz, h_prev);
  const Vec wrx = matvec(w.Wr, x), urh = matvec(w.Ur, h_prev);
  Vec z(n), r(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = sigmoid(wzx[i] + uzh[i] + w.bz[i]);
    r[i] = sigmoid(wrx[i] + urh[i] + w.br[i]);
  }
  Vec rh(n);
  for (std::size_t i = 0; i < n; ++i) rh[i] = r[i] * h_prev[i];
  const Vec whx = matvec(w.Wh, x), uhrh = matvec(w.Uh, rh);
  Vec h(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double cand = std::tanh(whx[i] + uhrh[i] + w.bh[i]);
    h[i] = z[i] * h_prev[i] + (1.0 - z[i]) * cand;
  }
  return h;
}

inline Vec gru_encode(const std::vector<std::size_t>& tokens, const GruWeights& w) {
  const std::size_t embed = w.We.size();
  Vec h(w.bz.size(), 0.0);
  for (std::size_t tok : tokens) {
    Vec x(embed);
    for (std::size_t i = 0; i < embed; ++i) x[i] = w.We[i][tok];
    h = gru_step(x, h, w);
  }
  return h;
}

// --- attention branches ------------------------------------------------------

struct BranchWeights {
  Mat Wr, Wd, Wq, Wc;  // [dc x Cr], [dc x Cd], [dc x k], [G x dc]
  Vec br, bd, bq, bc;
};

// tanh(W m + b) applied per column of m ([C x N]).
inline Mat project(const Mat& W, const Vec& b, const Mat& m) {
  const std::size_t dc = W.size(), n = m[0].size();
  Mat out(dc, Vec(n, 0.0));
  for (std::size_t i = 0; i < dc; ++i) {
    for (std::size_t c = 0; c < n; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < m.size(); ++k) s += W[i][k] * m[k][c];
      out[i][c] = std::tanh(s + b[i]);
    }
  }
  return out;
}

inline Vec column_mean(const Mat& m) {
  Vec out(m.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t c = 0; c < m[i].size(); ++c) out[i] += m[i][c];
    out[i] /= static_cast<double>(m[i].size());
  }
  return out;
}

// Hadamard fusion of a shared vector pair with per-location columns,
// followed by per-location L2 normalization over channels.
inline Mat fuse_l2(const Vec& q, const Vec& shared, const Mat& per_location, double eps = 1e-12) {
  const std::size_t dc = per_location.size(), n = per_location[0].size();
  Mat out(dc, Vec(n, 0.0));
  for (std::size_t c = 0; c < n; ++c) {
    double sq = 0.0;
    for (std::size_t i = 0; i < dc; ++i) {
      const double v = q[i] * shared[i] * per_location[i][c];
      out[i][c] = v;
      sq += v * v;
    }
    const double norm = std::max(std::sqrt(sq), eps);
    for (std::size_t i = 0; i < dc; ++i) out[i][c] /= norm;
  }
  return out;
}

struct BranchOut {
  Mat projected;  // R1 or D2 [dc x N]
  Mat fused;      // C1 or C2 [dc x N]
  Mat weights;    // a [G x N]
  Vec pooled;     // v [G*dc]
};

inline BranchOut attend_branch(const Mat& fused, const Mat& projected, const BranchWeights& w) {
  const std::size_t glimpses = w.Wc.size(), n = fused[0].size(), dc = projected.size();
  BranchOut out;
  out.projected = projected;
  out.fused = fused;
  out.weights.assign(glimpses, Vec(n, 0.0));
  out.pooled.assign(glimpses * dc, 0.0);
  for (std::size_t g = 0; g < glimpses; ++g) {
    Vec logits(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t i = 0; i < dc; ++i) logits[c] += w.Wc[g][i] * fused[i][c];
      logits[c] += w.bc[g];
    }
    out.weights[g] = softmax(logits);
    for (std::size_t i = 0; i < dc; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) s += out.weights[g][c] * projected[i][c];
      out.pooled[g * dc + i] = s;
    }
  }
  return out;
}

// Free-form branch: grid stays per-cell, boxes are averaged.
inline BranchOut region_branch(const Vec& q_embed, const Mat& image_cells, const Mat& boxes,
                               const BranchWeights& w) {
  const Mat r1 = project(w.Wr, w.br, image_cells);
  const Vec d1 = column_mean(project(w.Wd, w.bd, boxes));
  Vec q1 = matvec(w.Wq, q_embed);
  for (std::size_t i = 0; i < q1.size(); ++i) q1[i] = std::tanh(q1[i] + w.bq[i]);
  return attend_branch(fuse_l2(q1, d1, r1), r1, w);
}

// Detection branch: boxes stay per-box, the grid is averaged.
inline BranchOut detection_branch(const Vec& q_embed, const Mat& image_cells, const Mat& boxes,
                                  const BranchWeights& w) {
  const Mat d2 = project(w.Wd, w.bd, boxes);
  const Vec r2 = column_mean(project(w.Wr, w.br, image_cells));
  Vec q2 = matvec(w.Wq, q_embed);
  for (std::size_t i = 0; i < q2.size(); ++i) q2[i] = std::tanh(q2[i] + w.bq[i]);
  return attend_branch(fuse_l2(q2, r2, d2), d2, w);
}

// --- answer head -------------------------------------------------------------

struct HeadWeights {
  Mat Whr, Whd;  // [G*dc x k]
  Vec bhr, bhd;
  Mat Wp;        // [answers x G*dc]
  Vec bp;
};

inline Vec gate(const Mat& W, const Vec& b, const Vec& q, const Vec& v) {
  Vec out = matvec(W, q);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * std::tanh(out[i] + b[i]);
  return out;
}

// h_r + h_d followed by the linear classifier and softmax.
inline Vec head_probs(const Vec& v1, const Vec& v2, const Vec& q, const HeadWeights& w) {
  const Vec h_r = gate(w.Whr, w.bhr, q, v1);
  const Vec h_d = gate(w.Whd, w.bhd, q, v2);
  Vec combined(h_r.size());
  for (std::size_t i = 0; i < combined.size(); ++i) combined[i] = h_r[i] + h_d[i];
  Vec logits = matvec(w.Wp, combined);
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += w.bp[i];
  return softmax(logits);
}

struct FullForward {
  Vec question;
  BranchOut region;
  BranchOut detection;
  Vec probs;
};

inline FullForward full_forward(const std::vector<std::size_t>& tokens, const Mat& image_cells,
                                const Mat& boxes, const GruWeights& gru, const BranchWeights& b1,
                                const BranchWeights& b2, const HeadWeights& head) {
  FullForward out;
  out.question = gru_encode(tokens, gru);
  out.region = region_branch(out.question, image_cells, boxes, b1);
  out.detection = detection_branch(out.question, image_cells, boxes, b2);
  out.probs = head_probs(out.region.pooled, out.detection.pooled, out.question, head);
  return out;
}

}  // namespace oracle
