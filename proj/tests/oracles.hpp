// Independent reference implementations used as test oracles. Everything here
// is written with plain nested loops against std:: only — no kernels, no tape
// — so these stay independent of the implementation paths they check.
#pragma once

#include <cmath>
#include <vector>

#include "gp2f/graph.hpp"
#include "gp2f/matrix.hpp"

namespace oracle {

using gp2f::DenseMatrix;
using gp2f::Graph;

inline std::vector<std::vector<double>> to_rows(const DenseMatrix& m) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows));
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) rows[static_cast<std::size_t>(i)].push_back(m.at(i, j));
  return rows;
}

inline std::vector<double> normalize_row(const std::vector<double>& r) {
  double norm = 0.0;
  for (double v : r) norm += v * v;
  norm = std::sqrt(norm);
  const double denom = norm > 1e-12 ? norm : 1e-12;
  std::vector<double> out;
  for (double v : r) out.push_back(v / denom);
  return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Triple-loop GCN layer: out[i][j] = act(Σ_t Σ_k Â[i][t] H[t][k] W[k][j]).
inline DenseMatrix gcn_layer(const DenseMatrix& h, const DenseMatrix& ahat,
                             const DenseMatrix& w, bool activate) {
  const int n = h.rows, d = h.cols, o = w.cols;
  DenseMatrix agg(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) {
      double s = 0.0;
      for (int t = 0; t < n; ++t) s += ahat.at(i, t) * h.at(t, k);
      agg.at(i, k) = s;
    }
  DenseMatrix out(n, o);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < o; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += agg.at(i, k) * w.at(k, j);
      out.at(i, j) = activate && s < 0.0 ? 0.0 : s;
    }
  return out;
}

inline DenseMatrix naive_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  return c;
}

inline DenseMatrix naive_relu(const DenseMatrix& a) {
  DenseMatrix c = a;
  for (auto& v : c.data) v = v < 0.0 ? 0.0 : v;
  return c;
}

inline DenseMatrix projector(const DenseMatrix& x, const DenseMatrix& w1,
                             const DenseMatrix& w2) {
  return naive_matmul(naive_relu(naive_matmul(x, w1)), w2);
}

// Straight-line duplicate of the frozen branch.
inline DenseMatrix frozen_branch(const DenseMatrix& x, const DenseMatrix& ahat,
                                 const DenseMatrix& pw1, const DenseMatrix& pw2,
                                 const DenseMatrix& ew1, const DenseMatrix& ew2) {
  DenseMatrix h0 = projector(x, pw1, pw2);
  DenseMatrix h1 = gcn_layer(h0, ahat, ew1, true);
  return gcn_layer(h1, ahat, ew2, false);
}

// Straight-line duplicate of the adapter branch.
inline DenseMatrix adapted_branch(const DenseMatrix& x, const DenseMatrix& ahat,
                                  const DenseMatrix& pw1, const DenseMatrix& pw2,
                                  const DenseMatrix& ew1, const DenseMatrix& ew2,
                                  const DenseMatrix& d1, const DenseMatrix& u1, double b1,
                                  const DenseMatrix& d2, const DenseMatrix& u2, double b2) {
  auto residual = [](const DenseMatrix& h, const DenseMatrix& dw, const DenseMatrix& uw,
                     double beta) {
    DenseMatrix r = naive_matmul(naive_relu(naive_matmul(h, dw)), uw);
    DenseMatrix out = h;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += beta * r.data[i];
    return out;
  };
  DenseMatrix h0 = projector(x, pw1, pw2);
  DenseMatrix h1 = residual(gcn_layer(h0, ahat, ew1, true), d1, u1, b1);
  return residual(gcn_layer(h1, ahat, ew2, false), d2, u2, b2);
}

// Per-row dot-product classifier.
inline DenseMatrix classify(const DenseMatrix& h, const DenseMatrix& w,
                            const DenseMatrix& b) {
  DenseMatrix out(h.rows, w.cols);
  for (int i = 0; i < h.rows; ++i)
    for (int c = 0; c < w.cols; ++c) {
      double s = b.at(0, c);
      for (int k = 0; k < h.cols; ++k) s += h.at(i, k) * w.at(k, c);
      out.at(i, c) = s;
    }
  return out;
}

// Double-loop transcription of the cross-branch contrastive loss: positives
// of an anchor are the same node's other-view embedding plus both views of
// its neighbors; negatives are both views of everything else except the
// anchor itself; each per-node term is log(denominator) − log(numerator),
// averaged over both directions and all nodes.
inline double contrastive_loss(const DenseMatrix& h_pre, const DenseMatrix& h_adp,
                               const Graph& g, double tau) {
  const int n = g.num_nodes;
  auto u = to_rows(h_pre), v = to_rows(h_adp);
  for (auto& r : u) r = normalize_row(r);
  for (auto& r : v) r = normalize_row(r);
  std::vector<std::vector<bool>> nbr(static_cast<std::size_t>(n),
                                     std::vector<bool>(static_cast<std::size_t>(n), false));
  for (auto [a, b] : g.edges) {
    nbr[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = true;
    nbr[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = true;
  }
  auto psi = [&](const std::vector<double>& a, const std::vector<double>& b) {
    return std::exp(dot(a, b) / tau);
  };
  double total = 0.0;
  for (int dir = 0; dir < 2; ++dir) {
    const auto& anchor = dir == 0 ? u : v;
    const auto& other = dir == 0 ? v : u;
    for (int i = 0; i < n; ++i) {
      double num = psi(anchor[static_cast<std::size_t>(i)], other[static_cast<std::size_t>(i)]);
      double den = num;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double s_same = psi(anchor[static_cast<std::size_t>(i)], anchor[static_cast<std::size_t>(j)]);
        const double s_cross = psi(anchor[static_cast<std::size_t>(i)], other[static_cast<std::size_t>(j)]);
        if (nbr[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) num += s_same + s_cross;
        den += s_same + s_cross;
      }
      total += std::log(den) - std::log(num);
    }
  }
  return total / (2.0 * n);
}

// Per-pair cosine similarity.
inline DenseMatrix self_similarity(const DenseMatrix& h) {
  auto rows = to_rows(h);
  for (auto& r : rows) r = normalize_row(r);
  DenseMatrix s(h.rows, h.rows);
  for (int i = 0; i < h.rows; ++i)
    for (int j = 0; j < h.rows; ++j)
      s.at(i, j) = dot(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]);
  return s;
}

// Truth-table evaluation of the consistency mask.
inline DenseMatrix consistency_mask(const DenseMatrix& s, const DenseMatrix& adj, double t) {
  DenseMatrix m(s.rows, s.cols);
  for (int i = 0; i < s.rows; ++i)
    for (int j = 0; j < s.cols; ++j) {
      if (i == j) continue;
      const bool in =
          (s.at(i, j) > t && adj.at(i, j) == 1.0) || (s.at(i, j) <= t && adj.at(i, j) == 0.0);
      m.at(i, j) = in ? 1.0 : 0.0;
    }
  return m;
}

// Loop BCE over masked pairs with an explicitly-computed sigmoid.
inline double fusion_loss(const DenseMatrix& s, const DenseMatrix& adj,
                          const DenseMatrix& mask, double tau) {
  double total = 0.0;
  long count = 0;
  for (int i = 0; i < s.rows; ++i)
    for (int j = 0; j < s.cols; ++j) {
      if (mask.at(i, j) == 0.0) continue;
      ++count;
      const double p = 1.0 / (1.0 + std::exp(-s.at(i, j) / tau));
      total += adj.at(i, j) == 1.0 ? -std::log(p) : -std::log(1.0 - p);
    }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

// Naive softmax cross-entropy, mean over rows.
inline double cross_entropy(const DenseMatrix& logits, const std::vector<int>& labels) {
  double total = 0.0;
  for (int i = 0; i < logits.rows; ++i) {
    double denom = 0.0;
    for (int j = 0; j < logits.cols; ++j) denom += std::exp(logits.at(i, j));
    total += -std::log(std::exp(logits.at(i, labels[static_cast<std::size_t>(i)])) / denom);
  }
  return total / logits.rows;
}

}  // namespace oracle
