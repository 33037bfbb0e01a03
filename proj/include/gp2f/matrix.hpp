#pragma once

#include <string>
#include <vector>

#include "gp2f/rng.hpp"

namespace gp2f {

// Row-major dense real matrix, double precision. The universal numeric
// carrier for features, embeddings, weights and gradients.
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
  const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }
  double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }

  static DenseMatrix identity(int n);
  static DenseMatrix filled(int r, int c, double v);
  // Entries i.i.d. normal scaled by `stddev`.
  static DenseMatrix gaussian(int r, int c, double stddev, Rng& rng);
};

// Shape-checked wrappers over the active kernel backend.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);  // a · bᵀ
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);  // aᵀ · b
void matmul_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);
void matmul_nt_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);
void matmul_tn_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c);

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scale(const DenseMatrix& a, double s);
void axpy_into(double s, const DenseMatrix& x, DenseMatrix& y);
DenseMatrix transpose(const DenseMatrix& a);

double sum_all(const DenseMatrix& a);
double max_abs(const DenseMatrix& a);
bool all_finite(const DenseMatrix& a);
// Throws NumericError naming `label` when a non-finite entry is present.
void require_finite(const DenseMatrix& a, const std::string& label);

// Rows scaled to unit l2 norm; denominators below `eps` are clamped to eps,
// so an all-zero row stays (numerically) zero.
DenseMatrix row_l2_normalize(const DenseMatrix& a, double eps = 1e-12);

}  // namespace gp2f
