#include "gp2f/matrix.hpp"

#include <cmath>

#include "gp2f/error.hpp"
#include "gp2f/kernels.hpp"

namespace gp2f {

namespace {
const kernels::Backend& K() { return kernels::active(); }

void check_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows) + "x" +
                         std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                         std::to_string(b.cols));
}
}  // namespace

DenseMatrix DenseMatrix::identity(int n) {
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::filled(int r, int c, double v) {
  DenseMatrix m(r, c);
  for (auto& x : m.data) x = v;
  return m;
}

DenseMatrix DenseMatrix::gaussian(int r, int c, double stddev, Rng& rng) {
  DenseMatrix m(r, c);
  for (auto& x : m.data) x = stddev * rng.next_normal();
  return m;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows)
    throw DimensionError("matmul: inner dims " + std::to_string(a.cols) + " vs " +
                         std::to_string(b.rows));
  DenseMatrix c(a.rows, b.cols);
  K().gemm_nn(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.cols, false);
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.cols)
    throw DimensionError("matmul_nt: inner dims " + std::to_string(a.cols) + " vs " +
                         std::to_string(b.cols));
  DenseMatrix c(a.rows, b.rows);
  K().gemm_nt(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.rows, false);
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows != b.rows)
    throw DimensionError("matmul_tn: inner dims " + std::to_string(a.rows) + " vs " +
                         std::to_string(b.rows));
  DenseMatrix c(a.cols, b.cols);
  K().gemm_tn(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.cols, false);
  return c;
}

void matmul_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols)
    throw DimensionError("matmul_acc: shape mismatch");
  K().gemm_nn(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.cols, true);
}

void matmul_nt_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
  if (a.cols != b.cols || c.rows != a.rows || c.cols != b.rows)
    throw DimensionError("matmul_nt_acc: shape mismatch");
  K().gemm_nt(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.rows, true);
}

void matmul_tn_acc(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& c) {
  if (a.rows != b.rows || c.rows != a.cols || c.cols != b.cols)
    throw DimensionError("matmul_tn_acc: shape mismatch");
  K().gemm_tn(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.cols, true);
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  check_same_shape(a, b, "add");
  DenseMatrix c(a.rows, a.cols);
  K().add(a.data.data(), b.data.data(), c.data.data(), a.size());
  return c;
}

DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
  check_same_shape(a, b, "sub");
  DenseMatrix c(a.rows, a.cols);
  K().sub(a.data.data(), b.data.data(), c.data.data(), a.size());
  return c;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  check_same_shape(a, b, "hadamard");
  DenseMatrix c(a.rows, a.cols);
  K().mul(a.data.data(), b.data.data(), c.data.data(), a.size());
  return c;
}

DenseMatrix scale(const DenseMatrix& a, double s) {
  DenseMatrix c(a.rows, a.cols);
  K().scale(a.data.data(), s, c.data.data(), a.size());
  return c;
}

void axpy_into(double s, const DenseMatrix& x, DenseMatrix& y) {
  check_same_shape(x, y, "axpy_into");
  K().axpy(s, x.data.data(), y.data.data(), x.size());
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

double sum_all(const DenseMatrix& a) { return K().sum(a.data.data(), a.size()); }

double max_abs(const DenseMatrix& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::fabs(v));
  return m;
}

bool all_finite(const DenseMatrix& a) { return K().all_finite(a.data.data(), a.size()); }

void require_finite(const DenseMatrix& a, const std::string& label) {
  if (!all_finite(a)) throw NumericError("non-finite value in " + label);
}

DenseMatrix row_l2_normalize(const DenseMatrix& a, double eps) {
  DenseMatrix out(a.rows, a.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* r = a.row(i);
    double norm = std::sqrt(K().dot(r, r, static_cast<std::size_t>(a.cols)));
    double denom = norm > eps ? norm : eps;
    K().scale(r, 1.0 / denom, out.row(i), static_cast<std::size_t>(a.cols));
  }
  return out;
}

}  // namespace gp2f
