// AVX2 backend. Mirrors the scalar backend's accumulation contracts exactly
// (see kernels.hpp): mul+add instead of fma, k ascending per output element,
// 4-lane interleaved reductions. Outputs are bit-identical to the scalar
// backend and the kernel tests enforce that with memcmp.

#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "gp2f/kernels.hpp"

namespace gp2f::kernels {
namespace {

void v_gemm_nn(const double* a, const double* b, double* c, int m, int k, int n,
               bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  const int n4 = n & ~3;
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double aik = a[static_cast<std::size_t>(i) * k + kk];
      const double* brow = b + static_cast<std::size_t>(kk) * n;
      const __m256d va = _mm256_set1_pd(aik);
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d vb = _mm256_loadu_pd(brow + j);
        __m256d vc = _mm256_loadu_pd(crow + j);
        vc = _mm256_add_pd(vc, _mm256_mul_pd(va, vb));
        _mm256_storeu_pd(crow + j, vc);
      }
      for (; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

// Lane l of the vector accumulator receives indices ≡ l (mod 4), matching the
// scalar backend's acc[i & 3]; the tail feeds the same lanes.
double v_dot(const double* x, const double* y, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  __m256d vacc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d vy = _mm256_loadu_pd(y + i);
    vacc = _mm256_add_pd(vacc, _mm256_mul_pd(vx, vy));
  }
  alignas(32) double acc[4];
  _mm256_store_pd(acc, vacc);
  for (; i < n; ++i) acc[i & 3] += x[i] * y[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double v_sum(const double* x, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  __m256d vacc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i < n4; i += 4) vacc = _mm256_add_pd(vacc, _mm256_loadu_pd(x + i));
  alignas(32) double acc[4];
  _mm256_store_pd(acc, vacc);
  for (; i < n; ++i) acc[i & 3] += x[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void v_gemm_nt(const double* a, const double* b, double* c, int m, int k, int n,
               bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double d = v_dot(arow, b + static_cast<std::size_t>(j) * k,
                             static_cast<std::size_t>(k));
      crow[j] = accumulate ? crow[j] + d : d;
    }
  }
}

void v_gemm_tn(const double* a, const double* b, double* c, int m, int k, int n,
               bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(k) * n);
  const int n4 = n & ~3;
  for (int r = 0; r < m; ++r) {
    const double* arow = a + static_cast<std::size_t>(r) * k;
    const double* brow = b + static_cast<std::size_t>(r) * n;
    for (int i = 0; i < k; ++i) {
      const double ari = arow[i];
      double* crow = c + static_cast<std::size_t>(i) * n;
      const __m256d va = _mm256_set1_pd(ari);
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d vb = _mm256_loadu_pd(brow + j);
        __m256d vc = _mm256_loadu_pd(crow + j);
        vc = _mm256_add_pd(vc, _mm256_mul_pd(va, vb));
        _mm256_storeu_pd(crow + j, vc);
      }
      for (; j < n; ++j) crow[j] += ari * brow[j];
    }
  }
}

void v_add(const double* x, const double* y, double* out, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  std::size_t i = 0;
  for (; i < n4; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void v_sub(const double* x, const double* y, double* out, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  std::size_t i = 0;
  for (; i < n4; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] - y[i];
}

void v_mul(const double* x, const double* y, double* out, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  std::size_t i = 0;
  for (; i < n4; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void v_scale(const double* x, double s, double* out, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i < n4; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), vs));
  for (; i < n; ++i) out[i] = x[i] * s;
}

void v_axpy(double s, const double* x, double* y, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(vs, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += s * x[i];
}

void v_relu(const double* x, double* out, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i < n4; i += 4)
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void v_relu_bwd(const double* g, const double* x, double* out, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    __m256d vg = _mm256_and_pd(_mm256_loadu_pd(g + i), mask);
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), vg));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0) out[i] += g[i];
}

bool v_all_finite(const double* x, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  // x is finite iff x - x == 0 (Inf-Inf and NaN-NaN are both NaN).
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    __m256d ok = _mm256_cmp_pd(_mm256_sub_pd(v, v), zero, _CMP_EQ_OQ);
    if (_mm256_movemask_pd(ok) != 0xF) return false;
  }
  for (; i < n; ++i)
    if (!std::isfinite(x[i])) return false;
  return true;
}

constexpr Backend kAvx2 = {
    "avx2",     v_gemm_nn, v_gemm_nt, v_gemm_tn, v_add,        v_sub, v_mul,
    v_scale,    v_axpy,    v_relu,    v_relu_bwd, v_dot,       v_sum,
    v_all_finite,
};

}  // namespace

const Backend& avx2_backend() { return kAvx2; }

}  // namespace gp2f::kernels
