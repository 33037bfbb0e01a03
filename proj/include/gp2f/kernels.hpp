#pragma once

#include <cstddef>

namespace gp2f::kernels {

// Dense double-precision kernels behind every matrix operation. Two backends
// implement the same table: a portable scalar reference and an AVX2 variant
// selected at runtime. Both follow identical accumulation contracts so their
// outputs are bit-identical, which the kernel tests assert with memcmp:
//
//   * gemm_* accumulate each output element over k in ascending order with
//     separate multiply and add (builds use -ffp-contract=off, and the AVX2
//     backend uses mul+add rather than fma).
//   * dot/sum reductions keep four interleaved partial sums, lane l holding
//     the terms with index ≡ l (mod 4), folded as (s0+s1)+(s2+s3).
//
// Transcendentals (exp, log, sigmoid) are not in the table; they stay scalar
// libm calls at the call sites.
struct Backend {
  const char* name;

  // c (m×n) = a (m×k) · b (k×n); adds into c when accumulate is set.
  void (*gemm_nn)(const double* a, const double* b, double* c, int m, int k, int n,
                  bool accumulate);
  // c (m×n) = a (m×k) · b (n×k)ᵀ
  void (*gemm_nt)(const double* a, const double* b, double* c, int m, int k, int n,
                  bool accumulate);
  // c (k×n) = a (m×k)ᵀ · b (m×n)
  void (*gemm_tn)(const double* a, const double* b, double* c, int m, int k, int n,
                  bool accumulate);

  void (*add)(const double* x, const double* y, double* out, std::size_t n);
  void (*sub)(const double* x, const double* y, double* out, std::size_t n);
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
  void (*scale)(const double* x, double s, double* out, std::size_t n);
  void (*axpy)(double s, const double* x, double* y, std::size_t n);  // y += s·x
  void (*relu)(const double* x, double* out, std::size_t n);
  // out += g where x > 0 (relu backward; the subgradient at 0 is 0)
  void (*relu_bwd)(const double* g, const double* x, double* out, std::size_t n);

  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  bool (*all_finite)(const double* x, std::size_t n);
};

const Backend& scalar_backend();
#if defined(GP2F_HAVE_AVX2)
const Backend& avx2_backend();
#endif

bool cpu_has_avx2();

// Active backend: AVX2 when the CPU supports it, scalar otherwise. The
// GP2F_KERNELS environment variable ("scalar" or "avx2") overrides the
// autodetection; set_backend overrides both (tests use it).
const Backend& active();
void set_backend(const Backend* b);  // nullptr restores autodetection

}  // namespace gp2f::kernels
