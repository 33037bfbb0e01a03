#include <atomic>
#include <cstdlib>
#include <cstring>

#include "gp2f/error.hpp"
#include "gp2f/kernels.hpp"

namespace gp2f::kernels {
namespace {

std::atomic<const Backend*> g_override{nullptr};

const Backend* detect() {
  const char* env = std::getenv("GP2F_KERNELS");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_backend();
    if (std::strcmp(env, "avx2") == 0) {
#if defined(GP2F_HAVE_AVX2)
      if (cpu_has_avx2()) return &avx2_backend();
#endif
      throw ConfigError("GP2F_KERNELS=avx2 requested but AVX2 is unavailable");
    }
    throw ConfigError(std::string("unknown GP2F_KERNELS value: ") + env);
  }
#if defined(GP2F_HAVE_AVX2)
  if (cpu_has_avx2()) return &avx2_backend();
#endif
  return &scalar_backend();
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

const Backend& active() {
  const Backend* o = g_override.load(std::memory_order_relaxed);
  if (o != nullptr) return *o;
  static const Backend* detected = detect();
  return *detected;
}

void set_backend(const Backend* b) { g_override.store(b, std::memory_order_relaxed); }

}  // namespace gp2f::kernels
