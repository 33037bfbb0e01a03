#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace gp2f {

// SplitMix64 generator. Every stochastic operation in this codebase takes an
// explicit Rng (or a seed it derives one from); there is no global RNG state.
// Streams are split by name or index so that adding a consumer never shifts
// the draws seen by another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double next_double();

  // Uniform integer in [0, n), unbiased. n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  // Standard normal via Box-Muller (one value per pair of uniforms; the
  // second value is discarded to keep the stream position stateless).
  double next_normal();

  bool next_bernoulli(double p) { return next_double() < p; }

  // Child stream decorrelated from this one; advances this stream by one.
  Rng split() { return Rng(mix(next_u64() ^ kGamma)); }

  // Named sub-stream of `seed`: fold tags through the SplitMix64 finalizer.
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);
  static std::uint64_t tag(std::string_view name);  // FNV-1a 64

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values sampled uniformly from `pool`, in draw order.
  std::vector<int> sample_without_replacement(std::vector<int> pool, std::size_t k);

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static std::uint64_t mix(std::uint64_t z);
  std::uint64_t state_;
};

}  // namespace gp2f
