#include "gp2f/rng.hpp"

#include <cmath>
#include <numbers>

#include "gp2f/error.hpp"

namespace gp2f {

std::uint64_t Rng::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
  state_ += kGamma;
  return mix(state_);
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  if (n == 0) throw ContractError("Rng::next_below: n must be positive");
  // Rejection sampling over the largest multiple of n below 2^64.
  std::uint64_t threshold = (0ULL - n) % n;  // 2^64 mod n
  for (;;) {
    std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

double Rng::next_normal() {
  double u1 = 1.0 - next_double();  // (0, 1]
  double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix(seed + kGamma);
  for (std::uint64_t t : tags) s = mix(s ^ (t + kGamma));
  return Rng(s);
}

std::uint64_t Rng::tag(std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::vector<int> Rng::sample_without_replacement(std::vector<int> pool, std::size_t k) {
  if (k > pool.size())
    throw ContractError("Rng::sample_without_replacement: k exceeds pool size");
  std::vector<int> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = static_cast<std::size_t>(next_below(pool.size() - i));
    out.push_back(pool[j]);
    std::swap(pool[j], pool[pool.size() - 1 - i]);
  }
  return out;
}

}  // namespace gp2f
