#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace lvqa {

// Deterministic random source. std::mt19937_64 output is fully specified by
// the standard, but the std distributions are not; every mapping from raw
// bits to a value therefore lives here so that identical seeds give
// identical streams on any platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(splitmix64(seed)) {
    if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;  // xorshift must not see 0
  }

  // xorshift* core over a splitmix-initialized state.
  uint64_t next_u64() {
    uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545F4914F6CDD1DULL;
  }

  // Uniform in [0,1) with 53 bits of precision.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Integer in [0, n). Multiply-shift bound; bias is < n / 2^64.
  uint64_t next_below(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller. Consumes two uniforms per pair and
  // caches the second value, so draw counts stay reproducible.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.28318530717958647692 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates with our own bounded draw (std::shuffle is unspecified).
  template <typename T>
  void shuffle(std::vector<T>& items) {
    if (items.size() < 2) return;
    for (size_t i = items.size() - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(next_below(i + 1));
      std::swap(items[i], items[j]);
    }
  }

  // Derive an independent stream, e.g. one per video or per epoch.
  static uint64_t derive(uint64_t seed, uint64_t stream) {
    return splitmix64(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
  }

 private:
  static uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// FNV-1a, used for content addressing of cache files and config hashes.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xCBF29CE484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace lvqa
