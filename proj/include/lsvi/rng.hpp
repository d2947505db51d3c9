#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace lsvi {

// SplitMix64 finalizer. Used to spread raw seeds and substream indices over
// the full 64-bit range before they reach the engine, so that nearby seeds
// give unrelated streams.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic uniform stream. All randomness in the library flows through
// this wrapper: mt19937_64 output is mapped to [0,1) from its top 53 bits,
// so the sequence of doubles is identical on every conforming platform.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  // Independent stream for (seed, index); index 0 differs from the direct
  // RandomStream(seed) stream.
  static RandomStream substream(std::uint64_t seed, std::uint64_t index) {
    RandomStream s(0);
    s.engine_.seed(mix_seed(mix_seed(seed) ^
                            mix_seed(index + 0x632be59bd9b4e019ULL)));
    return s;
  }

  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Inverse-CDF draw from a categorical distribution using one uniform sample.
// Rounding in the running sum is absorbed by the final clamp, so any u in
// [0,1) maps to a valid index even when the weights sum to slightly below 1.
inline int categorical_draw(const double* p, int n, double u) {
  double cum = 0.0;
  for (int i = 0; i < n; ++i) {
    cum += p[i];
    if (u < cum) return i;
  }
  return n - 1;
}

inline int categorical_draw(const std::vector<double>& p, double u) {
  return categorical_draw(p.data(), static_cast<int>(p.size()), u);
}

}  // namespace lsvi
