#pragma once

#include <cstdint>
#include <random>

namespace sbfnn {

/// Seeded generator with a platform-independent uniform draw.
///
/// std::uniform_real_distribution is implementation-defined, so reproducible
/// runs take the top 53 bits of the engine output directly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t next() { return engine_(); }

  /// SplitMix64 finalizer; decorrelates nearby seeds and derived streams.
  static constexpr std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  /// Independent stream for a named purpose derived from a run seed.
  static constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    return mix(seed ^ mix(stream + 0x632BE59BD9B4E019ull));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sbfnn
