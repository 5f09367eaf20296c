#pragma once
// Deterministic random numbers.
//
// All randomness in the library derives from SplitMix64 (Steele, Lea &
// Flood 2014): state advances by the golden-ratio increment
// 0x9E3779B97F4A7C15 and each output is the state passed through the
// 64-bit finalizer mix64(). Uniform doubles take the top 52 bits and are
// shifted by half a step so they lie strictly inside (0, 1). Normals use
// the Box-Muller transform on consecutive uniform pairs (u1, u2):
//   z0 = sqrt(-2 ln u1) cos(2 pi u2),  z1 = sqrt(-2 ln u1) sin(2 pi u2).
//
// Gaussian fields are counter based: element i of field (seed, draw_index)
// depends only on (seed, draw_index, i), so any partition of the pixels
// across workers reproduces the sequential draw.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace usdiff {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Maps 64 random bits to a double strictly inside (0, 1).
constexpr double bits_to_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Derives an independent stream key from a parent seed and a label.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) {
  return mix64(seed ^ mix64(label + kGoldenGamma));
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  double uniform() { return bits_to_unit(next_u64()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] (inclusive), by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  double normal();

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Shape-matched standard-normal samples, reproducible from
/// (seed, draw_index, shape).
struct GaussianField {
  std::size_t width = 0;
  std::size_t height = 0;
  std::uint64_t seed = 0;
  std::uint64_t draw_index = 0;
  std::vector<float> samples;  // row-major, width * height
};

GaussianField gaussian_field(std::uint64_t seed, std::uint64_t draw_index, std::size_t width,
                             std::size_t height);

/// Element `index` of the field (seed, draw_index); equals
/// gaussian_field(...).samples[index] for any shape containing it.
float gaussian_field_sample(std::uint64_t seed, std::uint64_t draw_index, std::size_t index);

}  // namespace usdiff
