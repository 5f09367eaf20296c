#include "usdiff/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace usdiff {

std::int64_t SplitMix64::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(next_u64());
  const std::uint64_t limit = (~std::uint64_t{0} / span) * span;
  std::uint64_t r = next_u64();
  while (r >= limit) r = next_u64();
  return lo + static_cast<std::int64_t>(r % span);
}

double SplitMix64::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

namespace {

struct NormalPair {
  double z0;
  double z1;
};

NormalPair field_pair(std::uint64_t key, std::uint64_t pair) {
  const double u1 = bits_to_unit(mix64(key + (2 * pair + 1) * kGoldenGamma));
  const double u2 = bits_to_unit(mix64(key + (2 * pair + 2) * kGoldenGamma));
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(angle), r * std::sin(angle)};
}

}  // namespace

float gaussian_field_sample(std::uint64_t seed, std::uint64_t draw_index, std::size_t index) {
  const std::uint64_t key = derive_seed(seed, draw_index);
  const NormalPair p = field_pair(key, index / 2);
  return static_cast<float>(index % 2 == 0 ? p.z0 : p.z1);
}

GaussianField gaussian_field(std::uint64_t seed, std::uint64_t draw_index, std::size_t width,
                             std::size_t height) {
  GaussianField field;
  field.width = width;
  field.height = height;
  field.seed = seed;
  field.draw_index = draw_index;
  const std::size_t n = width * height;
  field.samples.resize(n);
  const std::uint64_t key = derive_seed(seed, draw_index);
  for (std::size_t pair = 0; 2 * pair < n; ++pair) {
    const NormalPair p = field_pair(key, pair);
    field.samples[2 * pair] = static_cast<float>(p.z0);
    if (2 * pair + 1 < n) field.samples[2 * pair + 1] = static_cast<float>(p.z1);
  }
  return field;
}

}  // namespace usdiff
