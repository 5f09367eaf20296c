#pragma once
// Data-parallel inner loops shared by the denoisers, the network and the
// metrics. Every kernel has a scalar reference implementation; wider
// variants are selected once at runtime from the host CPU features.
//
// Element-wise kernels (axpby, saxpy, sq_diff) produce bit-identical
// results across variants. Reductions (dot, sum_sq_diff, sum_abs_diff)
// differ only in summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace usdiff::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  /// out[i] = a * x[i] + b * y[i]
  void (*axpby)(float a, const float* x, float b, const float* y, float* out, std::size_t n);
  /// y[i] += a * x[i]
  void (*saxpy)(float a, const float* x, float* y, std::size_t n);
  /// out[i] = (x[i] - y[i])^2
  void (*sq_diff)(const float* x, const float* y, float* out, std::size_t n);
  float (*dot)(const float* x, const float* y, std::size_t n);
  double (*sum_sq_diff)(const float* x, const float* y, std::size_t n);
  double (*sum_abs_diff)(const float* x, const float* y, std::size_t n);
};

const KernelTable& scalar_kernels();
/// nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_kernels();

/// Table in use. Picks the widest supported variant on first call; the
/// environment variable USDIFF_ISA=scalar forces the reference kernels.
const KernelTable& kernels();

/// Test hook. Returns false if the requested ISA is unavailable.
bool force_isa(Isa isa);

std::string_view isa_name(Isa isa);

// Span conveniences over the active table.

inline void axpby(float a, std::span<const float> x, float b, std::span<const float> y,
                  std::span<float> out) {
  kernels().axpby(a, x.data(), b, y.data(), out.data(), out.size());
}

inline void saxpy(float a, std::span<const float> x, std::span<float> y) {
  kernels().saxpy(a, x.data(), y.data(), y.size());
}

inline float dot(std::span<const float> x, std::span<const float> y) {
  return kernels().dot(x.data(), y.data(), x.size());
}

inline double sum_sq_diff(std::span<const float> x, std::span<const float> y) {
  return kernels().sum_sq_diff(x.data(), y.data(), x.size());
}

inline double sum_abs_diff(std::span<const float> x, std::span<const float> y) {
  return kernels().sum_abs_diff(x.data(), y.data(), x.size());
}

}  // namespace usdiff::simd
