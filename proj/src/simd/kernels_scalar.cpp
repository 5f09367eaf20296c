#include "usdiff/simd.hpp"

#include <cmath>

namespace usdiff::simd {
namespace {

void axpby_scalar(float a, const float* x, float b, const float* y, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float ax = a * x[i];
    const float by = b * y[i];
    out[i] = ax + by;
  }
}

void saxpy_scalar(float a, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float ax = a * x[i];
    y[i] = y[i] + ax;
  }
}

void sq_diff_scalar(const float* x, const float* y, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float d = x[i] - y[i];
    out[i] = d * d;
  }
}

float dot_scalar(const float* x, const float* y, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum_sq_diff_scalar(const float* x, const float* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    acc += d * d;
  }
  return acc;
}

double sum_abs_diff_scalar(const float* x, const float* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += std::fabs(static_cast<double>(x[i]) - static_cast<double>(y[i]));
  }
  return acc;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::scalar,      axpby_scalar,       saxpy_scalar,
                                 sq_diff_scalar,   dot_scalar,         sum_sq_diff_scalar,
                                 sum_abs_diff_scalar};
  return table;
}

}  // namespace usdiff::simd
