// AVX2 variants. Compiled with -mavx2 -mfma -ffp-contract=off; the
// element-wise kernels avoid FMA so they round exactly like the scalar path.

#include "usdiff/simd.hpp"

#include <immintrin.h>

#include <cmath>

namespace usdiff::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline float hsum(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_movehdup_ps(s));
  return _mm_cvtss_f32(s);
}

void axpby_avx2(float a, const float* x, float b, const float* y, float* out, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  const __m256 vb = _mm256_set1_ps(b);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 ax = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
    const __m256 by = _mm256_mul_ps(vb, _mm256_loadu_ps(y + i));
    _mm256_storeu_ps(out + i, _mm256_add_ps(ax, by));
  }
  for (; i < n; ++i) {
    const float ax = a * x[i];
    const float by = b * y[i];
    out[i] = ax + by;
  }
}

void saxpy_avx2(float a, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 ax = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), ax));
  }
  for (; i < n; ++i) {
    const float ax = a * x[i];
    y[i] = y[i] + ax;
  }
}

void sq_diff_avx2(const float* x, const float* y, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 d = _mm256_sub_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i));
    _mm256_storeu_ps(out + i, _mm256_mul_ps(d, d));
  }
  for (; i < n; ++i) {
    const float d = x[i] - y[i];
    out[i] = d * d;
  }
}

float dot_avx2(const float* x, const float* y, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
  }
  float acc = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum_sq_diff_avx2(const float* x, const float* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_cvtps_pd(_mm_loadu_ps(x + i));
    const __m256d dy = _mm256_cvtps_pd(_mm_loadu_ps(y + i));
    const __m256d d = _mm256_sub_pd(dx, dy);
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    total += d * d;
  }
  return total;
}

double sum_abs_diff_avx2(const float* x, const float* y, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_cvtps_pd(_mm_loadu_ps(x + i));
    const __m256d dy = _mm256_cvtps_pd(_mm_loadu_ps(y + i));
    acc = _mm256_add_pd(acc, _mm256_andnot_pd(sign, _mm256_sub_pd(dx, dy)));
  }
  double total = hsum(acc);
  for (; i < n; ++i) {
    total += std::fabs(static_cast<double>(x[i]) - static_cast<double>(y[i]));
  }
  return total;
}

}  // namespace

const KernelTable& avx2_kernel_table() {
  static const KernelTable table{Isa::avx2,      axpby_avx2,       saxpy_avx2,
                                 sq_diff_avx2,   dot_avx2,         sum_sq_diff_avx2,
                                 sum_abs_diff_avx2};
  return table;
}

}  // namespace usdiff::simd
