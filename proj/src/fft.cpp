#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "usdiff/ultrasound.hpp"

namespace usdiff {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace {

std::vector<Complex> transform(std::span<const Complex> x, bool inverse) {
  const std::size_t n = x.size();
  if (!is_power_of_two(n)) {
    throw std::invalid_argument("fft: length " + std::to_string(n) + " is not a power of two");
  }
  std::vector<Complex> a(x.begin(), x.end());
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    // Twiddles computed directly rather than by recurrence to keep the error flat.
    std::vector<Complex> w(half);
    for (std::size_t k = 0; k < half; ++k) {
      const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      w[k] = {std::cos(ang), std::sin(ang)};
    }
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = a[i + k];
        const Complex v = a[i + k + half] * w[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
  if (inverse) {
    const double s = 1.0 / static_cast<double>(n);
    for (auto& v : a) v *= s;
  }
  return a;
}

}  // namespace

std::vector<Complex> fft(std::span<const Complex> x) { return transform(x, false); }
std::vector<Complex> ifft(std::span<const Complex> x) { return transform(x, true); }

}  // namespace usdiff
