#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "usdiff/baselines.hpp"

namespace usdiff {

namespace {

/// Row k holds basis vector k: s_k cos(pi (2i + 1) k / 2n).
const std::vector<double>& dct_matrix(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::vector<double>> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> m(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (std::size_t i = 0; i < n; ++i) {
      m[k * n + i] = s * std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * n));
    }
  }
  return cache.emplace(n, std::move(m)).first->second;
}

void check_block(std::span<const float> block, std::size_t n) {
  if (n == 0 || block.size() != n * n) {
    throw std::invalid_argument("dct: block of " + std::to_string(block.size()) + " values is not " +
                                std::to_string(n) + "x" + std::to_string(n));
  }
}

// Forward: C X C^T. Inverse: C^T X C.
std::vector<float> separable(std::span<const float> x, std::size_t n, bool inverse) {
  const auto& c = dct_matrix(n);
  std::vector<double> tmp(n * n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += static_cast<double>(x[r * n + i]) * (inverse ? c[i * n + j] : c[j * n + i]);
      }
      tmp[r * n + j] = acc;
    }
  }
  std::vector<float> out(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += (inverse ? c[r * n + k] : c[k * n + r]) * tmp[r * n + j];
      out[k * n + j] = static_cast<float>(acc);
    }
  }
  return out;
}

bool power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

std::vector<float> dct2(std::span<const float> block, std::size_t n) {
  check_block(block, n);
  return separable(block, n, false);
}

std::vector<float> idct2(std::span<const float> coeffs, std::size_t n) {
  check_block(coeffs, n);
  return separable(coeffs, n, true);
}

std::vector<float> haar1(std::span<const float> stack) {
  if (!power_of_two(stack.size())) {
    throw std::invalid_argument("haar1: length " + std::to_string(stack.size()) + " is not a power of two");
  }
  std::vector<double> work(stack.begin(), stack.end());
  std::vector<double> tmp(work.size());
  const double r = std::numbers::sqrt2 / 2.0;
  for (std::size_t len = work.size(); len > 1; len /= 2) {
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < half; ++i) {
      tmp[i] = (work[2 * i] + work[2 * i + 1]) * r;
      tmp[half + i] = (work[2 * i] - work[2 * i + 1]) * r;
    }
    std::copy(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(len), work.begin());
  }
  return std::vector<float>(work.begin(), work.end());
}

std::vector<float> ihaar1(std::span<const float> coeffs) {
  if (!power_of_two(coeffs.size())) {
    throw std::invalid_argument("ihaar1: length " + std::to_string(coeffs.size()) + " is not a power of two");
  }
  std::vector<double> work(coeffs.begin(), coeffs.end());
  std::vector<double> tmp(work.size());
  const double r = std::numbers::sqrt2 / 2.0;
  for (std::size_t len = 2; len <= work.size(); len *= 2) {
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < half; ++i) {
      tmp[2 * i] = (work[i] + work[half + i]) * r;
      tmp[2 * i + 1] = (work[i] - work[half + i]) * r;
    }
    std::copy(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(len), work.begin());
  }
  return std::vector<float>(work.begin(), work.end());
}

}  // namespace usdiff
