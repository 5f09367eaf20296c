#pragma once
// Reference denoisers: non-local means and two-stage BM3D. Borders are
// handled by symmetric padding throughout.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "usdiff/image.hpp"

namespace usdiff {

struct NlmConfig {
  int patch_radius = 2;
  int search_radius = 7;
  /// Filtering strength, in pixel units.
  double h = 0.055;
  /// Noise level subtracted from patch distances; 0 disables the correction.
  double sigma = 0.0;

  void validate() const;
};

/// Defaults for a known noise level: h = 0.55 sigma.
NlmConfig nlm_defaults(double sigma);

/// Each pixel becomes the normalised average of its search window, weighted
/// by exp(-max(d^2 - 2 sigma^2, 0) / h^2) with d^2 the mean squared patch
/// difference.
Image2D nlm_denoise(const Image2D& img, const NlmConfig& cfg);

enum class Bm3dStages { one, two };

struct Bm3dConfig {
  int block_size = 8;
  int max_matches = 16;
  int search_radius = 9;
  /// Hard threshold in multiples of sigma.
  double hard_threshold = 2.7;
  double sigma = 0.1;
  Bm3dStages stages = Bm3dStages::two;
  /// Spacing of reference blocks; 1 keeps the filter shift-equivariant.
  int ref_step = 1;

  void validate() const;
};

Bm3dConfig bm3d_defaults(double sigma);

Image2D bm3d_denoise(const Image2D& img, const Bm3dConfig& cfg);

// Orthonormal transforms ------------------------------------------------------

/// 2-D DCT-II of an n x n row-major block.
std::vector<float> dct2(std::span<const float> block, std::size_t n);
std::vector<float> idct2(std::span<const float> coeffs, std::size_t n);

/// Full-depth orthonormal Haar transform; length must be a power of two.
/// Output layout: [approximation, coarsest detail, ..., finest details].
std::vector<float> haar1(std::span<const float> stack);
std::vector<float> ihaar1(std::span<const float> coeffs);

}  // namespace usdiff
