#include <cmath>
#include <stdexcept>
#include <string>

#include "usdiff/baselines.hpp"
#include "usdiff/simd.hpp"

namespace usdiff {

void NlmConfig::validate() const {
  if (patch_radius < 1 || search_radius < 1) throw std::invalid_argument("nlm: radii must be >= 1");
  if (!(h > 0) || !std::isfinite(h)) throw std::invalid_argument("nlm: h must be positive");
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw std::invalid_argument("nlm: sigma must be >= 0");
}

NlmConfig nlm_defaults(double sigma) {
  NlmConfig cfg;
  cfg.sigma = sigma;
  cfg.h = 0.55 * sigma;
  return cfg;
}

// Offset-major formulation: for each displacement in the search window the
// squared-difference image is box-filtered once, giving the patch distance
// of every pixel to its displaced neighbour at that offset.
Image2D nlm_denoise(const Image2D& img, const NlmConfig& cfg) {
  cfg.validate();
  if (img.empty()) throw std::invalid_argument("nlm: empty image");
  const int pr = cfg.patch_radius;
  const int sr = cfg.search_radius;
  const int pad = pr + sr;
  const Image2D padded = pad_symmetric(img, static_cast<std::size_t>(pad));
  const auto w = static_cast<int>(img.width());
  const auto h = static_cast<int>(img.height());
  const int pw = static_cast<int>(padded.width());

  // Difference images cover the patch support of every output pixel.
  const int dw = w + 2 * pr;
  const int dh = h + 2 * pr;
  const float patch_area = static_cast<float>((2 * pr + 1) * (2 * pr + 1));
  const double inv_h2 = 1.0 / (cfg.h * cfg.h);
  const double bias = 2.0 * cfg.sigma * cfg.sigma;

  std::vector<float> diff(static_cast<std::size_t>(dw) * dh);
  std::vector<float> rowsum(static_cast<std::size_t>(w) * dh);
  std::vector<double> weight_sum(static_cast<std::size_t>(w) * h, 0.0);
  std::vector<double> value_sum(static_cast<std::size_t>(w) * h, 0.0);
  const auto& kern = simd::kernels();

  for (int dy = -sr; dy <= sr; ++dy) {
    for (int dx = -sr; dx <= sr; ++dx) {
      for (int y = 0; y < dh; ++y) {
        const float* a = padded.data().data() + static_cast<std::size_t>(y + sr) * pw + sr;
        const float* b = padded.data().data() + static_cast<std::size_t>(y + sr + dy) * pw + sr + dx;
        kern.sq_diff(a, b, diff.data() + static_cast<std::size_t>(y) * dw, static_cast<std::size_t>(dw));
      }
      // Horizontal box sums.
      for (int y = 0; y < dh; ++y) {
        const float* src = diff.data() + static_cast<std::size_t>(y) * dw;
        float* dst = rowsum.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
          float acc = 0.0f;
          for (int k = 0; k <= 2 * pr; ++k) acc += src[x + k];
          dst[x] = acc;
        }
      }
      // Vertical box sums, weights and accumulation.
      for (int y = 0; y < h; ++y) {
        const float* nb = padded.data().data() + static_cast<std::size_t>(y + pad + dy) * pw + pad + dx;
        for (int x = 0; x < w; ++x) {
          float acc = 0.0f;
          for (int k = 0; k <= 2 * pr; ++k) acc += rowsum[static_cast<std::size_t>(y + k) * w + x];
          const double d2 = acc / patch_area;
          const double wgt = std::exp(-std::max(d2 - bias, 0.0) * inv_h2);
          const std::size_t o = static_cast<std::size_t>(y) * w + x;
          weight_sum[o] += wgt;
          value_sum[o] += wgt * nb[x];
        }
      }
    }
  }

  Image2D out(img.width(), img.height(), img.range());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = static_cast<float>(value_sum[i] / weight_sum[i]);
  }
  return out;
}

}  // namespace usdiff
