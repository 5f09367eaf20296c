#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "usdiff/baselines.hpp"
#include "usdiff/simd.hpp"

namespace usdiff {

void Bm3dConfig::validate() const {
  if (block_size != 4 && block_size != 8 && block_size != 16) {
    throw std::invalid_argument("bm3d: block_size must be 4, 8 or 16");
  }
  if (max_matches < 1 || (max_matches & (max_matches - 1)) != 0) {
    throw std::invalid_argument("bm3d: max_matches must be a power of two");
  }
  if (search_radius < 1) throw std::invalid_argument("bm3d: search_radius must be >= 1");
  if ((2 * search_radius + 1) * (2 * search_radius + 1) < max_matches) {
    throw std::invalid_argument("bm3d: search window smaller than max_matches");
  }
  if (!(hard_threshold > 0) || !std::isfinite(hard_threshold)) {
    throw std::invalid_argument("bm3d: hard_threshold must be positive");
  }
  if (!(sigma > 0) || !std::isfinite(sigma)) throw std::invalid_argument("bm3d: sigma must be positive");
  if (ref_step < 1) throw std::invalid_argument("bm3d: ref_step must be >= 1");
}

Bm3dConfig bm3d_defaults(double sigma) {
  Bm3dConfig cfg;
  cfg.sigma = sigma;
  return cfg;
}

namespace {

struct Grid {
  int w = 0, h = 0;  // original image
  int b = 0;         // block size
  int r = 0;         // search radius == padding
  int pw = 0;        // padded width
  int cw = 0, ch = 0;  // candidate positions (top-left, padded coordinates)
};

std::vector<int> reference_positions(int extent, int block, int step) {
  std::vector<int> pos;
  for (int p = 0; p + block <= extent; p += step) pos.push_back(p);
  if (pos.empty() || pos.back() != extent - block) pos.push_back(extent - block);
  return pos;
}

/// 2-D DCT of every block position in the padded image.
std::vector<float> block_spectra(const Image2D& padded, const Grid& g) {
  const auto n = static_cast<std::size_t>(g.b);
  const std::size_t bb = n * n;
  std::vector<float> out(static_cast<std::size_t>(g.cw) * g.ch * bb);
  std::vector<float> block(bb);
  for (int y = 0; y < g.ch; ++y) {
    for (int x = 0; x < g.cw; ++x) {
      for (int u = 0; u < g.b; ++u) {
        const float* src = padded.data().data() + static_cast<std::size_t>(y + u) * g.pw + x;
        std::copy(src, src + g.b, block.begin() + static_cast<std::ptrdiff_t>(u * n));
      }
      const std::vector<float> c = dct2(block, n);
      std::copy(c.begin(), c.end(), out.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(y) * g.cw + x) * bb));
    }
  }
  return out;
}

/// For every reference block, the top-K offsets by squared distance in
/// `guide`, ties broken by raster order of the offset. Returns candidate
/// indices into the padded position grid.
std::vector<std::vector<std::size_t>> match_blocks(const Image2D& guide_padded, const Grid& g,
                                                   const std::vector<int>& ref_y, const std::vector<int>& ref_x,
                                                   int max_matches) {
  const int side = 2 * g.r + 1;
  const std::size_t offsets = static_cast<std::size_t>(side) * side;
  const std::size_t refs = ref_y.size() * ref_x.size();
  std::vector<float> dist(refs * offsets);
  std::vector<float> diff(static_cast<std::size_t>(g.w) * g.h);
  std::vector<float> rows(static_cast<std::size_t>(g.w - g.b + 1) * g.h);
  const int rw = g.w - g.b + 1;
  const auto& kern = simd::kernels();
  const float* base = guide_padded.data().data();

  for (int dy = -g.r; dy <= g.r; ++dy) {
    for (int dx = -g.r; dx <= g.r; ++dx) {
      const std::size_t o = static_cast<std::size_t>(dy + g.r) * side + (dx + g.r);
      for (int y = 0; y < g.h; ++y) {
        const float* a = base + static_cast<std::size_t>(y + g.r) * g.pw + g.r;
        const float* c = base + static_cast<std::size_t>(y + g.r + dy) * g.pw + g.r + dx;
        kern.sq_diff(a, c, diff.data() + static_cast<std::size_t>(y) * g.w, static_cast<std::size_t>(g.w));
      }
      for (int y = 0; y < g.h; ++y) {
        const float* src = diff.data() + static_cast<std::size_t>(y) * g.w;
        float* dst = rows.data() + static_cast<std::size_t>(y) * rw;
        for (int x = 0; x < rw; ++x) {
          float acc = 0.0f;
          for (int k = 0; k < g.b; ++k) acc += src[x + k];
          dst[x] = acc;
        }
      }
      std::size_t ri = 0;
      for (int ry : ref_y) {
        for (int rx : ref_x) {
          float acc = 0.0f;
          for (int k = 0; k < g.b; ++k) acc += rows[static_cast<std::size_t>(ry + k) * rw + rx];
          dist[ri * offsets + o] = acc;
          ++ri;
        }
      }
    }
  }

  std::vector<std::vector<std::size_t>> groups(refs);
  std::vector<std::size_t> order(offsets);
  std::size_t ri = 0;
  for (int ry : ref_y) {
    for (int rx : ref_x) {
      const float* d = dist.data() + ri * offsets;
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::partial_sort(order.begin(), order.begin() + max_matches, order.end(),
                        [d](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); });
      auto& grp = groups[ri];
      grp.reserve(static_cast<std::size_t>(max_matches));
      for (int k = 0; k < max_matches; ++k) {
        const int dy = static_cast<int>(order[static_cast<std::size_t>(k)] / side) - g.r;
        const int dx = static_cast<int>(order[static_cast<std::size_t>(k)] % side) - g.r;
        // Candidate top-left in padded coordinates.
        grp.push_back(static_cast<std::size_t>(ry + g.r + dy) * g.cw + static_cast<std::size_t>(rx + g.r + dx));
      }
      ++ri;
    }
  }
  return groups;
}

/// Haar across the stack for each coefficient position (in place).
void stack_transform(std::vector<float>& group, std::size_t k, std::size_t bb, bool inverse) {
  std::vector<float> column(k);
  for (std::size_t c = 0; c < bb; ++c) {
    for (std::size_t i = 0; i < k; ++i) column[i] = group[i * bb + c];
    const std::vector<float> t = inverse ? ihaar1(column) : haar1(column);
    for (std::size_t i = 0; i < k; ++i) group[i * bb + c] = t[i];
  }
}

struct Accumulator {
  std::vector<double> num;
  std::vector<double> den;
};

void aggregate(Accumulator& acc, const Grid& g, std::size_t candidate, std::span<const float> block,
               double weight) {
  const int y0 = static_cast<int>(candidate / static_cast<std::size_t>(g.cw)) - g.r;
  const int x0 = static_cast<int>(candidate % static_cast<std::size_t>(g.cw)) - g.r;
  for (int u = 0; u < g.b; ++u) {
    const int y = y0 + u;
    if (y < 0 || y >= g.h) continue;
    for (int v = 0; v < g.b; ++v) {
      const int x = x0 + v;
      if (x < 0 || x >= g.w) continue;
      const std::size_t o = static_cast<std::size_t>(y) * g.w + x;
      acc.num[o] += weight * block[static_cast<std::size_t>(u * g.b + v)];
      acc.den[o] += weight;
    }
  }
}

Image2D finish(const Accumulator& acc, const Image2D& img) {
  Image2D out(img.width(), img.height(), img.range());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = acc.den[i] > 0 ? static_cast<float>(acc.num[i] / acc.den[i]) : img.data()[i];
  }
  return out;
}

Image2D hard_threshold_stage(const Image2D& img, const Image2D& padded, const Grid& g,
                             const std::vector<int>& ref_y, const std::vector<int>& ref_x,
                             const Bm3dConfig& cfg) {
  const auto groups = match_blocks(padded, g, ref_y, ref_x, cfg.max_matches);
  const std::vector<float> spectra = block_spectra(padded, g);
  const auto n = static_cast<std::size_t>(g.b);
  const std::size_t bb = n * n;
  const auto k = static_cast<std::size_t>(cfg.max_matches);
  const auto threshold = static_cast<float>(cfg.hard_threshold * cfg.sigma);
  Accumulator acc{std::vector<double>(img.size(), 0.0), std::vector<double>(img.size(), 0.0)};
  std::vector<float> group(k * bb);

  for (const auto& grp : groups) {
    for (std::size_t i = 0; i < k; ++i) {
      std::copy_n(spectra.begin() + static_cast<std::ptrdiff_t>(grp[i] * bb), bb,
                  group.begin() + static_cast<std::ptrdiff_t>(i * bb));
    }
    stack_transform(group, k, bb, false);
    std::size_t retained = 0;
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (i == 0 || std::fabs(group[i]) >= threshold) {
        if (group[i] != 0.0f) ++retained;
      } else {
        group[i] = 0.0f;
      }
    }
    stack_transform(group, k, bb, true);
    const double weight = 1.0 / static_cast<double>(std::max<std::size_t>(retained, 1));
    for (std::size_t i = 0; i < k; ++i) {
      const std::vector<float> block = idct2(std::span<const float>(group).subspan(i * bb, bb), n);
      aggregate(acc, g, grp[i], block, weight);
    }
  }
  return finish(acc, img);
}

Image2D wiener_stage(const Image2D& img, const Image2D& padded, const Image2D& pilot, const Grid& g,
                     const std::vector<int>& ref_y, const std::vector<int>& ref_x, const Bm3dConfig& cfg) {
  const Image2D pilot_padded = pad_symmetric(pilot, static_cast<std::size_t>(g.r));
  const auto groups = match_blocks(pilot_padded, g, ref_y, ref_x, cfg.max_matches);
  const std::vector<float> noisy_spectra = block_spectra(padded, g);
  const std::vector<float> pilot_spectra = block_spectra(pilot_padded, g);
  const auto n = static_cast<std::size_t>(g.b);
  const std::size_t bb = n * n;
  const auto k = static_cast<std::size_t>(cfg.max_matches);
  const double s2 = cfg.sigma * cfg.sigma;
  Accumulator acc{std::vector<double>(img.size(), 0.0), std::vector<double>(img.size(), 0.0)};
  std::vector<float> noisy(k * bb);
  std::vector<float> guide(k * bb);

  for (const auto& grp : groups) {
    for (std::size_t i = 0; i < k; ++i) {
      std::copy_n(noisy_spectra.begin() + static_cast<std::ptrdiff_t>(grp[i] * bb), bb,
                  noisy.begin() + static_cast<std::ptrdiff_t>(i * bb));
      std::copy_n(pilot_spectra.begin() + static_cast<std::ptrdiff_t>(grp[i] * bb), bb,
                  guide.begin() + static_cast<std::ptrdiff_t>(i * bb));
    }
    stack_transform(noisy, k, bb, false);
    stack_transform(guide, k, bb, false);
    double energy = 0.0;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      const double p2 = static_cast<double>(guide[i]) * guide[i];
      const double shrink = p2 / (p2 + s2);
      noisy[i] = static_cast<float>(noisy[i] * shrink);
      energy += shrink * shrink;
    }
    stack_transform(noisy, k, bb, true);
    const double weight = 1.0 / std::max(energy, 1e-12);
    for (std::size_t i = 0; i < k; ++i) {
      const std::vector<float> block = idct2(std::span<const float>(noisy).subspan(i * bb, bb), n);
      aggregate(acc, g, grp[i], block, weight);
    }
  }
  return finish(acc, img);
}

}  // namespace

Image2D bm3d_denoise(const Image2D& img, const Bm3dConfig& cfg) {
  cfg.validate();
  if (img.width() < static_cast<std::size_t>(cfg.block_size) || img.height() < static_cast<std::size_t>(cfg.block_size)) {
    throw std::invalid_argument("bm3d: image smaller than one block");
  }
  Grid g;
  g.w = static_cast<int>(img.width());
  g.h = static_cast<int>(img.height());
  g.b = cfg.block_size;
  g.r = cfg.search_radius;
  const Image2D padded = pad_symmetric(img, static_cast<std::size_t>(g.r));
  g.pw = static_cast<int>(padded.width());
  g.cw = g.w + 2 * g.r - g.b + 1;
  g.ch = g.h + 2 * g.r - g.b + 1;
  const std::vector<int> ref_y = reference_positions(g.h, g.b, cfg.ref_step);
  const std::vector<int> ref_x = reference_positions(g.w, g.b, cfg.ref_step);

  Image2D basic = hard_threshold_stage(img, padded, g, ref_y, ref_x, cfg);
  if (cfg.stages == Bm3dStages::one) return clamp_to_range(basic);
  return clamp_to_range(wiener_stage(img, padded, basic, g, ref_y, ref_x, cfg));
}

}  // namespace usdiff
