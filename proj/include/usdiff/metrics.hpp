#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "usdiff/image.hpp"

namespace usdiff {

/// (1 / MN) sum (I - K)^2, accumulated in double.
double mse(const Image2D& reference, const Image2D& test);

enum class PsnrFormula {
  standard,       // 10 log10(MAX^2 / MSE)
  paper_literal,  // 10 log10(MAX / MSE)
};

std::string_view formula_name(PsnrFormula f);
PsnrFormula parse_formula(std::string_view name);

/// Returns +infinity when the images are identical.
double psnr(const Image2D& reference, const Image2D& test, double max_val,
            PsnrFormula formula = PsnrFormula::standard);

/// Peak value used for PSNR: hi - lo of the nominal range (1, 2 or 255).
double nominal_peak(ValueRange range);

enum class MaskRole { inside, outside };

struct RegionMask {
  std::size_t width = 0;
  std::size_t height = 0;
  MaskRole role = MaskRole::inside;
  std::vector<std::uint8_t> bits;  // row-major, 0 or 1

  RegionMask() = default;
  RegionMask(std::size_t w, std::size_t h, MaskRole r) : width(w), height(h), role(r), bits(w * h, 0) {}

  bool test(std::size_t x, std::size_t y) const { return bits[y * width + x] != 0; }
  void set(std::size_t x, std::size_t y, bool on = true) { bits[y * width + x] = on ? 1 : 0; }
  std::size_t count() const;
};

inline constexpr std::size_t kMinMaskPixels = 32;
inline constexpr int kDefaultGcnrBins = 64;

/// 1 - sum_b min(p_in(b), p_out(b)) over a histogram spanning the joint
/// min/max of both regions. Throws std::invalid_argument for masks that
/// overlap, mismatch the image, hold fewer than 32 pixels, or bins < 16.
double gcnr(const Image2D& img, const RegionMask& inside, const RegionMask& outside,
            int bins = kDefaultGcnrBins);

/// Disc of `radius` pixels eroded by `erode`, and the concentric annulus of
/// equal area starting `erode` pixels outside the disc edge.
std::pair<RegionMask, RegionMask> cyst_region_pair(std::size_t width, std::size_t height, double cx,
                                                   double cy, double radius, double erode = 2.0);

struct MetricsRow {
  std::string method;
  int t_start = 0;
  double psnr_db = 0.0;
  double gcnr_percent = 0.0;  // NaN when no regions were available
  std::vector<double> psnr_per_image;
  std::vector<double> gcnr_per_image;  // percent
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::vector<std::pair<std::string, std::string>> metadata;

  /// Canonical method order (noisy, nlm, bm3d, ddpm, others by name), then t_start.
  void sort_rows();
  const MetricsRow* find(std::string_view method, int t_start) const;

  /// `method,t_start,psnr_db,gcnr_percent`
  std::string to_csv() const;
  /// `method,t_start,image,psnr_db,gcnr_percent`
  std::string per_image_csv() const;
  /// PSNR table (methods x T columns), GCNR table and the metadata.
  std::string to_markdown() const;
};

std::string display_name(std::string_view method);

}  // namespace usdiff
