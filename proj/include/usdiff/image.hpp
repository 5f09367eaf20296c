#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace usdiff {

/// Nominal range a set of samples is expressed in.
enum class ValueRange { unit_interval, signed_unit, eight_bit };

struct RangeBounds {
  float lo;
  float hi;
};

RangeBounds bounds(ValueRange range);
std::string_view range_name(ValueRange range);

/// Single-channel float image, row-major. Width M runs along x, height N
/// along y.
class Image2D {
 public:
  Image2D() = default;
  Image2D(std::size_t width, std::size_t height, ValueRange range = ValueRange::unit_interval,
          float fill = 0.0f);
  /// Throws std::invalid_argument if data.size() != width * height.
  Image2D(std::size_t width, std::size_t height, std::vector<float> data,
          ValueRange range = ValueRange::unit_interval);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  ValueRange range() const { return range_; }
  void set_range(ValueRange range) { range_ = range; }

  float& at(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }
  float at(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }

  std::span<float> pixels() { return data_; }
  std::span<const float> pixels() const { return data_; }
  std::span<float> row(std::size_t y) { return {data_.data() + y * width_, width_}; }
  std::span<const float> row(std::size_t y) const { return {data_.data() + y * width_, width_}; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool same_shape(const Image2D& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  bool all_finite() const;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  ValueRange range_ = ValueRange::unit_interval;
  std::vector<float> data_;
};

/// Affine map between nominal ranges (no clamping).
Image2D convert_range(const Image2D& img, ValueRange target);

/// Clamps every sample to the nominal bounds of the image's range.
Image2D clamp_to_range(const Image2D& img);

/// Copy of the w x h window with top-left corner (x0, y0).
Image2D crop(const Image2D& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h);

/// Mirror index into [0, n) with edge repetition (…2 1 0 | 0 1 2 … n-1 | n-1 n-2…).
inline std::ptrdiff_t mirror_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

/// Symmetric padding by `pad` pixels on every side.
Image2D pad_symmetric(const Image2D& img, std::size_t pad);

/// Throws std::invalid_argument naming `what` if the shapes differ.
void require_same_shape(const Image2D& a, const Image2D& b, std::string_view what);

}  // namespace usdiff
