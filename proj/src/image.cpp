#include "usdiff/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace usdiff {

RangeBounds bounds(ValueRange range) {
  switch (range) {
    case ValueRange::unit_interval:
      return {0.0f, 1.0f};
    case ValueRange::signed_unit:
      return {-1.0f, 1.0f};
    case ValueRange::eight_bit:
      return {0.0f, 255.0f};
  }
  return {0.0f, 1.0f};
}

std::string_view range_name(ValueRange range) {
  switch (range) {
    case ValueRange::unit_interval:
      return "unit-interval";
    case ValueRange::signed_unit:
      return "signed-unit";
    case ValueRange::eight_bit:
      return "eight-bit";
  }
  return "unknown";
}

Image2D::Image2D(std::size_t width, std::size_t height, ValueRange range, float fill)
    : width_(width), height_(height), range_(range), data_(width * height, fill) {}

Image2D::Image2D(std::size_t width, std::size_t height, std::vector<float> data, ValueRange range)
    : width_(width), height_(height), range_(range), data_(std::move(data)) {
  if (data_.size() != width * height) {
    throw std::invalid_argument("Image2D: data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(width) + "x" +
                                std::to_string(height));
  }
}

bool Image2D::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Image2D convert_range(const Image2D& img, ValueRange target) {
  if (img.range() == target) return img;
  const RangeBounds from = bounds(img.range());
  const RangeBounds to = bounds(target);
  const double scale = (static_cast<double>(to.hi) - to.lo) / (static_cast<double>(from.hi) - from.lo);
  Image2D out(img.width(), img.height(), target);
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<float>(to.lo + (static_cast<double>(src[i]) - from.lo) * scale);
  }
  return out;
}

Image2D clamp_to_range(const Image2D& img) {
  const RangeBounds b = bounds(img.range());
  Image2D out = img;
  for (float& v : out.pixels()) v = std::clamp(v, b.lo, b.hi);
  return out;
}

Image2D crop(const Image2D& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) {
  if (x0 + w > img.width() || y0 + h > img.height()) {
    throw std::out_of_range("crop: window outside image");
  }
  Image2D out(w, h, img.range());
  for (std::size_t y = 0; y < h; ++y) {
    auto src = img.row(y0 + y).subspan(x0, w);
    std::copy(src.begin(), src.end(), out.row(y).begin());
  }
  return out;
}

Image2D pad_symmetric(const Image2D& img, std::size_t pad) {
  const auto w = static_cast<std::ptrdiff_t>(img.width());
  const auto h = static_cast<std::ptrdiff_t>(img.height());
  const auto p = static_cast<std::ptrdiff_t>(pad);
  Image2D out(img.width() + 2 * pad, img.height() + 2 * pad, img.range());
  for (std::ptrdiff_t y = 0; y < h + 2 * p; ++y) {
    const std::ptrdiff_t sy = mirror_index(y - p, h);
    auto src = img.row(static_cast<std::size_t>(sy));
    auto dst = out.row(static_cast<std::size_t>(y));
    for (std::ptrdiff_t x = 0; x < w + 2 * p; ++x) {
      dst[static_cast<std::size_t>(x)] = src[static_cast<std::size_t>(mirror_index(x - p, w))];
    }
  }
  return out;
}

void require_same_shape(const Image2D& a, const Image2D& b, std::string_view what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                                " vs " + std::to_string(b.width()) + "x" +
                                std::to_string(b.height()) + ")");
  }
}

}  // namespace usdiff
