#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "usdiff/ultrasound.hpp"

namespace usdiff {

std::vector<float> envelope(std::span<const float> line) {
  if (line.empty()) return {};
  const std::size_t n = next_power_of_two(line.size());
  std::vector<Complex> x(n, Complex{});
  for (std::size_t i = 0; i < line.size(); ++i) x[i] = line[i];
  auto spec = fft(x);
  // Analytic signal: keep DC and Nyquist, double positive, drop negative frequencies.
  for (std::size_t k = 1; k < n; ++k) {
    if (k < n / 2) {
      spec[k] *= 2.0;
    } else if (k > n / 2) {
      spec[k] = 0.0;
    }
  }
  const auto analytic = ifft(spec);
  std::vector<float> out(line.size());
  for (std::size_t i = 0; i < line.size(); ++i) out[i] = static_cast<float>(std::abs(analytic[i]));
  return out;
}

Image2D envelope_columns(const Image2D& rf_image) {
  Image2D out(rf_image.width(), rf_image.height(), rf_image.range());
  std::vector<float> col(rf_image.height());
  for (std::size_t x = 0; x < rf_image.width(); ++x) {
    for (std::size_t y = 0; y < rf_image.height(); ++y) col[y] = rf_image.at(x, y);
    const auto env = envelope(col);
    for (std::size_t y = 0; y < rf_image.height(); ++y) out.at(x, y) = env[y];
  }
  return out;
}

Image2D log_compress(const Image2D& env, double dynamic_range_db) {
  if (!(dynamic_range_db > 0) || !std::isfinite(dynamic_range_db)) {
    throw std::invalid_argument("log_compress: dynamic range must be positive");
  }
  if (env.empty()) throw std::invalid_argument("log_compress: empty envelope");
  float peak = 0.0f;
  for (float v : env.pixels()) {
    if (!(v >= 0.0f) || !std::isfinite(v)) throw std::invalid_argument("log_compress: envelope must be finite and >= 0");
    peak = std::max(peak, v);
  }
  if (peak == 0.0f) throw std::invalid_argument("log_compress: all-zero envelope");
  Image2D out(env.width(), env.height(), ValueRange::unit_interval);
  for (std::size_t i = 0; i < env.size(); ++i) {
    const double v = env.data()[i];
    const double db = v > 0 ? 20.0 * std::log10(v / peak) : -dynamic_range_db;
    out.data()[i] = static_cast<float>((std::clamp(db, -dynamic_range_db, 0.0) + dynamic_range_db) / dynamic_range_db);
  }
  return out;
}

// Grid -------------------------------------------------------------------------

void ImagingGrid::validate() const {
  if (width == 0 || height == 0) throw std::invalid_argument("imaging grid: empty");
  if (!(dx > 0) || !(dz > 0)) throw std::invalid_argument("imaging grid: spacing must be positive");
  if (!(z0 > 0)) throw std::invalid_argument("imaging grid: grid must lie in front of the array (z > 0)");
}

ImagingGrid ImagingGrid::axially_oversampled(std::size_t factor) const {
  if (factor == 0) throw std::invalid_argument("imaging grid: oversampling factor must be >= 1");
  ImagingGrid g = *this;
  g.height = height * factor;
  g.dz = dz / static_cast<double>(factor);
  // Original row j maps to oversampled row j * factor.
  return g;
}

ImagingGrid centered_grid(std::size_t width, std::size_t height, double pixel_size, double depth_start) {
  ImagingGrid g;
  g.width = width;
  g.height = height;
  g.dx = pixel_size;
  g.dz = pixel_size;
  g.x0 = -0.5 * static_cast<double>(width - 1) * pixel_size;
  g.z0 = depth_start;
  g.validate();
  return g;
}

// DAS --------------------------------------------------------------------------

Image2D das_beamform(const RFFrame& rf, const ImagingGrid& grid, const DasOptions& opts) {
  rf.validate();
  grid.validate();
  if (!(opts.f_number >= 0) || !std::isfinite(opts.f_number)) {
    throw std::invalid_argument("das: f-number must be >= 0");
  }
  const auto& g = rf.geometry;
  const std::size_t n_el = g.element_count;
  const std::size_t n_s = rf.samples_per_element;
  const double fs_over_c = g.sampling_rate / g.sound_speed;
  const double sin_a = std::sin(rf.steer_angle);
  const double cos_a = std::cos(rf.steer_angle);

  std::vector<double> ex(n_el);
  for (std::size_t e = 0; e < n_el; ++e) ex[e] = g.element_x(e);

  Image2D out(grid.width, grid.height, ValueRange::signed_unit);
  for (std::size_t j = 0; j < grid.height; ++j) {
    const double z = grid.z(j);
    const double half_ap = opts.f_number > 0 ? 0.5 * z / opts.f_number : 0.0;
    for (std::size_t i = 0; i < grid.width; ++i) {
      const double x = grid.x(i);
      std::size_t e_lo = 0;
      std::size_t e_hi = n_el;  // exclusive
      if (opts.f_number > 0) {
        const double lo = (x - half_ap) / g.pitch + 0.5 * static_cast<double>(n_el - 1);
        const double hi = (x + half_ap) / g.pitch + 0.5 * static_cast<double>(n_el - 1);
        const double c_lo = std::ceil(lo);
        const double c_hi = std::floor(hi);
        if (c_hi < 0 || c_lo > static_cast<double>(n_el - 1)) continue;
        e_lo = static_cast<std::size_t>(std::max(c_lo, 0.0));
        e_hi = static_cast<std::size_t>(std::min(c_hi, static_cast<double>(n_el - 1))) + 1;
        if (e_lo >= e_hi) {
          // Aperture narrower than one pitch: use the nearest element.
          const double nearest = std::clamp(std::round(0.5 * (lo + hi)), 0.0, static_cast<double>(n_el - 1));
          e_lo = static_cast<std::size_t>(nearest);
          e_hi = e_lo + 1;
        }
      }
      const double tx = x * sin_a + z * cos_a;
      const bool hann = opts.apodization == Apodization::hann && opts.f_number > 0 && e_hi - e_lo > 1;
      double acc = 0.0;
      double wsum = 0.0;
      for (std::size_t e = e_lo; e < e_hi; ++e) {
        const double dxe = x - ex[e];
        double w = 1.0;
        if (hann) {
          const double c = std::cos(0.5 * std::numbers::pi * dxe / half_ap);
          w = c * c;
        }
        wsum += w;
        const double pos = (tx + std::sqrt(dxe * dxe + z * z)) * fs_over_c;
        if (!(pos >= 0.0)) continue;
        const auto k = static_cast<std::size_t>(pos);
        if (k + 1 >= n_s) continue;
        const double f = pos - static_cast<double>(k);
        const float* s = rf.element(e);
        acc += w * ((1.0 - f) * s[k] + f * s[k + 1]);
      }
      out.at(i, j) = wsum > 0 ? static_cast<float>(acc / wsum) : 0.0f;
    }
  }
  return out;
}

Image2D compound(std::span<const Image2D> images) {
  if (images.empty()) throw std::invalid_argument("compound: no images");
  for (const auto& im : images) require_same_shape(images[0], im, "compound");
  std::vector<double> acc(images[0].size(), 0.0);
  for (const auto& im : images) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += im.data()[i];
  }
  Image2D out(images[0].width(), images[0].height(), images[0].range());
  const double inv = 1.0 / static_cast<double>(images.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out.data()[i] = static_cast<float>(acc[i] * inv);
  return out;
}

Image2D envelope_image(const RFFrame& rf, const ImagingGrid& grid, const BmodeOptions& opts) {
  const std::size_t f = opts.axial_oversample;
  const Image2D fine = envelope_columns(das_beamform(rf, grid.axially_oversampled(f), opts.das));
  Image2D out(grid.width, grid.height, ValueRange::unit_interval);
  for (std::size_t j = 0; j < grid.height; ++j) {
    for (std::size_t i = 0; i < grid.width; ++i) out.at(i, j) = fine.at(i, j * f);
  }
  return out;
}

Image2D compound_envelope(std::span<const RFFrame> frames, const ImagingGrid& grid, const BmodeOptions& opts) {
  if (frames.empty()) throw std::invalid_argument("compound: no frames");
  std::vector<Image2D> envs;
  envs.reserve(frames.size());
  for (const auto& f : frames) envs.push_back(envelope_image(f, grid, opts));
  return compound(envs);
}

}  // namespace usdiff
