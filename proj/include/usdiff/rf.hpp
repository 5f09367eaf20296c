#pragma once

#include <cstddef>
#include <vector>

namespace usdiff {

/// Linear array geometry. Element e sits at x_e = (e - (E - 1) / 2) * pitch, z = 0.
struct TransducerGeometry {
  std::size_t element_count = 128;
  double pitch = 0.245e-3;           // m
  double sampling_rate = 50e6;       // Hz
  double sound_speed = 1540.0;       // m/s
  double center_frequency = 8e6;     // Hz

  double element_x(std::size_t e) const {
    return (static_cast<double>(e) - 0.5 * static_cast<double>(element_count - 1)) * pitch;
  }
  double wavelength() const { return sound_speed / center_frequency; }
  /// Throws std::invalid_argument unless every field is positive.
  void validate() const;
};

/// Per-element channel data for one plane-wave transmission.
struct RFFrame {
  std::size_t samples_per_element = 0;
  double steer_angle = 0.0;  // radians, |angle| < pi/4
  TransducerGeometry geometry;
  std::vector<float> samples;  // element-major: samples[e * samples_per_element + k]

  float* element(std::size_t e) { return samples.data() + e * samples_per_element; }
  const float* element(std::size_t e) const { return samples.data() + e * samples_per_element; }
  void validate() const;
};

RFFrame make_frame(const TransducerGeometry& geometry, std::size_t samples_per_element,
                   double steer_angle);

}  // namespace usdiff
