#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "usdiff/rng.hpp"
#include "usdiff/ultrasound.hpp"

namespace usdiff {

namespace {

constexpr int kPulseTableSteps = 64;  // sub-sample delay resolution
constexpr double kPulseHalfWidthSigmas = 4.0;
constexpr double kFwhmPerSigma = 2.3548200450309493;

double pulse_sigma_seconds(const PulseShape& p, const TransducerGeometry& g) {
  return p.sigma_cycles / g.center_frequency;
}

/// Quadrature pulse tables: row q holds the pulse sampled at offsets
/// (m - half - q / Q) / fs for m in [0, 2 half + 1].
struct PulseTable {
  int half = 0;
  int taps = 0;
  std::vector<float> in_phase;
  std::vector<float> quadrature;

  PulseTable(const PulseShape& p, const TransducerGeometry& g) {
    const double s = pulse_sigma_seconds(p, g);
    half = static_cast<int>(std::ceil(kPulseHalfWidthSigmas * s * g.sampling_rate));
    taps = 2 * half + 2;
    in_phase.resize(static_cast<std::size_t>((kPulseTableSteps + 1) * taps));
    quadrature.resize(in_phase.size());
    for (int q = 0; q <= kPulseTableSteps; ++q) {
      for (int m = 0; m < taps; ++m) {
        const double u = (m - half - static_cast<double>(q) / kPulseTableSteps) / g.sampling_rate;
        const double gauss = std::exp(-u * u / (2.0 * s * s));
        const double ph = 2.0 * std::numbers::pi * g.center_frequency * u;
        in_phase[static_cast<std::size_t>(q * taps + m)] = static_cast<float>(gauss * std::cos(ph));
        quadrature[static_cast<std::size_t>(q * taps + m)] = static_cast<float>(gauss * std::sin(ph));
      }
    }
  }
};

}  // namespace

RFFrame simulate_frame(std::span<const Scatterer> scatterers, const TransducerGeometry& geometry,
                       double steer_angle, std::size_t samples_per_element, const PulseShape& pulse) {
  geometry.validate();
  if (!(pulse.sigma_cycles > 0)) throw std::invalid_argument("pulse: sigma must be positive");
  RFFrame frame = make_frame(geometry, samples_per_element, steer_angle);
  frame.validate();
  const PulseTable table(pulse, geometry);
  const double fs_over_c = geometry.sampling_rate / geometry.sound_speed;
  const double sin_a = std::sin(steer_angle);
  const double cos_a = std::cos(steer_angle);
  const auto n_s = static_cast<std::ptrdiff_t>(samples_per_element);

  std::vector<double> acc(frame.samples.size(), 0.0);
  for (std::size_t e = 0; e < geometry.element_count; ++e) {
    const double ex = geometry.element_x(e);
    double* trace = acc.data() + e * samples_per_element;
    for (const auto& sc : scatterers) {
      const double dx = sc.x - ex;
      const double centre = (sc.x * sin_a + sc.z * cos_a + std::sqrt(dx * dx + sc.z * sc.z)) * fs_over_c;
      const double fl = std::floor(centre);
      const auto q = static_cast<int>(std::lround((centre - fl) * kPulseTableSteps));
      const auto k0 = static_cast<std::ptrdiff_t>(fl) - table.half;
      const float* ip = table.in_phase.data() + static_cast<std::size_t>(q * table.taps);
      const float* qp = table.quadrature.data() + static_cast<std::size_t>(q * table.taps);
      const double ar = sc.amplitude.real();
      const double ai = sc.amplitude.imag();
      const std::ptrdiff_t m_lo = std::max<std::ptrdiff_t>(0, -k0);
      const std::ptrdiff_t m_hi = std::min<std::ptrdiff_t>(table.taps, n_s - k0);
      // Re(a e^{i w u}) = ar cos(w u) - ai sin(w u)
      for (std::ptrdiff_t m = m_lo; m < m_hi; ++m) trace[k0 + m] += ar * ip[m] - ai * qp[m];
    }
  }
  for (std::size_t i = 0; i < acc.size(); ++i) frame.samples[i] = static_cast<float>(acc[i]);
  return frame;
}

std::size_t samples_for_grid(const TransducerGeometry& geometry, const ImagingGrid& grid, double margin,
                             const PulseShape& pulse) {
  geometry.validate();
  grid.validate();
  const double xs[2] = {grid.x(0) - margin, grid.x(grid.width - 1) + margin};
  const double zs[2] = {std::max(grid.z(0) - margin, 0.0), grid.z(grid.height - 1) + margin};
  const double far_el = std::max(std::fabs(geometry.element_x(0)), std::fabs(geometry.element_x(geometry.element_count - 1)));
  double t_max = 0.0;
  for (double x : xs) {
    for (double z : zs) {
      // Worst case over steering |a| < pi/4.
      const double tx = std::fabs(x) * std::sin(std::numbers::pi / 4) + z;
      const double rx = std::hypot(std::fabs(x) + far_el, z);
      t_max = std::max(t_max, (tx + rx) / geometry.sound_speed);
    }
  }
  const double tail = kPulseHalfWidthSigmas * pulse_sigma_seconds(pulse, geometry);
  return static_cast<std::size_t>(std::ceil((t_max + tail) * geometry.sampling_rate)) + 4;
}

// Phantom spec ------------------------------------------------------------------

std::vector<double> PhantomSpec::default_angles() {
  std::vector<double> a(15);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = (-7.0 + static_cast<double>(i)) * std::numbers::pi / 180.0;
  }
  return a;
}

PhantomSpec::PhantomSpec() : angles(default_angles()) {}

ImagingGrid PhantomSpec::grid() const { return centered_grid(width, height, pixel_size, depth_start); }

double PhantomSpec::resolution_cell_area() const {
  const double f_num = bmode.das.f_number > 0
                           ? bmode.das.f_number
                           : (depth_start + 0.5 * height * pixel_size) / (geometry.element_count * geometry.pitch);
  const double lateral = geometry.wavelength() * f_num;
  const double axial = 0.5 * geometry.sound_speed * kFwhmPerSigma * pulse_sigma_seconds(pulse, geometry);
  return lateral * axial;
}

void PhantomSpec::validate() const {
  geometry.validate();
  if (width == 0 || height == 0) throw std::invalid_argument("phantom: grid must be non-empty");
  if (!(pixel_size > 0) || !(depth_start > 0)) {
    throw std::invalid_argument("phantom: pixel size and depth must be positive");
  }
  if (!(scatterer_density > 0) || !std::isfinite(scatterer_density)) {
    throw std::invalid_argument("phantom: scatterer density must be positive");
  }
  if (!(margin >= 0)) throw std::invalid_argument("phantom: margin must be >= 0");
  if (!(pulse.sigma_cycles > 0)) throw std::invalid_argument("phantom: pulse sigma must be positive");
  if (angles.empty()) throw std::invalid_argument("phantom: at least one steering angle required");
  for (double a : angles) {
    if (!(std::fabs(a) < std::numbers::pi / 4)) throw std::invalid_argument("phantom: steering angle must satisfy |a| < pi/4");
  }
  if (bmode.axial_oversample == 0) throw std::invalid_argument("phantom: axial oversampling must be >= 1");
  if (!(bmode.dynamic_range_db > 0)) throw std::invalid_argument("phantom: dynamic range must be positive");
  if (!(bmode.das.f_number >= 0)) throw std::invalid_argument("phantom: f-number must be >= 0");
  const auto w = static_cast<double>(width);
  const auto h = static_cast<double>(height);
  for (std::size_t i = 0; i < cysts.size(); ++i) {
    const auto& c = cysts[i];
    const std::string tag = "phantom: cyst " + std::to_string(i);
    if (!(c.radius > 0)) throw std::invalid_argument(tag + " radius must be positive");
    if (!(c.echogenicity >= 0) || !std::isfinite(c.echogenicity)) {
      throw std::invalid_argument(tag + " echogenicity must be >= 0");
    }
    if (!(c.cx - c.radius >= 0 && c.cx + c.radius <= w && c.cy - c.radius >= 0 && c.cy + c.radius <= h)) {
      throw std::invalid_argument(tag + " lies outside the " + std::to_string(width) + "x" +
                                  std::to_string(height) + " grid");
    }
  }
}

RegionMask cyst_mask(const CystSpec& cyst, std::size_t width, std::size_t height) {
  RegionMask m(width, height, MaskRole::inside);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double dx = static_cast<double>(x) + 0.5 - cyst.cx;
      const double dy = static_cast<double>(y) + 0.5 - cyst.cy;
      if (dx * dx + dy * dy <= cyst.radius * cyst.radius) m.set(x, y);
    }
  }
  return m;
}

std::vector<Scatterer> place_scatterers(const PhantomSpec& spec) {
  spec.validate();
  const ImagingGrid g = spec.grid();
  const double x_lo = g.x(0) - spec.margin;
  const double x_hi = g.x(g.width - 1) + spec.margin;
  const double z_lo = std::max(g.z(0) - spec.margin, 0.25 * g.z(0));
  const double z_hi = g.z(g.height - 1) + spec.margin;
  const double area = (x_hi - x_lo) * (z_hi - z_lo);
  const auto count = static_cast<std::size_t>(std::llround(spec.scatterer_density * area / spec.resolution_cell_area()));

  SplitMix64 rng(derive_seed(spec.seed, 0x5CA77E75ULL));
  std::vector<Scatterer> out(count);
  const double amp_scale = std::numbers::sqrt2 / 2.0;
  for (auto& s : out) {
    s.x = rng.uniform(x_lo, x_hi);
    s.z = rng.uniform(z_lo, z_hi);
    const double re = rng.normal() * amp_scale;
    const double im = rng.normal() * amp_scale;
    s.amplitude = {re, im};
    // Pixel coordinates: pixel i spans [i, i + 1) and is centred on grid sample i.
    const double px = (s.x - g.x0) / g.dx + 0.5;
    const double py = (s.z - g.z0) / g.dz + 0.5;
    for (const auto& c : spec.cysts) {
      const double dx = px - c.cx;
      const double dy = py - c.cy;
      if (dx * dx + dy * dy <= c.radius * c.radius) {
        s.amplitude *= c.echogenicity;
        break;
      }
    }
  }
  return out;
}

Phantom synth_phantom(const PhantomSpec& spec) {
  const auto scatterers = place_scatterers(spec);
  const ImagingGrid g = spec.grid();
  const std::size_t n_s = samples_for_grid(spec.geometry, g, spec.margin, spec.pulse);
  Phantom ph;
  ph.rf_frames.reserve(spec.angles.size());
  for (double a : spec.angles) ph.rf_frames.push_back(simulate_frame(scatterers, spec.geometry, a, n_s, spec.pulse));
  ph.envelope = compound_envelope(ph.rf_frames, g, spec.bmode);
  ph.bmode = log_compress(ph.envelope, spec.bmode.dynamic_range_db);
  for (const auto& c : spec.cysts) ph.cyst_masks.push_back(cyst_mask(c, spec.width, spec.height));
  return ph;
}

// Splits --------------------------------------------------------------------------

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

std::uint64_t split_seed(std::uint64_t base_seed, Split split, std::uint64_t index) {
  return derive_seed(derive_seed(base_seed, static_cast<std::uint64_t>(split)), index);
}

SplitPlan plan_splits(std::size_t total, double ratio) {
  if (!(ratio >= 0 && ratio < 0.5)) throw std::invalid_argument("split ratio must lie in [0, 0.5)");
  SplitPlan p;
  p.validation = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));
  p.test = p.validation;
  p.train = total - p.validation - p.test;
  return p;
}

PhantomSpec sample_phantom_spec(const PhantomSpec& base, std::uint64_t base_seed, Split split,
                                std::uint64_t index) {
  PhantomSpec spec = base;
  spec.seed = split_seed(base_seed, split, index);
  spec.cysts.clear();
  SplitMix64 rng(derive_seed(spec.seed, 0xC757ULL));
  const double side = static_cast<double>(std::min(spec.width, spec.height));
  const double radius = rng.uniform(0.12, 0.2) * side;

  double echo = 0.0;
  if (split != Split::test) {
    static constexpr std::array<double, 5> kChoices = {-1.0, 0.0, 0.3, 0.6, 1.5};
    echo = kChoices[static_cast<std::size_t>(rng.uniform_int(0, kChoices.size() - 1))];
    if (echo < 0) return spec;
  }
  // Leave room for the equal-area annulus used by contrast metrics.
  auto centre = [&](double extent) {
    const double keep = std::min(1.45 * radius + 3.0, 0.5 * extent);
    return extent - 2 * keep > 0 ? rng.uniform(keep, extent - keep) : 0.5 * extent;
  };
  CystSpec c;
  c.radius = radius;
  c.cx = centre(static_cast<double>(spec.width));
  c.cy = centre(static_cast<double>(spec.height));
  c.echogenicity = echo;
  spec.cysts.push_back(c);
  return spec;
}

}  // namespace usdiff
