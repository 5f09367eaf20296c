#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "usdiff/image.hpp"
#include "usdiff/metrics.hpp"
#include "usdiff/rf.hpp"

namespace usdiff {

// FFT ------------------------------------------------------------------------

using Complex = std::complex<double>;

/// Radix-2 DFT, X_k = sum_n x_n exp(-2 pi i k n / N). Throws
/// std::invalid_argument unless the length is a power of two.
std::vector<Complex> fft(std::span<const Complex> x);
/// Inverse with 1/N scaling, so ifft(fft(x)) == x.
std::vector<Complex> ifft(std::span<const Complex> x);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

// Envelope and display --------------------------------------------------------

/// Magnitude of the analytic signal. Lines are zero-padded to a power of two.
std::vector<float> envelope(std::span<const float> line);

/// Envelope of every column (the axial direction) of an RF image.
Image2D envelope_columns(const Image2D& rf_image);

/// 20 log10(env / max env) clamped to [-dr, 0] and mapped onto [0, 1].
Image2D log_compress(const Image2D& env, double dynamic_range_db = 60.0);

// Beamforming ------------------------------------------------------------------

/// Pixel (i, j) sits at x = x0 + i dx (lateral), z = z0 + j dz (depth).
struct ImagingGrid {
  std::size_t width = 0;
  std::size_t height = 0;
  double x0 = 0.0;
  double z0 = 0.0;
  double dx = 0.0;
  double dz = 0.0;

  double x(std::size_t i) const { return x0 + static_cast<double>(i) * dx; }
  double z(std::size_t j) const { return z0 + static_cast<double>(j) * dz; }
  void validate() const;
  /// Same extent with `factor` times as many rows.
  ImagingGrid axially_oversampled(std::size_t factor) const;
};

/// Grid of width x height square pixels centred laterally on the array.
ImagingGrid centered_grid(std::size_t width, std::size_t height, double pixel_size, double depth_start);

enum class Apodization { rectangular, hann };

struct DasOptions {
  /// Receive aperture width is z / f_number around the pixel; 0 uses every element.
  double f_number = 1.0;
  Apodization apodization = Apodization::hann;
};

/// Delay-and-sum for one plane-wave frame. Delay for element e at pixel p is
/// (x sin a + z cos a + |p - e|) / c; samples are linearly interpolated and
/// delays outside the recorded window contribute zero. Output is the
/// apodization-weighted sum divided by the weight total, so speckle
/// brightness does not grow with the aperture (before envelope detection).
Image2D das_beamform(const RFFrame& rf, const ImagingGrid& grid, const DasOptions& opts = {});

/// Pixel-wise mean of equally sized images.
Image2D compound(std::span<const Image2D> images);

struct BmodeOptions {
  DasOptions das;
  std::size_t axial_oversample = 4;
  double dynamic_range_db = 60.0;
};

/// Beamform on an axially oversampled grid, detect the envelope along depth
/// and keep every `axial_oversample`-th row.
Image2D envelope_image(const RFFrame& rf, const ImagingGrid& grid, const BmodeOptions& opts = {});

/// Compounded (mean) envelope over all frames.
Image2D compound_envelope(std::span<const RFFrame> frames, const ImagingGrid& grid, const BmodeOptions& opts = {});

// Simulation -------------------------------------------------------------------

struct Scatterer {
  double x = 0.0;  // m
  double z = 0.0;  // m
  Complex amplitude{1.0, 0.0};
};

/// Gaussian-modulated cosine, exp(-t^2 / 2 s^2) cos(2 pi f0 t), s = sigma_cycles / f0.
struct PulseShape {
  double sigma_cycles = 0.5;
};

/// Far-field point echoes of a plane wave steered by `steer_angle`: each
/// scatterer adds Re(a exp(i 2 pi f0 u)) exp(-u^2 / 2 s^2), u = t - tau_e, to
/// every element. No attenuation, spreading or directivity.
RFFrame simulate_frame(std::span<const Scatterer> scatterers, const TransducerGeometry& geometry,
                       double steer_angle, std::size_t samples_per_element, const PulseShape& pulse = {});

/// Samples needed so every echo from the grid (plus a margin) lands in the window.
std::size_t samples_for_grid(const TransducerGeometry& geometry, const ImagingGrid& grid, double margin,
                             const PulseShape& pulse = {});

/// Circular inclusion in pixel coordinates of the output grid.
struct CystSpec {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
  double echogenicity = 0.0;  // amplitude multiplier, 0 = anechoic
};

struct PhantomSpec {
  std::size_t width = 64;    // px
  std::size_t height = 64;   // px
  double pixel_size = 50e-6;  // m
  double depth_start = 10e-3;  // m, depth of the first row
  double scatterer_density = 10.0;  // per resolution cell
  double margin = 1e-3;  // m, scatterers are placed this far beyond the grid
  std::vector<CystSpec> cysts;
  std::vector<double> angles;  // radians
  TransducerGeometry geometry;
  PulseShape pulse;
  BmodeOptions bmode;
  std::uint64_t seed = 0;

  /// 15 angles evenly spaced over [-7, 7] degrees.
  static std::vector<double> default_angles();
  PhantomSpec();

  ImagingGrid grid() const;
  /// Lateral (lambda * F#) by axial (pulse FWHM / 2) cell area, m^2.
  double resolution_cell_area() const;
  void validate() const;
};

struct Phantom {
  Image2D bmode;     // log-compressed, unit interval
  Image2D envelope;  // compounded linear envelope
  std::vector<RFFrame> rf_frames;
  std::vector<RegionMask> cyst_masks;  // one inside-mask per cyst
};

std::vector<Scatterer> place_scatterers(const PhantomSpec& spec);
Phantom synth_phantom(const PhantomSpec& spec);

/// Disc mask of a cyst on a width x height grid.
RegionMask cyst_mask(const CystSpec& cyst, std::size_t width, std::size_t height);

// Dataset splits ----------------------------------------------------------------

enum class Split : std::uint64_t { train = 1, validation = 2, test = 3 };

std::string_view split_name(Split s);

/// Seed of phantom `index` in a split; the namespaces never collide.
std::uint64_t split_seed(std::uint64_t base_seed, Split split, std::uint64_t index);

struct SplitPlan {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

/// Validation and test each get round(ratio * total) phantoms, train the rest.
SplitPlan plan_splits(std::size_t total, double ratio = 0.15);

/// Copy of `base` with a fresh seed and one randomly placed cyst. Test
/// phantoms always carry an anechoic cyst; training phantoms draw the
/// echogenicity from {0, 0.3, 0.6, 1.5} or have no cyst at all.
PhantomSpec sample_phantom_spec(const PhantomSpec& base, std::uint64_t base_seed, Split split,
                                std::uint64_t index);

}  // namespace usdiff
