#pragma once
// Benchmark harness: corrupt held-out images through the forward process,
// denoise them with each method and tabulate PSNR / GCNR.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "usdiff/baselines.hpp"
#include "usdiff/diffusion.hpp"
#include "usdiff/metrics.hpp"
#include "usdiff/ultrasound.hpp"

namespace usdiff {

struct BenchConfig {
  std::string dataset_source = "phantom";  // "phantom" | "directory"
  PhantomSpec phantom;                      // template for the test split
  std::string image_dir;
  std::size_t test_count = 16;
  std::vector<int> t_starts{10, 20};
  std::vector<std::string> methods{"noisy", "nlm", "bm3d", "ddpm"};
  std::uint64_t seed = 0;
  SamplerVariant sampler_variant = SamplerVariant::standard_posterior;
  bool inject_noise = false;
  PsnrFormula psnr_formula = PsnrFormula::standard;
  int gcnr_bins = kDefaultGcnrBins;
  std::string checkpoint;
  std::string output_dir;
  int schedule_steps = 300;

  /// Throws std::invalid_argument on any inconsistency.
  void validate() const;
};

inline constexpr std::string_view kKnownMethods[] = {"noisy", "nlm", "bm3d", "ddpm"};

// JSON. Readers reject unknown keys and wrong types with std::invalid_argument;
// absent keys keep their defaults.
nlohmann::json to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BenchConfig& cfg);
BenchConfig bench_config_from_json(const nlohmann::json& j);
/// Parses text; malformed JSON raises std::invalid_argument.
nlohmann::json parse_json_text(const std::string& text);

// Corruption and per-method denoising ---------------------------------------

/// Forward-process corruption to step t using gaussian_field(seed, draw).
/// Works in the signed-unit domain and returns the input's range; t == 0
/// returns a copy.
Image2D corrupt_image(const Image2D& clean, int t, const NoiseSchedule& sched, std::uint64_t seed,
                      std::uint64_t draw = 0);

/// Noise level of x_t / sqrt(abar_t) expressed on the unit interval:
/// sqrt((1 - abar_t) / abar_t) / 2.
double baseline_sigma(const NoiseSchedule& sched, int t);

/// x_t / sqrt(abar_t) on the unit interval, the input classical denoisers see.
Image2D undo_signal_scaling(const Image2D& noisy, int t, const NoiseSchedule& sched);

enum class BaselineMethod { nlm, bm3d };
BaselineMethod parse_baseline(std::string_view name);

/// Classical denoising of a forward-process sample at step t: rescale by
/// 1 / sqrt(abar_t), denoise on the unit interval at baseline_sigma(t),
/// clamp, and return in the input's range.
Image2D baseline_at_step(const Image2D& noisy, int t, BaselineMethod method, const NoiseSchedule& sched);

/// Reverse diffusion from t_start on the signed-unit domain, clamped, in the
/// input's range.
Image2D ddpm_at_step(const Image2D& noisy, int t_start, const NoisePredictor& predictor,
                     const NoiseSchedule& sched, const DenoiseOptions& options);

// Harness -------------------------------------------------------------------

struct BenchImage {
  std::string name;
  Image2D clean;  // unit interval
  std::optional<std::pair<RegionMask, RegionMask>> regions;  // inside, outside
};

/// Test images for the configured source. Phantom sources draw the test split
/// with one anechoic cyst each and eroded cyst / annulus region pairs.
std::vector<BenchImage> load_bench_images(const BenchConfig& cfg);

/// Region pair of a cyst: eroded disc and an equal-area concentric annulus.
std::pair<RegionMask, RegionMask> gcnr_regions(const CystSpec& cyst, std::size_t width, std::size_t height);

/// B-mode images of `phantoms` sampled specs of a split, each cut into
/// non-overlapping patch x patch tiles (row-major tile order).
std::vector<Image2D> phantom_patches(const PhantomSpec& base, std::uint64_t seed, Split split,
                                     std::size_t phantoms, std::size_t patch);

/// Runs every (method, t_start) pair. `ddpm` overrides cfg.checkpoint when given.
MetricsReport run_bench(const BenchConfig& cfg, const std::vector<BenchImage>& images,
                        const NoisePredictor* ddpm = nullptr);

/// report.csv, report_per_image.csv, report.md and config.json.
void write_report(const std::filesystem::path& dir, const MetricsReport& report, const BenchConfig& cfg);

}  // namespace usdiff
