#pragma once
// Variance schedule and the forward (corruption) / reverse (denoising)
// Markov chains of a DDPM. Steps are 1-based: t = 1..T, x_0 is the clean
// image. Images live in the signed-unit range while diffusing.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "usdiff/image.hpp"
#include "usdiff/rng.hpp"

namespace usdiff {

enum class BetaMode { constant, linear };

/// Constant mode uses `first`; linear mode interpolates first..last over t = 1..T.
struct BetaSpec {
  double first = 1.0 / 300.0;
  double last = 1.0 / 300.0;
};

/// Per-step variances and their cumulative products. Vectors are indexed
/// by t - 1; use the accessors for 1-based access.
class NoiseSchedule {
 public:
  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_.at(index(t)); }
  double alpha(int t) const { return alphas_.at(index(t)); }
  double alpha_bar(int t) const { return alpha_bars_.at(index(t)); }

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

  BetaMode mode() const { return mode_; }
  BetaSpec spec() const { return spec_; }

  /// Throws std::out_of_range unless 1 <= t <= T.
  void require_step(int t) const;

 private:
  friend NoiseSchedule make_schedule(int, BetaMode, BetaSpec);
  std::size_t index(int t) const {
    require_step(t);
    return static_cast<std::size_t>(t - 1);
  }

  BetaMode mode_ = BetaMode::constant;
  BetaSpec spec_{};
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

inline constexpr int kDefaultSteps = 300;
inline constexpr double kDefaultBeta = 1.0 / 300.0;

/// Throws std::invalid_argument for T < 1 or any beta outside (0, 1).
NoiseSchedule make_schedule(int steps = kDefaultSteps, BetaMode mode = BetaMode::constant,
                            BetaSpec spec = {});

enum class SamplerVariant { paper_literal, standard_posterior };

std::string_view variant_name(SamplerVariant v);
SamplerVariant parse_variant(std::string_view name);

GaussianField zero_field(std::size_t width, std::size_t height);

/// x_t = sqrt(1 - B_t) x_{t-1} + sqrt(B_t) eps.
Image2D forward_step(const Image2D& x_prev, int t, const NoiseSchedule& sched,
                     const GaussianField& eps);

/// x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) eps, the closed form of t forward steps.
Image2D forward_jump(const Image2D& x0, int t, const NoiseSchedule& sched, const GaussianField& eps);

struct ReverseStepResult {
  Image2D image;
  SamplerVariant variant;
};

/// One step of the reverse chain.
///   paper_literal:      x_t / sqrt(a_t) + (1 - a_t) / sqrt(1 - abar_t) * eps_hat
///   standard_posterior: (x_t - (1 - a_t) / sqrt(1 - abar_t) * eps_hat) / sqrt(a_t) + sigma_t z
/// with sigma_t = sqrt(B_t); z is zero when t == 1 or `inject` is null.
ReverseStepResult reverse_step(const Image2D& x_t, int t, const Image2D& eps_hat,
                               const NoiseSchedule& sched, SamplerVariant variant,
                               const GaussianField* inject = nullptr);

/// A NaN or infinity surfaced where a finite number was required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using NoisePredictor = std::function<Image2D(const Image2D& x_t, int t)>;

/// Raised when the predictor throws or returns a malformed field.
class PredictorError : public std::runtime_error {
 public:
  PredictorError(int step, const std::string& what)
      : std::runtime_error("noise predictor failed at step " + std::to_string(step) + ": " + what),
        step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

struct DenoiseOptions {
  SamplerVariant variant = SamplerVariant::standard_posterior;
  /// Inject sigma_t z at every step but the last (standard_posterior only).
  bool inject_noise = false;
  /// z for step t is gaussian_field(noise_seed, t, ...).
  std::uint64_t noise_seed = 0;
};

struct DenoiseResult {
  Image2D image;
  SamplerVariant variant;
  int steps_run = 0;
};

/// Runs reverse_step for t = t_start down to 1, feeding each output back in.
DenoiseResult denoise_from(const Image2D& x_noisy, int t_start, const NoisePredictor& predictor,
                           const NoiseSchedule& sched, const DenoiseOptions& options = {});

}  // namespace usdiff
