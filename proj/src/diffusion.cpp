#include "usdiff/diffusion.hpp"

#include <cmath>
#include <string>

#include "usdiff/simd.hpp"

namespace usdiff {

void NoiseSchedule::require_step(int t) const {
  if (t < 1 || t > steps()) {
    throw std::out_of_range("step " + std::to_string(t) + " outside [1, " +
                            std::to_string(steps()) + "]");
  }
}

NoiseSchedule make_schedule(int steps, BetaMode mode, BetaSpec spec) {
  if (steps < 1) throw std::invalid_argument("noise schedule needs at least one step");
  NoiseSchedule sched;
  sched.mode_ = mode;
  sched.spec_ = spec;
  const auto n = static_cast<std::size_t>(steps);
  sched.betas_.resize(n);
  sched.alphas_.resize(n);
  sched.alpha_bars_.resize(n);
  double running = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    double beta = spec.first;
    if (mode == BetaMode::linear && steps > 1) {
      beta = spec.first + (spec.last - spec.first) * static_cast<double>(i) / (steps - 1);
    }
    if (!(beta > 0.0 && beta < 1.0)) {
      throw std::invalid_argument("beta at step " + std::to_string(i + 1) + " = " +
                                  std::to_string(beta) + " is outside (0, 1)");
    }
    sched.betas_[i] = beta;
    sched.alphas_[i] = 1.0 - beta;
    running *= sched.alphas_[i];
    sched.alpha_bars_[i] = running;
  }
  return sched;
}

std::string_view variant_name(SamplerVariant v) {
  return v == SamplerVariant::paper_literal ? "paper-literal" : "standard-posterior";
}

SamplerVariant parse_variant(std::string_view name) {
  if (name == "paper-literal") return SamplerVariant::paper_literal;
  if (name == "standard-posterior") return SamplerVariant::standard_posterior;
  throw std::invalid_argument("unknown sampler variant '" + std::string(name) + "'");
}

GaussianField zero_field(std::size_t width, std::size_t height) {
  GaussianField f;
  f.width = width;
  f.height = height;
  f.samples.assign(width * height, 0.0f);
  return f;
}

namespace {

void require_field_shape(const Image2D& img, const GaussianField& eps, std::string_view what) {
  if (eps.width != img.width() || eps.height != img.height() ||
      eps.samples.size() != img.size()) {
    throw std::invalid_argument(std::string(what) + ": noise field shape does not match image");
  }
}

Image2D affine(const Image2D& x, double a, std::span<const float> y, double b) {
  Image2D out(x.width(), x.height(), x.range());
  simd::axpby(static_cast<float>(a), x.pixels(), static_cast<float>(b), y, out.pixels());
  return out;
}

}  // namespace

Image2D forward_step(const Image2D& x_prev, int t, const NoiseSchedule& sched,
                     const GaussianField& eps) {
  sched.require_step(t);
  require_field_shape(x_prev, eps, "forward_step");
  const double beta = sched.beta(t);
  return affine(x_prev, std::sqrt(1.0 - beta), eps.samples, std::sqrt(beta));
}

Image2D forward_jump(const Image2D& x0, int t, const NoiseSchedule& sched, const GaussianField& eps) {
  sched.require_step(t);
  require_field_shape(x0, eps, "forward_jump");
  const double abar = sched.alpha_bar(t);
  return affine(x0, std::sqrt(abar), eps.samples, std::sqrt(1.0 - abar));
}

ReverseStepResult reverse_step(const Image2D& x_t, int t, const Image2D& eps_hat,
                               const NoiseSchedule& sched, SamplerVariant variant,
                               const GaussianField* inject) {
  sched.require_step(t);
  require_same_shape(x_t, eps_hat, "reverse_step");
  const double alpha = sched.alpha(t);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  const double noise_coef = (1.0 - alpha) / std::sqrt(1.0 - sched.alpha_bar(t));

  if (variant == SamplerVariant::paper_literal) {
    return {affine(x_t, inv_sqrt_alpha, eps_hat.pixels(), noise_coef), variant};
  }

  Image2D out = affine(x_t, inv_sqrt_alpha, eps_hat.pixels(), -noise_coef * inv_sqrt_alpha);
  if (inject != nullptr && t > 1) {
    require_field_shape(x_t, *inject, "reverse_step");
    simd::saxpy(static_cast<float>(std::sqrt(sched.beta(t))), inject->samples, out.pixels());
  }
  return {std::move(out), variant};
}

DenoiseResult denoise_from(const Image2D& x_noisy, int t_start, const NoisePredictor& predictor,
                           const NoiseSchedule& sched, const DenoiseOptions& options) {
  sched.require_step(t_start);
  DenoiseResult result{x_noisy, options.variant, 0};
  for (int t = t_start; t >= 1; --t) {
    Image2D eps_hat;
    try {
      eps_hat = predictor(result.image, t);
    } catch (const PredictorError&) {
      throw;
    } catch (const std::exception& e) {
      throw PredictorError(t, e.what());
    }
    if (!eps_hat.same_shape(result.image)) throw PredictorError(t, "prediction shape mismatch");
    if (!eps_hat.all_finite()) throw PredictorError(t, "prediction contains non-finite values");

    GaussianField z;
    const GaussianField* inject = nullptr;
    if (options.inject_noise && options.variant == SamplerVariant::standard_posterior && t > 1) {
      z = gaussian_field(options.noise_seed, static_cast<std::uint64_t>(t), x_noisy.width(),
                         x_noisy.height());
      inject = &z;
    }
    result.image = reverse_step(result.image, t, eps_hat, sched, options.variant, inject).image;
    ++result.steps_run;
  }
  return result;
}

}  // namespace usdiff
