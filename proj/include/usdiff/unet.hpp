#pragma once
// Noise-prediction network: a small U-Net with a sinusoidal time embedding.
//
// Topology for depth D and base width C (level l has C * 2^l channels):
//
//   enc_l : conv3x3 -> +temb_l -> SiLU -> conv3x3 -> SiLU      (kept as skip_l)
//   down_l: conv3x3 stride 2
//   mid   : same as an encoder block at C * 2^D channels
//   up_l  : nearest 2x upsample -> conv3x3 to C * 2^l channels
//   dec_l : concat(up_l, skip_l) -> conv3x3 -> +temb_l -> SiLU -> conv3x3 -> SiLU
//   out   : conv1x1 back to the input channel count
//
// temb_l is a learned linear map of the time embedding, added as a
// per-channel bias after the block's first convolution.

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "usdiff/tensor.hpp"

namespace usdiff {

struct UNetConfig {
  std::size_t in_channels = 1;
  std::size_t base_channels = 16;
  std::size_t depth = 2;
  std::size_t time_embed_dim = 32;
  std::size_t image_size = 32;

  /// Throws std::invalid_argument when the configuration is unusable.
  void validate() const;
  std::size_t channels_at(std::size_t level) const { return base_channels << level; }
  bool operator==(const UNetConfig&) const = default;
};

using TensorTable = std::map<std::string, Tensor>;

struct UNetParams {
  TensorTable weights;
  TensorTable adam_m;
  TensorTable adam_v;
  std::int64_t adam_step = 0;
  /// Bumped by every update; tapes recorded against an older generation are stale.
  std::uint64_t generation = 0;
};

/// Zero-filled parameter table with the shapes `cfg` requires.
UNetParams zero_params(const UNetConfig& cfg);

/// Uniform in +-sqrt(1 / fan_in) for weights, zero biases.
UNetParams init_params(const UNetConfig& cfg, std::uint64_t seed);

/// e[2k] = sin(t / 10000^(2k/dim)), e[2k+1] = cos(t / 10000^(2k/dim)).
std::vector<float> time_embed(double t, std::size_t dim);

struct UNetTape;

struct ForwardResult {
  Tensor eps_hat;
  std::shared_ptr<const UNetTape> tape;
};

/// x has dims [batch, in_channels, H, W] with H and W divisible by 2^depth;
/// `steps` holds one diffusion step per batch item.
ForwardResult unet_forward(const UNetParams& params, const UNetConfig& cfg, const Tensor& x,
                           std::span<const int> steps);

/// Same as unet_forward but records nothing for backpropagation.
Tensor unet_predict(const UNetParams& params, const UNetConfig& cfg, const Tensor& x,
                    std::span<const int> steps);

/// Exact reverse-mode gradient of sum(dloss_deps_hat * eps_hat) with respect
/// to every weight. Throws std::logic_error if the parameters changed since
/// the tape was recorded.
TensorTable unet_backward(const UNetTape& tape, const Tensor& dloss_deps_hat);

}  // namespace usdiff
