#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "usdiff/diffusion.hpp"
#include "usdiff/formats.hpp"
#include "usdiff/image.hpp"
#include "usdiff/unet.hpp"

namespace usdiff {

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d eps_hat
};

/// Mean squared error and its gradient 2 (eps_hat - eps) / count.
LossResult mse_loss(const Tensor& eps_hat, const Tensor& eps);

/// Mean absolute error (evaluation only).
double l1_eval(const Tensor& eps_hat, const Tensor& eps);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam update of every weight; increments the step counter
/// and the parameter generation. Throws std::invalid_argument if a weight
/// has no gradient entry or the shapes differ.
void adam_step(UNetParams& params, const TensorTable& grads, double lr, const AdamConfig& adam = {});

struct TrainConfig {
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double lr_gamma = 0.3;
  int lr_step_epochs = 50;
  int epochs = 30;
  std::uint64_t seed = 0;

  void validate() const;
};

/// lr * gamma^floor(epoch / lr_step_epochs), epoch counted from 0.
double lr_schedule(int epoch, const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_mse = 0.0;
  double heldout_l1 = 0.0;  // NaN when no held-out images were given
  double lr = 0.0;
};

struct TrainOptions {
  /// Fine-tuning start point; must match the network configuration.
  const UNetParams* warm_start = nullptr;
  std::vector<Image2D> heldout;
  /// When set, model.ckpt and loss.csv are written here.
  std::filesystem::path out_dir;
  /// Additionally write epoch_NNN.ckpt every this many epochs (0 = never).
  int checkpoint_every = 0;
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
  UNetParams params;
  std::vector<EpochStats> history;
  std::vector<std::filesystem::path> checkpoints;
};

/// Per batch: t ~ U{1..T} per item, eps ~ N(0, I), x_t by forward_jump,
/// minimise MSE(unet(x_t, t), eps) with Adam. Images are mapped to the
/// signed-unit range first; all must share dims compatible with `net`.
TrainResult train(std::span<const Image2D> dataset, const NoiseSchedule& sched, const TrainConfig& cfg,
                  const UNetConfig& net, const TrainOptions& options = {});

// Model files ----------------------------------------------------------------

std::vector<CheckpointEntry> model_to_entries(const UNetParams& params, const UNetConfig& cfg);
std::pair<UNetParams, UNetConfig> model_from_entries(std::span<const CheckpointEntry> entries);
void save_model(const std::filesystem::path& path, const UNetParams& params, const UNetConfig& cfg);
std::pair<UNetParams, UNetConfig> load_model(const std::filesystem::path& path);

/// Throws std::invalid_argument unless `params` has exactly the layout of `cfg`.
void require_layout(const UNetParams& params, const UNetConfig& cfg);

/// `epoch,train_mse,heldout_l1,lr`
void write_loss_csv(const std::filesystem::path& path, std::span<const EpochStats> history);

/// Wraps a copy of the network as a diffusion noise predictor on signed-unit images.
NoisePredictor make_predictor(const UNetParams& params, const UNetConfig& cfg);

}  // namespace usdiff
