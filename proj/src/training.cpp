#include "usdiff/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

#include "usdiff/rng.hpp"
#include "usdiff/simd.hpp"

namespace usdiff {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_dims(b)) {
    throw std::invalid_argument(std::string(what) + ": shape " + a.shape_string() + " vs " + b.shape_string());
  }
}

}  // namespace

LossResult mse_loss(const Tensor& eps_hat, const Tensor& eps) {
  require_same(eps_hat, eps, "mse_loss");
  LossResult r;
  r.grad = Tensor(eps_hat.dims());
  const std::size_t n = eps_hat.size();
  if (n == 0) return r;
  r.loss = simd::sum_sq_diff(eps_hat.values(), eps.values()) / static_cast<double>(n);
  const float scale = 2.0f / static_cast<float>(n);
  simd::axpby(scale, eps_hat.values(), -scale, eps.values(), r.grad.values());
  return r;
}

double l1_eval(const Tensor& eps_hat, const Tensor& eps) {
  require_same(eps_hat, eps, "l1_eval");
  if (eps_hat.size() == 0) return 0.0;
  return simd::sum_abs_diff(eps_hat.values(), eps.values()) / static_cast<double>(eps_hat.size());
}

void adam_step(UNetParams& params, const TensorTable& grads, double lr, const AdamConfig& adam) {
  for (const auto& [name, w] : params.weights) {
    auto it = grads.find(name);
    if (it == grads.end()) throw std::invalid_argument("adam_step: no gradient for '" + name + "'");
    require_same(w, it->second, "adam_step");
  }
  params.adam_step += 1;
  const double k = static_cast<double>(params.adam_step);
  const double correction1 = 1.0 - std::pow(adam.beta1, k);
  const double correction2 = 1.0 - std::pow(adam.beta2, k);
  for (auto& [name, w] : params.weights) {
    const Tensor& g = grads.at(name);
    Tensor& m = params.adam_m.try_emplace(name, w.dims()).first->second;
    Tensor& v = params.adam_v.try_emplace(name, w.dims()).first->second;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double mi = adam.beta1 * m[i] + (1.0 - adam.beta1) * gi;
      const double vi = adam.beta2 * v[i] + (1.0 - adam.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      w[i] = static_cast<float>(w[i] - lr * m_hat / (std::sqrt(v_hat) + adam.epsilon));
    }
  }
  params.generation += 1;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(lr > 0)) throw std::invalid_argument("train: lr must be positive");
  if (!(lr_gamma > 0 && lr_gamma <= 1)) throw std::invalid_argument("train: lr_gamma must be in (0, 1]");
  if (lr_step_epochs < 1) throw std::invalid_argument("train: lr_step_epochs must be >= 1");
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw std::invalid_argument("lr_schedule: negative epoch");
  return cfg.lr * std::pow(cfg.lr_gamma, epoch / cfg.lr_step_epochs);
}

void require_layout(const UNetParams& params, const UNetConfig& cfg) {
  const UNetParams ref = zero_params(cfg);
  if (ref.weights.size() != params.weights.size()) {
    throw std::invalid_argument("checkpoint/config mismatch: " + std::to_string(params.weights.size()) +
                                " tensors, configuration needs " + std::to_string(ref.weights.size()));
  }
  for (const auto& [name, t] : ref.weights) {
    auto it = params.weights.find(name);
    if (it == params.weights.end()) throw std::invalid_argument("checkpoint/config mismatch: missing '" + name + "'");
    if (!it->second.same_dims(t)) {
      throw std::invalid_argument("checkpoint/config mismatch: '" + name + "' is " + it->second.shape_string() +
                                  ", configuration needs " + t.shape_string());
    }
  }
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348;
constexpr std::uint64_t kStepStream = 0x5354;
constexpr std::uint64_t kNoiseStream = 0x4E4F;
constexpr std::uint64_t kHeldoutStream = 0x484F;

std::vector<Image2D> prepare(std::span<const Image2D> images, const UNetConfig& net, const char* what) {
  std::vector<Image2D> out;
  out.reserve(images.size());
  const std::size_t unit = std::size_t{1} << net.depth;
  for (const auto& img : images) {
    if (!out.empty() && !img.same_shape(out.front())) {
      throw std::invalid_argument(std::string(what) + ": images differ in size");
    }
    if (img.width() % unit != 0 || img.height() % unit != 0 || img.empty()) {
      throw std::invalid_argument(std::string(what) + ": image size not divisible by 2^depth");
    }
    out.push_back(convert_range(img, ValueRange::signed_unit));
  }
  return out;
}

struct Batch {
  Tensor x;
  Tensor eps;
  std::vector<int> steps;
};

Batch make_batch(std::span<const Image2D* const> images, std::span<const int> steps,
                 std::span<const std::uint64_t> noise_ids, std::uint64_t noise_seed,
                 const NoiseSchedule& sched) {
  const std::size_t w = images.front()->width();
  const std::size_t h = images.front()->height();
  const std::size_t n = images.size();
  Batch b{Tensor({n, 1, h, w}), Tensor({n, 1, h, w}), std::vector<int>(steps.begin(), steps.end())};
  for (std::size_t i = 0; i < n; ++i) {
    GaussianField eps = gaussian_field(noise_seed, noise_ids[i], w, h);
    const Image2D xt = forward_jump(*images[i], steps[i], sched, eps);
    std::copy(xt.data().begin(), xt.data().end(), b.x.data() + i * w * h);
    std::copy(eps.samples.begin(), eps.samples.end(), b.eps.data() + i * w * h);
  }
  return b;
}

}  // namespace

TrainResult train(std::span<const Image2D> dataset, const NoiseSchedule& sched, const TrainConfig& cfg,
                  const UNetConfig& net, const TrainOptions& options) {
  cfg.validate();
  net.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  const std::vector<Image2D> train_set = prepare(dataset, net, "train");
  const std::vector<Image2D> heldout = prepare(options.heldout, net, "held-out set");

  TrainResult result;
  if (options.warm_start) {
    require_layout(*options.warm_start, net);
    result.params.weights = options.warm_start->weights;
  } else {
    result.params = init_params(net, cfg.seed);
  }

  const std::uint64_t noise_seed = derive_seed(cfg.seed, kNoiseStream);
  const std::uint64_t heldout_seed = derive_seed(cfg.seed, kHeldoutStream);

  // Fixed evaluation draw: one (t, eps) per held-out image for the whole run.
  std::vector<int> heldout_steps(heldout.size());
  {
    SplitMix64 rng(heldout_seed);
    for (int& t : heldout_steps) t = static_cast<int>(rng.uniform_int(1, sched.steps()));
  }

  auto heldout_l1 = [&]() {
    if (heldout.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    for (std::size_t start = 0; start < heldout.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, heldout.size() - start);
      std::vector<const Image2D*> imgs;
      std::vector<std::uint64_t> ids;
      for (std::size_t i = 0; i < n; ++i) {
        imgs.push_back(&heldout[start + i]);
        ids.push_back(start + i);
      }
      const Batch b = make_batch(imgs, std::span(heldout_steps).subspan(start, n), ids, heldout_seed, sched);
      const Tensor pred = unet_predict(result.params, net, b.x, b.steps);
      total += l1_eval(pred, b.eps) * static_cast<double>(n);
    }
    return total / static_cast<double>(heldout.size());
  };

  SplitMix64 shuffle_rng(derive_seed(cfg.seed, kShuffleStream));
  SplitMix64 step_rng(derive_seed(cfg.seed, kStepStream));
  std::uint64_t noise_counter = 0;
  std::vector<std::size_t> order(train_set.size());

  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
      std::swap(order[i - 1], order[j]);
    }

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      std::vector<const Image2D*> imgs;
      std::vector<int> steps;
      std::vector<std::uint64_t> ids;
      for (std::size_t i = 0; i < n; ++i) {
        imgs.push_back(&train_set[order[start + i]]);
        steps.push_back(static_cast<int>(step_rng.uniform_int(1, sched.steps())));
        ids.push_back(noise_counter++);
      }
      const Batch b = make_batch(imgs, steps, ids, noise_seed, sched);
      ForwardResult fwd = unet_forward(result.params, net, b.x, b.steps);
      const LossResult loss = mse_loss(fwd.eps_hat, b.eps);
      if (!std::isfinite(loss.loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch + 1));
      }
      const TensorTable grads = unet_backward(*fwd.tape, loss.grad);
      fwd.tape.reset();
      adam_step(result.params, grads, lr);
      loss_sum += loss.loss * static_cast<double>(n);
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_mse = loss_sum / static_cast<double>(order.size());
    stats.heldout_l1 = heldout_l1();
    stats.lr = lr;
    result.history.push_back(stats);
    if (options.on_epoch) options.on_epoch(stats);

    if (!options.out_dir.empty() && options.checkpoint_every > 0 && (epoch + 1) % options.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03d.ckpt", epoch + 1);
      save_model(options.out_dir / name, result.params, net);
      result.checkpoints.push_back(options.out_dir / name);
    }
  }

  if (!options.out_dir.empty()) {
    save_model(options.out_dir / "model.ckpt", result.params, net);
    result.checkpoints.push_back(options.out_dir / "model.ckpt");
    write_loss_csv(options.out_dir / "loss.csv", result.history);
  }
  return result;
}

// Model files ----------------------------------------------------------------

namespace {
constexpr const char* kConfigEntry = "meta.unet_config";
constexpr const char* kAdamStepEntry = "adam.step";
}  // namespace

std::vector<CheckpointEntry> model_to_entries(const UNetParams& params, const UNetConfig& cfg) {
  std::vector<CheckpointEntry> entries;
  entries.push_back({kConfigEntry, Tensor({5}, std::vector<float>{
                                                   static_cast<float>(cfg.in_channels),
                                                   static_cast<float>(cfg.base_channels),
                                                   static_cast<float>(cfg.depth),
                                                   static_cast<float>(cfg.time_embed_dim),
                                                   static_cast<float>(cfg.image_size)})});
  for (const auto& [name, t] : params.weights) entries.push_back({"w." + name, t});
  for (const auto& [name, t] : params.adam_m) entries.push_back({"adam.m." + name, t});
  for (const auto& [name, t] : params.adam_v) entries.push_back({"adam.v." + name, t});
  entries.push_back({kAdamStepEntry, Tensor({1}, std::vector<float>{static_cast<float>(params.adam_step)})});
  return entries;
}

std::pair<UNetParams, UNetConfig> model_from_entries(std::span<const CheckpointEntry> entries) {
  UNetConfig cfg;
  bool have_cfg = false;
  UNetParams params;
  for (const auto& e : entries) {
    const std::string& n = e.name;
    if (n == kConfigEntry) {
      if (e.tensor.size() != 5) throw ValueError("model: malformed configuration entry");
      for (float v : e.tensor.values()) {
        if (!(v >= 1 && v == std::floor(v))) throw ValueError("model: malformed configuration entry");
      }
      cfg.in_channels = static_cast<std::size_t>(e.tensor[0]);
      cfg.base_channels = static_cast<std::size_t>(e.tensor[1]);
      cfg.depth = static_cast<std::size_t>(e.tensor[2]);
      cfg.time_embed_dim = static_cast<std::size_t>(e.tensor[3]);
      cfg.image_size = static_cast<std::size_t>(e.tensor[4]);
      have_cfg = true;
    } else if (n == kAdamStepEntry) {
      if (e.tensor.size() != 1) throw ValueError("model: malformed adam step entry");
      params.adam_step = static_cast<std::int64_t>(e.tensor[0]);
    } else if (n.starts_with("w.")) {
      params.weights.emplace(n.substr(2), e.tensor);
    } else if (n.starts_with("adam.m.")) {
      params.adam_m.emplace(n.substr(7), e.tensor);
    } else if (n.starts_with("adam.v.")) {
      params.adam_v.emplace(n.substr(7), e.tensor);
    } else {
      throw ValueError("model: unexpected entry '" + n + "'");
    }
  }
  if (!have_cfg) throw ValueError("model: checkpoint has no network configuration");
  try {
    cfg.validate();
    require_layout(params, cfg);
  } catch (const std::invalid_argument& e) {
    throw ValueError(std::string("model: ") + e.what());
  }
  return {std::move(params), cfg};
}

void save_model(const std::filesystem::path& path, const UNetParams& params, const UNetConfig& cfg) {
  const auto entries = model_to_entries(params, cfg);
  write_checkpoint(path, entries);
}

std::pair<UNetParams, UNetConfig> load_model(const std::filesystem::path& path) {
  const auto entries = read_checkpoint(path);
  return model_from_entries(entries);
}

void write_loss_csv(const std::filesystem::path& path, std::span<const EpochStats> history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "epoch,train_mse,heldout_l1,lr\n";
  char line[160];
  for (const auto& s : history) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g\n", s.epoch, s.train_mse, s.heldout_l1, s.lr);
    out << line;
  }
}

NoisePredictor make_predictor(const UNetParams& params, const UNetConfig& cfg) {
  auto owned = std::make_shared<const UNetParams>(params);
  return [owned, cfg](const Image2D& x_t, int t) {
    Tensor x({1, 1, x_t.height(), x_t.width()}, x_t.data());
    const int steps[1] = {t};
    Tensor y = unet_predict(*owned, cfg, x, steps);
    return Image2D(x_t.width(), x_t.height(), std::vector<float>(y.values().begin(), y.values().end()),
                   x_t.range());
  };
}

}  // namespace usdiff
