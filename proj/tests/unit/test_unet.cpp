#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "reference_unet.hpp"
#include "usdiff/rng.hpp"
#include "usdiff/training.hpp"
#include "usdiff/unet.hpp"

using namespace usdiff;

namespace {

UNetConfig tiny_config() {
  UNetConfig cfg;
  cfg.base_channels = 4;
  cfg.depth = 1;
  cfg.image_size = 8;
  cfg.time_embed_dim = 8;
  return cfg;
}

Tensor random_tensor(std::vector<std::size_t> dims, std::uint64_t seed) {
  Tensor t(std::move(dims));
  SplitMix64 rng(seed);
  for (float& v : t.values()) v = static_cast<float>(rng.normal());
  return t;
}

// Nonzero biases keep every SiLU away from the origin-symmetric case.
UNetParams perturbed_params(const UNetConfig& cfg, std::uint64_t seed) {
  UNetParams p = init_params(cfg, seed);
  SplitMix64 rng(seed + 100);
  for (auto& [name, t] : p.weights)
    if (name.ends_with(".bias"))
      for (float& v : t.values()) v = static_cast<float>(rng.uniform(-0.2, 0.2));
  return p;
}

}  // namespace

TEST_SUITE("unet") {
  TEST_CASE("time embedding") {
    const auto zero = time_embed(0.0, 8);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(zero[2 * k] == 0.0f);
      CHECK(zero[2 * k + 1] == 1.0f);
    }
    CHECK(time_embed(17, 32) == time_embed(17, 32));
    const auto e = time_embed(300, 32);
    for (std::size_t k = 0; k < 16; ++k) {
      const double f = std::pow(10000.0, 2.0 * k / 32.0);
      CHECK(std::abs(e[2 * k] - std::sin(300.0 / f)) < 1e-6);
      CHECK(std::abs(e[2 * k + 1] - std::cos(300.0 / f)) < 1e-6);
    }
    CHECK_THROWS_AS(time_embed(1, 7), std::invalid_argument);
  }

  TEST_CASE("configuration checks") {
    UNetConfig cfg = tiny_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.image_size = 6;
    cfg.depth = 2;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.time_embed_dim = 5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }

  TEST_CASE("zero parameters give a zero prediction") {
    const auto cfg = tiny_config();
    const auto x = random_tensor({2, 1, 8, 8}, 1);
    const int steps[] = {3, 200};
    const auto y = unet_predict(zero_params(cfg), cfg, x, steps);
    CHECK(std::all_of(y.values().begin(), y.values().end(), [](float v) { return v == 0.0f; }));
  }

  TEST_CASE("output shape equals input shape") {
    UNetConfig cfg;
    cfg.base_channels = 3;
    cfg.depth = 2;
    cfg.image_size = 16;
    const auto p = init_params(cfg, 2);
    for (std::size_t side : {8u, 16u, 24u}) {
      const auto x = random_tensor({1, 1, side, side}, side);
      const int steps[] = {5};
      CHECK(unet_predict(p, cfg, x, steps).dims() == x.dims());
    }
    const auto bad = random_tensor({1, 1, 6, 6}, 3);
    const int steps[] = {5};
    CHECK_THROWS_AS(unet_predict(p, cfg, bad, steps), std::invalid_argument);
    const auto two = random_tensor({2, 1, 8, 8}, 3);
    CHECK_THROWS_AS(unet_predict(p, cfg, two, steps), std::invalid_argument);
  }

  TEST_CASE("forward agrees with the double-precision reference") {
    UNetConfig cfg;
    cfg.base_channels = 4;
    cfg.depth = 2;
    cfg.image_size = 16;
    cfg.time_embed_dim = 8;
    const auto p = perturbed_params(cfg, 4);
    const auto x = random_tensor({1, 1, 16, 16}, 5);
    const int steps[] = {123};
    const auto y = unet_predict(p, cfg, x, steps);
    const auto ref = testing::reference_forward(p, cfg, x, 123);
    for (std::size_t i = 0; i < y.size(); ++i) REQUIRE(std::abs(y[i] - ref[i]) < 1e-5);
  }

  TEST_CASE("analytic gradients match central differences") {
    const auto cfg = tiny_config();
    auto p = perturbed_params(cfg, 3);
    const auto x = random_tensor({1, 1, 8, 8}, 6);
    const auto up = random_tensor({1, 1, 8, 8}, 7);
    const int steps[] = {37};
    const auto fwd = unet_forward(p, cfg, x, steps);
    const auto grads = unet_backward(*fwd.tape, up);
    REQUIRE(grads.size() == p.weights.size());

    auto loss = [&] {
      const auto y = testing::reference_forward(p, cfg, x, 37);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * up[i];
      return s;
    };
    SplitMix64 pick(8);
    for (auto& [name, w] : p.weights) {
      const Tensor& g = grads.at(name);
      REQUIRE(g.dims() == w.dims());
      const std::size_t samples = std::min<std::size_t>(w.size(), 25);
      for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t i = w.size() <= 25 ? s : static_cast<std::size_t>(pick.uniform_int(0, w.size() - 1));
        const float orig = w[i];
        const float delta = 1e-3f;
        w[i] = orig + delta;
        const double lp = loss();
        w[i] = orig - delta;
        const double lm = loss();
        w[i] = orig;
        const double numeric = (lp - lm) / (2.0 * delta);
        const double analytic = g[i];
        const double denom = std::max(std::abs(numeric), std::abs(analytic));
        INFO(name << "[" << i << "] analytic " << analytic << " numeric " << numeric);
        CHECK((denom == 0.0 || std::abs(numeric - analytic) / denom <= 1e-3));
      }
    }
  }

  TEST_CASE("backward is deterministic and zero for zero upstream") {
    const auto cfg = tiny_config();
    const auto p = perturbed_params(cfg, 9);
    const auto x = random_tensor({2, 1, 8, 8}, 10);
    const int steps[] = {1, 300};
    const auto fwd = unet_forward(p, cfg, x, steps);
    const auto up = random_tensor({2, 1, 8, 8}, 11);
    const auto a = unet_backward(*fwd.tape, up);
    const auto b = unet_backward(*fwd.tape, up);
    for (const auto& [name, t] : a) REQUIRE(std::equal(t.values().begin(), t.values().end(), b.at(name).values().begin()));
    const auto z = unet_backward(*fwd.tape, Tensor({2, 1, 8, 8}));
    for (const auto& [name, t] : z)
      REQUIRE(std::all_of(t.values().begin(), t.values().end(), [](float v) { return v == 0.0f; }));
    CHECK_THROWS(unet_backward(*fwd.tape, Tensor({1, 1, 8, 8})));
  }

  TEST_CASE("stale tapes are rejected") {
    const auto cfg = tiny_config();
    auto p = perturbed_params(cfg, 12);
    const auto x = random_tensor({1, 1, 8, 8}, 13);
    const int steps[] = {4};
    const auto fwd = unet_forward(p, cfg, x, steps);
    const auto g = unet_backward(*fwd.tape, x);
    adam_step(p, g, 1e-3);
    CHECK_THROWS_AS(unet_backward(*fwd.tape, x), std::logic_error);
  }

  TEST_CASE("time embedding reaches the output") {
    const auto cfg = tiny_config();
    const auto p = perturbed_params(cfg, 14);
    const auto x = random_tensor({1, 1, 8, 8}, 15);
    const int t1[] = {1};
    const int tT[] = {300};
    const auto a = unet_predict(p, cfg, x, t1);
    const auto b = unet_predict(p, cfg, x, tT);
    CHECK_FALSE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  }

  TEST_CASE("initialisation bounds") {
    const auto cfg = tiny_config();
    const auto p = init_params(cfg, 1);
    for (const auto& [name, t] : p.weights) {
      if (name.ends_with(".bias")) {
        CHECK(std::all_of(t.values().begin(), t.values().end(), [](float v) { return v == 0.0f; }));
        continue;
      }
      std::size_t fan_in = 1;
      for (std::size_t d = 1; d < t.rank(); ++d) fan_in *= t.dim(d);
      const float bound = static_cast<float>(std::sqrt(1.0 / static_cast<double>(fan_in)));
      CHECK(std::all_of(t.values().begin(), t.values().end(), [&](float v) { return std::abs(v) <= bound; }));
    }
  }
}
