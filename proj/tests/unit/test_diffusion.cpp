#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "usdiff/diffusion.hpp"
#include "usdiff/metrics.hpp"

using namespace usdiff;

namespace {

Image2D ramp(std::size_t w, std::size_t h) {
  Image2D img(w, h, ValueRange::signed_unit);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      img.at(x, y) = -0.8f + 1.6f * static_cast<float>(x + y) / static_cast<float>(w + h - 2);
  return img;
}

Image2D field_image(const GaussianField& f) {
  return Image2D(f.width, f.height, f.samples, ValueRange::signed_unit);
}

}  // namespace

TEST_SUITE("diffusion") {
  TEST_CASE("default schedule") {
    const auto s = make_schedule();
    REQUIRE(s.steps() == 300);
    for (int t = 1; t <= 300; ++t) REQUIRE(s.alpha(t) == doctest::Approx(299.0 / 300.0).epsilon(1e-15));
    CHECK(std::abs(s.alpha_bar(300) - 0.36726545577475882) < 1e-12);
    CHECK(s.alpha_bar(300) == doctest::Approx(0.3673).epsilon(1e-4));
  }

  TEST_CASE("single-step schedule") {
    const auto s = make_schedule(1, BetaMode::constant, {0.2, 0.2});
    CHECK(s.alpha_bar(1) == doctest::Approx(0.8));
  }

  TEST_CASE("incremental products match the direct product") {
    const auto s = make_schedule(1000, BetaMode::linear, {1e-4, 0.02});
    long double direct = 1.0L;
    for (int t = 1; t <= 1000; ++t) {
      direct *= 1.0L - static_cast<long double>(s.beta(t));
      REQUIRE(std::abs(s.alpha_bar(t) / static_cast<double>(direct) - 1.0) < 1e-6);
      if (t > 1) REQUIRE(s.alpha_bar(t) < s.alpha_bar(t - 1));
    }
    CHECK(s.beta(1) == doctest::Approx(1e-4));
    CHECK(s.beta(1000) == doctest::Approx(0.02));
  }

  TEST_CASE("invalid schedules are rejected") {
    CHECK_THROWS_AS(make_schedule(0), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, BetaMode::constant, {1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, BetaMode::constant, {0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, BetaMode::linear, {0.1, 1.5}), std::invalid_argument);
    const auto s = make_schedule();
    CHECK_THROWS_AS(s.alpha(0), std::out_of_range);
    CHECK_THROWS_AS(s.alpha(301), std::out_of_range);
  }

  TEST_CASE("forward_step limbs") {
    const auto s = make_schedule();
    Image2D ones(4, 4, ValueRange::signed_unit, 1.0f);
    const auto out = forward_step(ones, 1, s, zero_field(4, 4));
    for (float v : out.pixels()) REQUIRE(v == doctest::Approx(0.998331).epsilon(1e-6));

    const auto eps = gaussian_field(3, 0, 4, 4);
    Image2D zeros(4, 4, ValueRange::signed_unit, 0.0f);
    const auto pure = forward_step(zeros, 5, s, eps);
    for (std::size_t i = 0; i < 16; ++i)
      REQUIRE(pure.data()[i] == doctest::Approx(std::sqrt(1.0 / 300.0) * eps.samples[i]));

    CHECK_THROWS_AS(forward_step(ones, 1, s, zero_field(3, 4)), std::invalid_argument);
    CHECK_THROWS_AS(forward_step(ones, 0, s, zero_field(4, 4)), std::out_of_range);
  }

  TEST_CASE("forward_jump equals repeated zero-noise steps") {
    const auto s = make_schedule();
    const auto x0 = ramp(8, 8);
    Image2D ones(2, 2, ValueRange::signed_unit, 1.0f);
    CHECK(forward_jump(ones, 10, s, zero_field(2, 2)).at(0, 0) == doctest::Approx(0.98344).epsilon(1e-5));
    for (int t : {1, 10, 20, 300}) {
      Image2D x = x0;
      for (int k = 1; k <= t; ++k) x = forward_step(x, k, s, zero_field(8, 8));
      const auto j = forward_jump(x0, t, s, zero_field(8, 8));
      for (std::size_t i = 0; i < x.size(); ++i)
        REQUIRE(std::abs(x.data()[i] - j.data()[i]) <= 1e-5 * std::max(1.0f, std::abs(j.data()[i])));
    }
  }

  TEST_CASE("forward_jump moments over many draws") {
    const auto s = make_schedule();
    Image2D x0(1, 1, ValueRange::signed_unit, 0.4f);
    const int n = 10000;
    for (int t : {10, 20, 300}) {
      double sum = 0, sum2 = 0;
      for (int k = 0; k < n; ++k) {
        const double v = forward_jump(x0, t, s, gaussian_field(17, k, 1, 1)).at(0, 0);
        sum += v;
        sum2 += v * v;
      }
      const double mean = sum / n;
      const double var = (sum2 - n * mean * mean) / (n - 1);
      const double ab = s.alpha_bar(t);
      CHECK(std::abs(mean - std::sqrt(ab) * 0.4) < 3.0 * std::sqrt((1 - ab) / n));
      CHECK(std::abs(var / (1 - ab) - 1.0) < 0.05);
    }
  }

  TEST_CASE("signal coefficient decreases with t") {
    const auto s = make_schedule();
    for (int t = 2; t <= 300; ++t) REQUIRE(std::sqrt(s.alpha_bar(t)) < std::sqrt(s.alpha_bar(t - 1)));
  }

  TEST_CASE("reverse_step variants") {
    const auto s = make_schedule();
    const auto x = ramp(4, 4);
    Image2D zero(4, 4, ValueRange::signed_unit, 0.0f);
    const auto lit = reverse_step(x, 5, zero, s, SamplerVariant::paper_literal);
    CHECK(lit.variant == SamplerVariant::paper_literal);
    for (std::size_t i = 0; i < 16; ++i)
      REQUIRE(lit.image.data()[i] == doctest::Approx(x.data()[i] / std::sqrt(299.0 / 300.0)));

    Image2D ones(2, 2, ValueRange::signed_unit, 1.0f);
    const double a = 299.0 / 300.0;
    const double expect = 1.0 / std::sqrt(a) + (1.0 - a) / std::sqrt(1.0 - s.alpha_bar(20));
    const auto r20 = reverse_step(ones, 20, ones, s, SamplerVariant::paper_literal);
    CHECK(r20.image.at(1, 1) == doctest::Approx(expect).epsilon(1e-6));

    // t = 1 inversion with the exact noise.
    const auto eps = gaussian_field(8, 1, 4, 4);
    const auto xt = forward_jump(x, 1, s, eps);
    const auto inv = reverse_step(xt, 1, field_image(eps), s, SamplerVariant::standard_posterior);
    for (std::size_t i = 0; i < 16; ++i) REQUIRE(std::abs(inv.image.data()[i] - x.data()[i]) < 1e-5);

    // Injection is suppressed at t = 1 and applied otherwise.
    const auto z = gaussian_field(9, 1, 4, 4);
    const auto inj1 = reverse_step(xt, 1, field_image(eps), s, SamplerVariant::standard_posterior, &z);
    CHECK(inj1.image.data() == inv.image.data());
    const auto no2 = reverse_step(xt, 2, zero, s, SamplerVariant::standard_posterior);
    const auto inj2 = reverse_step(xt, 2, zero, s, SamplerVariant::standard_posterior, &z);
    CHECK(inj2.image.at(0, 0) == doctest::Approx(no2.image.at(0, 0) + std::sqrt(1.0 / 300.0) * z.samples[0]));

    CHECK_THROWS_AS(reverse_step(x, 1, Image2D(3, 3), s, SamplerVariant::paper_literal), std::invalid_argument);
  }

  TEST_CASE("variant names round-trip") {
    CHECK(parse_variant(variant_name(SamplerVariant::paper_literal)) == SamplerVariant::paper_literal);
    CHECK(parse_variant(variant_name(SamplerVariant::standard_posterior)) == SamplerVariant::standard_posterior);
    CHECK_THROWS(parse_variant("ddim"));
  }

  TEST_CASE("denoise_from single step and call count") {
    const auto s = make_schedule();
    const auto x = ramp(4, 4);
    int calls = 0;
    NoisePredictor zero_pred = [&](const Image2D& xt, int) {
      ++calls;
      return Image2D(xt.width(), xt.height(), ValueRange::signed_unit, 0.0f);
    };
    DenoiseOptions lit;
    lit.variant = SamplerVariant::paper_literal;
    const auto one = denoise_from(x, 1, zero_pred, s, lit);
    CHECK(one.steps_run == 1);
    CHECK(one.image.at(2, 3) == doctest::Approx(x.at(2, 3) / std::sqrt(299.0 / 300.0)));

    calls = 0;
    const auto twenty = denoise_from(x, 20, zero_pred, s, lit);
    CHECK(calls == 20);
    CHECK(twenty.steps_run == 20);
  }

  TEST_CASE("oracle predictor inverts the forward process") {
    const auto s = make_schedule();
    const auto x0 = ramp(16, 16);
    const auto eps = gaussian_field(21, 0, 16, 16);
    for (int t0 : {1, 10, 20}) {
      const auto xt = forward_jump(x0, t0, s, eps);
      // The true noise of x_t relative to x0, recomputed for every intermediate step.
      NoisePredictor oracle = [&](const Image2D& cur, int t) {
        Image2D e(cur.width(), cur.height(), ValueRange::signed_unit);
        const double sa = std::sqrt(s.alpha_bar(t));
        const double sn = std::sqrt(1.0 - s.alpha_bar(t));
        for (std::size_t i = 0; i < cur.size(); ++i)
          e.data()[i] = static_cast<float>((cur.data()[i] - sa * x0.data()[i]) / sn);
        return e;
      };
      const auto out = denoise_from(xt, t0, oracle, s).image;
      if (t0 == 1) {
        for (std::size_t i = 0; i < out.size(); ++i) REQUIRE(std::abs(out.data()[i] - x0.data()[i]) < 1e-4);
      } else {
        CHECK(psnr(x0, out, 2.0) > psnr(x0, xt, 2.0));
      }
    }
  }

  TEST_CASE("predictor failures carry the step") {
    const auto s = make_schedule();
    NoisePredictor bad = [](const Image2D&, int t) -> Image2D {
      if (t == 7) throw std::runtime_error("boom");
      return Image2D(4, 4, ValueRange::signed_unit, 0.0f);
    };
    try {
      denoise_from(ramp(4, 4), 10, bad, s);
      FAIL("expected PredictorError");
    } catch (const PredictorError& e) {
      CHECK(e.step() == 7);
    }
    NoisePredictor wrong = [](const Image2D&, int) { return Image2D(2, 2); };
    CHECK_THROWS_AS(denoise_from(ramp(4, 4), 3, wrong, s), PredictorError);
  }

  TEST_CASE("denoising is deterministic with injection") {
    const auto s = make_schedule();
    NoisePredictor p = [](const Image2D& xt, int) {
      return Image2D(xt.width(), xt.height(), ValueRange::signed_unit, 0.1f);
    };
    DenoiseOptions o;
    o.inject_noise = true;
    o.noise_seed = 4;
    const auto a = denoise_from(ramp(8, 8), 10, p, s, o);
    const auto b = denoise_from(ramp(8, 8), 10, p, s, o);
    CHECK(a.image.data() == b.image.data());
  }
}
