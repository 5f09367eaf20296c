#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "usdiff/metrics.hpp"
#include "usdiff/rng.hpp"

using namespace usdiff;

namespace {

// Left half "inside", right half "outside".
std::pair<RegionMask, RegionMask> halves(std::size_t w, std::size_t h) {
  RegionMask in(w, h, MaskRole::inside), out(w, h, MaskRole::outside);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) (x < w / 2 ? in : out).set(x, y);
  return {in, out};
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("mse fixtures") {
    Image2D i(2, 2, std::vector<float>{1, 2, 3, 4});
    Image2D k(2, 2, std::vector<float>{1, 2, 3, 0});
    CHECK(mse(i, i) == 0.0);
    CHECK(mse(i, k) == doctest::Approx(4.0));
    CHECK_THROWS_AS(mse(i, Image2D(3, 2)), std::invalid_argument);

    SplitMix64 rng(2);
    Image2D a(37, 29), b(37, 29);
    for (std::size_t n = 0; n < a.size(); ++n) {
      a.data()[n] = static_cast<float>(rng.uniform());
      b.data()[n] = static_cast<float>(rng.uniform());
    }
    double brute = 0;
    for (std::size_t y = 0; y < 29; ++y)
      for (std::size_t x = 0; x < 37; ++x) {
        const double d = static_cast<double>(a.at(x, y)) - b.at(x, y);
        brute += d * d;
      }
    brute /= 37.0 * 29.0;
    CHECK(std::abs(mse(a, b) / brute - 1.0) < 1e-9);
  }

  TEST_CASE("psnr fixtures") {
    Image2D a(4, 4, ValueRange::eight_bit, 100.0f), b(4, 4, ValueRange::eight_bit, 116.0f);
    CHECK(std::isinf(psnr(a, a, 255.0)));
    CHECK(psnr(a, a, 255.0) > 0);
    CHECK(std::abs(psnr(a, b, 255.0) - 24.05) < 0.01);
    CHECK(std::abs(psnr(a, b, 255.0, PsnrFormula::paper_literal) - 10 * std::log10(255.0 / 256.0)) < 1e-9);
    CHECK(psnr(a, b, 255.0, PsnrFormula::paper_literal) == doctest::Approx(-0.017).epsilon(0.02));
    CHECK_THROWS_AS(psnr(a, b, 0.0), std::invalid_argument);
  }

  TEST_CASE("psnr decreases with mse") {
    Image2D ref(8, 8, ValueRange::unit_interval, 0.5f);
    double prev = std::numeric_limits<double>::infinity();
    for (float d : {0.01f, 0.02f, 0.05f, 0.1f, 0.3f}) {
      Image2D t(8, 8, ValueRange::unit_interval, 0.5f + d);
      const double p = psnr(ref, t, 1.0);
      CHECK(p < prev);
      prev = p;
    }
  }

  TEST_CASE("formula names and peaks") {
    CHECK(parse_formula("standard") == PsnrFormula::standard);
    CHECK(parse_formula(formula_name(PsnrFormula::paper_literal)) == PsnrFormula::paper_literal);
    CHECK_THROWS(parse_formula("log2"));
    CHECK(nominal_peak(ValueRange::unit_interval) == 1.0);
    CHECK(nominal_peak(ValueRange::signed_unit) == 2.0);
    CHECK(nominal_peak(ValueRange::eight_bit) == 255.0);
  }

  TEST_CASE("gcnr of one population is near zero") {
    SplitMix64 rng(3);
    Image2D img(200, 100);
    for (float& v : img.pixels()) v = static_cast<float>(rng.uniform());
    const auto [in, out] = halves(200, 100);
    CHECK(gcnr(img, in, out) <= 0.1);
  }

  TEST_CASE("gcnr of disjoint ranges is one") {
    Image2D img(16, 16);
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) img.at(x, y) = x < 8 ? 0.1f + 0.01f * y : 0.8f + 0.01f * y;
    const auto [in, out] = halves(16, 16);
    CHECK(gcnr(img, in, out) == 1.0);
  }

  TEST_CASE("gcnr of half-overlapping uniforms") {
    SplitMix64 rng(4);
    Image2D img(200, 100);
    for (std::size_t y = 0; y < 100; ++y)
      for (std::size_t x = 0; x < 200; ++x)
        img.at(x, y) = static_cast<float>(x < 100 ? rng.uniform(0.0, 1.0) : rng.uniform(0.5, 1.5));
    const auto [in, out] = halves(200, 100);
    const double g = gcnr(img, in, out, 64);
    CHECK(std::abs(g - 0.5) <= 0.05);
    // Symmetric in the regions and invariant under affine maps.
    CHECK(gcnr(img, out, in, 64) == doctest::Approx(g));
    Image2D scaled = img;
    for (float& v : scaled.pixels()) v = 3.0f * v - 7.0f;
    CHECK(gcnr(scaled, in, out, 64) == doctest::Approx(g).epsilon(1e-6));
  }

  TEST_CASE("gcnr preconditions") {
    Image2D img(16, 16);
    const auto [in, out] = halves(16, 16);
    CHECK_THROWS_AS(gcnr(img, in, out, 8), std::invalid_argument);
    CHECK_THROWS_AS(gcnr(img, in, in), std::invalid_argument);
    RegionMask tiny(16, 16, MaskRole::inside);
    for (std::size_t x = 0; x < 5; ++x) tiny.set(x, 0);
    CHECK_THROWS_AS(gcnr(img, tiny, out), std::invalid_argument);
    CHECK_THROWS_AS(gcnr(Image2D(8, 8), in, out), std::invalid_argument);
    CHECK(gcnr(img, in, out) == 0.0);
  }

  TEST_CASE("cyst region pair") {
    const auto [in, out] = cyst_region_pair(64, 64, 32, 32, 10, 2);
    for (std::size_t i = 0; i < in.bits.size(); ++i) REQUIRE(!(in.bits[i] && out.bits[i]));
    CHECK(in.count() == doctest::Approx(3.14159 * 64).epsilon(0.1));
    CHECK(out.count() == doctest::Approx(3.14159 * 100).epsilon(0.1));
    CHECK(in.test(32, 32));
    CHECK_FALSE(out.test(32, 32));
    CHECK(out.test(32 + 13, 32));
  }

  TEST_CASE("report layout") {
    MetricsReport r;
    r.rows.push_back({"ddpm", 10, 26.9, 88.7, {26.9}, {88.7}});
    r.rows.push_back({"noisy", 20, 17.9, 59.6, {17.9}, {59.6}});
    r.rows.push_back({"noisy", 10, 20.9, 69.8, {20.9}, {69.8}});
    r.rows.push_back({"nlm", 10, 26.4, std::numeric_limits<double>::quiet_NaN(), {26.4}, {}});
    r.metadata.push_back({"seed", "1"});
    r.sort_rows();
    CHECK(r.rows[0].method == "noisy");
    CHECK(r.rows[0].t_start == 10);
    CHECK(r.rows[1].t_start == 20);
    CHECK(r.rows[2].method == "nlm");
    CHECK(r.rows[3].method == "ddpm");
    REQUIRE(r.find("noisy", 20) != nullptr);
    CHECK(r.find("bm3d", 10) == nullptr);

    const std::string csv = r.to_csv();
    CHECK(csv.rfind("method,t_start,psnr_db,gcnr_percent\n", 0) == 0);
    CHECK(csv.find("noisy,10,") != std::string::npos);
    CHECK(r.per_image_csv().rfind("method,t_start,image,psnr_db,gcnr_percent\n", 0) == 0);

    const std::string md = r.to_markdown();
    CHECK(md.find("Noisy Image") != std::string::npos);
    CHECK(md.find("OURS") != std::string::npos);
    CHECK(md.find("T=10") != std::string::npos);
    CHECK(md.find("T=20") != std::string::npos);
    CHECK(md.find("seed") != std::string::npos);
    CHECK(display_name("bm3d") == "BM3D");
  }
}
