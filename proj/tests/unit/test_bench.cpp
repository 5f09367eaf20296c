#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <stdexcept>

#include "usdiff/bench.hpp"
#include "usdiff/formats.hpp"

using namespace usdiff;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const char* name) {
  const fs::path p = fs::path(USDIFF_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

BenchImage blob_image(std::size_t side, double cx, double cy, double r, const std::string& name) {
  BenchImage b{name, Image2D(side, side, ValueRange::unit_interval), std::nullopt};
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) {
      const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
      b.clean.at(x, y) = d < r ? 0.1f : 0.6f + 0.2f * static_cast<float>(std::sin(0.7 * x) * std::cos(0.5 * y));
    }
  b.regions = cyst_region_pair(side, side, cx, cy, r);
  return b;
}

BenchConfig small_config() {
  BenchConfig cfg;
  cfg.methods = {"noisy"};
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_SUITE("bench") {
  TEST_CASE("corruption at t = 0 is a copy") {
    const auto sched = make_schedule();
    const auto img = blob_image(16, 8, 8, 4, "a").clean;
    CHECK(corrupt_image(img, 0, sched, 1).data() == img.data());
    const auto c10 = corrupt_image(img, 10, sched, 1);
    CHECK(c10.range() == img.range());
    CHECK(corrupt_image(img, 10, sched, 1).data() == c10.data());
    CHECK(corrupt_image(img, 10, sched, 2).data() != c10.data());
    CHECK(psnr(img, corrupt_image(img, 20, sched, 1), 1.0) < psnr(img, c10, 1.0));
    CHECK_THROWS(corrupt_image(img, 301, sched, 1));
  }

  TEST_CASE("baseline noise level and rescaling") {
    const auto sched = make_schedule();
    const double ab = sched.alpha_bar(10);
    CHECK(baseline_sigma(sched, 10) == doctest::Approx(std::sqrt((1 - ab) / ab) / 2));
    Image2D noisy(2, 1, std::vector<float>{0.5f, 1.0f}, ValueRange::unit_interval);
    const auto u = undo_signal_scaling(noisy, 10, sched);
    CHECK(u.range() == ValueRange::unit_interval);
    CHECK(u.at(0, 0) == doctest::Approx(0.5));
    CHECK(u.at(1, 0) == doctest::Approx((1.0 / std::sqrt(ab) + 1.0) / 2.0));
    CHECK(parse_baseline("nlm") == BaselineMethod::nlm);
    CHECK(parse_baseline("bm3d") == BaselineMethod::bm3d);
    CHECK_THROWS_AS(parse_baseline("wiener"), std::invalid_argument);
  }

  TEST_CASE("classical baselines improve on the noisy input") {
    const auto sched = make_schedule();
    const auto img = blob_image(32, 16, 16, 7, "a").clean;
    const auto noisy = corrupt_image(img, 10, sched, 4);
    const double base = psnr(img, noisy, 1.0);
    const auto nlm = baseline_at_step(noisy, 10, BaselineMethod::nlm, sched);
    const auto bm3d = baseline_at_step(noisy, 10, BaselineMethod::bm3d, sched);
    CHECK(psnr(img, nlm, 1.0) > base + 1.0);
    CHECK(psnr(img, bm3d, 1.0) > base + 1.0);
    for (float v : bm3d.pixels()) REQUIRE((v >= 0.0f && v <= 1.0f));
  }

  TEST_CASE("ddpm path clamps and reports predictor failures") {
    const auto sched = make_schedule();
    const auto img = blob_image(16, 8, 8, 4, "a").clean;
    NoisePredictor zero = [](const Image2D& x, int) { return Image2D(x.width(), x.height(), ValueRange::signed_unit); };
    const auto out = ddpm_at_step(corrupt_image(img, 10, sched, 1), 10, zero, sched, {});
    CHECK(out.range() == ValueRange::unit_interval);
    for (float v : out.pixels()) REQUIRE((v >= 0.0f && v <= 1.0f));
  }

  TEST_CASE("config validation") {
    BenchConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.t_starts = {0};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.t_starts = {301};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.methods = {};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.methods = {"noisy", "wavelet"};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.methods = {"nlm", "nlm"};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.dataset_source = "directory";
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.test_count = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }

  TEST_CASE("config JSON round trip and strictness") {
    BenchConfig cfg;
    cfg.seed = 99;
    cfg.t_starts = {5, 15};
    cfg.methods = {"noisy", "bm3d"};
    cfg.sampler_variant = SamplerVariant::paper_literal;
    cfg.psnr_formula = PsnrFormula::paper_literal;
    cfg.phantom.cysts.push_back({20, 30, 6, 0.5});
    cfg.phantom.bmode.das.apodization = Apodization::rectangular;
    const auto j = to_json(cfg);
    const auto back = bench_config_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.seed == 99);
    CHECK(back.phantom.cysts.at(0).radius == 6.0);
    CHECK(back.phantom.bmode.das.apodization == Apodization::rectangular);

    CHECK(bench_config_from_json(parse_json_text("{}")).t_starts == std::vector<int>{10, 20});
    CHECK_THROWS_AS(bench_config_from_json(parse_json_text(R"({"seeds": 1})")), std::invalid_argument);
    CHECK_THROWS_AS(bench_config_from_json(parse_json_text(R"({"seed": "one"})")), std::invalid_argument);
    CHECK_THROWS_AS(bench_config_from_json(parse_json_text(R"({"t_starts": 10})")), std::invalid_argument);
    CHECK_THROWS_AS(bench_config_from_json(parse_json_text(R"({"phantom": {"width": 64, "depth": 3}})")),
                    std::invalid_argument);
    CHECK_THROWS_AS(bench_config_from_json(parse_json_text(R"({"sampler_variant": "ddim"})")), std::invalid_argument);
    CHECK_THROWS_AS(parse_json_text("{\"seed\": "), std::invalid_argument);
    CHECK_THROWS_AS(bench_config_from_json(parse_json_text("[1, 2]")), std::invalid_argument);
  }

  TEST_CASE("phantom spec JSON round trip") {
    PhantomSpec s;
    s.width = 48;
    s.seed = 12;
    s.angles = {-0.1, 0.0, 0.1};
    s.geometry.element_count = 64;
    const auto back = phantom_spec_from_json(to_json(s));
    CHECK(back.width == 48);
    CHECK(back.seed == 12);
    CHECK(back.angles == s.angles);
    CHECK(back.geometry.element_count == 64);
    CHECK(to_json(back) == to_json(s));
  }

  TEST_CASE("noisy row falls as t grows") {
    std::vector<BenchImage> imgs{blob_image(32, 16, 16, 8, "a"), blob_image(32, 12, 18, 7, "b")};
    BenchConfig cfg = small_config();
    cfg.t_starts = {20, 5, 10};
    const auto r = run_bench(cfg, imgs);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].t_start == 5);
    CHECK(r.rows[0].psnr_db > r.rows[1].psnr_db);
    CHECK(r.rows[1].psnr_db > r.rows[2].psnr_db);
    for (const auto& row : r.rows) {
      CHECK(row.psnr_per_image.size() == 2);
      REQUIRE(row.gcnr_per_image.size() == 2);
      CHECK((row.gcnr_percent >= 0 && row.gcnr_percent <= 100));
      CHECK(row.gcnr_percent == doctest::Approx((row.gcnr_per_image[0] + row.gcnr_per_image[1]) / 2));
    }
    const auto again = run_bench(cfg, imgs);
    CHECK(again.to_csv() == r.to_csv());
  }

  TEST_CASE("bench metadata records the protocol") {
    std::vector<BenchImage> imgs{blob_image(32, 16, 16, 8, "a")};
    BenchConfig cfg = small_config();
    cfg.methods = {"noisy", "ddpm"};
    NoisePredictor zero = [](const Image2D& x, int) { return Image2D(x.width(), x.height(), ValueRange::signed_unit); };
    const auto r = run_bench(cfg, imgs, &zero);
    auto value = [&](const std::string& key) {
      for (const auto& [k, v] : r.metadata)
        if (k == key) return v;
      return std::string("<missing>");
    };
    CHECK(value("sampler_variant") == "standard-posterior");
    CHECK(value("psnr_formula") == "standard");
    CHECK(value("seed") == "3");
    CHECK(value("gcnr_bins") == "64");
    CHECK(r.find("ddpm", 20) != nullptr);

    const auto dir = scratch("bench_report");
    write_report(dir, r, cfg);
    for (const char* f : {"report.csv", "report_per_image.csv", "report.md", "config.json"}) CHECK(fs::exists(dir / f));
    const auto text = read_file_bytes(dir / "config.json");
    CHECK_NOTHROW(bench_config_from_json(parse_json_text(std::string(text.begin(), text.end()))));
  }

  TEST_CASE("bench failures") {
    std::vector<BenchImage> imgs{blob_image(32, 16, 16, 8, "a")};
    BenchConfig cfg = small_config();
    CHECK_THROWS_AS(run_bench(cfg, {}), std::invalid_argument);
    cfg.methods = {"ddpm"};
    CHECK_THROWS_AS(run_bench(cfg, imgs), std::invalid_argument);
    NoisePredictor nan = [](const Image2D& x, int) {
      return Image2D(x.width(), x.height(), ValueRange::signed_unit, std::numeric_limits<float>::quiet_NaN());
    };
    CHECK_THROWS_AS(run_bench(cfg, imgs, &nan), PredictorError);
    cfg.checkpoint = (fs::path(USDIFF_TEST_TMP) / "no_such.ckpt").string();
    CHECK_THROWS_AS(run_bench(cfg, imgs), FormatError);
  }

  TEST_CASE("phantom test images carry cyst regions") {
    BenchConfig cfg = small_config();
    cfg.test_count = 2;
    cfg.phantom.width = 48;
    cfg.phantom.height = 48;
    cfg.phantom.angles = {-0.05, 0.0, 0.05};
    const auto imgs = load_bench_images(cfg);
    REQUIRE(imgs.size() == 2);
    for (const auto& im : imgs) {
      CHECK(im.clean.width() == 48);
      REQUIRE(im.regions.has_value());
      CHECK(im.regions->first.count() >= kMinMaskPixels);
    }
    CHECK(imgs[0].clean.data() != imgs[1].clean.data());
    CHECK(load_bench_images(cfg)[1].clean.data() == imgs[1].clean.data());
  }

  TEST_CASE("directory test images") {
    const auto dir = scratch("bench_dir");
    write_pgm(dir / "b.pgm", Image2D(8, 8, ValueRange::eight_bit, 100.0f));
    write_pgm(dir / "a.pgm", Image2D(8, 8, ValueRange::eight_bit, 50.0f));
    BenchConfig cfg = small_config();
    cfg.dataset_source = "directory";
    cfg.image_dir = dir.string();
    const auto imgs = load_bench_images(cfg);
    REQUIRE(imgs.size() == 2);
    CHECK(imgs[0].clean.range() == ValueRange::unit_interval);
    CHECK(imgs[0].clean.at(0, 0) == doctest::Approx(50.0 / 255.0));
    CHECK_FALSE(imgs[0].regions.has_value());
  }

  TEST_CASE("phantom patches tile each image") {
    PhantomSpec base;
    base.width = 32;
    base.height = 32;
    base.angles = {0.0};
    const auto tiles = phantom_patches(base, 1, Split::train, 2, 16);
    CHECK(tiles.size() == 8);
    for (const auto& t : tiles) CHECK(t.width() == 16);
  }
}
