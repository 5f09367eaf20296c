#include "usdiff/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "usdiff/formats.hpp"
#include "usdiff/rng.hpp"
#include "usdiff/training.hpp"

namespace usdiff {

using nlohmann::json;

namespace {

constexpr std::uint64_t kCorruptLabel = 0xC0227;
constexpr std::uint64_t kInjectLabel = 0xDD93;

std::uint64_t draw_index(std::size_t image, int t) { return (static_cast<std::uint64_t>(image) << 16) | static_cast<std::uint64_t>(t); }

[[noreturn]] void bad(const std::string& where, const std::string& msg) {
  throw std::invalid_argument("config: " + where + ": " + msg);
}

void check_keys(const json& j, std::initializer_list<std::string_view> keys, const std::string& where) {
  if (!j.is_object()) bad(where, "expected an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) bad(where, "unknown key '" + k + "'");
  }
}

const json* field(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

void read(const json& j, const char* key, double& out, const std::string& where) {
  if (const json* v = field(j, key)) {
    if (!v->is_number()) bad(where, std::string(key) + " must be a number");
    out = v->get<double>();
  }
}

void read(const json& j, const char* key, bool& out, const std::string& where) {
  if (const json* v = field(j, key)) {
    if (!v->is_boolean()) bad(where, std::string(key) + " must be true or false");
    out = v->get<bool>();
  }
}

void read(const json& j, const char* key, std::string& out, const std::string& where) {
  if (const json* v = field(j, key)) {
    if (!v->is_string()) bad(where, std::string(key) + " must be a string");
    out = v->get<std::string>();
  }
}

template <class Int>
Int as_int(const json& v, const std::string& what, const std::string& where) {
  if (!v.is_number_integer()) bad(where, what + " must be an integer");
  if constexpr (std::is_unsigned_v<Int>) {
    if (!v.is_number_unsigned()) bad(where, what + " must be non-negative");
    return static_cast<Int>(v.get<std::uint64_t>());
  } else {
    return static_cast<Int>(v.get<std::int64_t>());
  }
}

template <class Int>
  requires std::is_integral_v<Int>
void read(const json& j, const char* key, Int& out, const std::string& where) {
  if (const json* v = field(j, key)) out = as_int<Int>(*v, key, where);
}

std::string_view apodization_name(Apodization a) { return a == Apodization::hann ? "hann" : "rectangular"; }

Apodization parse_apodization(std::string_view s) {
  if (s == "hann") return Apodization::hann;
  if (s == "rectangular") return Apodization::rectangular;
  throw std::invalid_argument("unknown apodization '" + std::string(s) + "'");
}

template <class Fn>
auto rethrow_as_config(const std::string& where, Fn fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    bad(where, e.what());
  }
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// JSON ---------------------------------------------------------------------------

json to_json(const PhantomSpec& s) {
  json cysts = json::array();
  for (const auto& c : s.cysts) {
    cysts.push_back({{"cx", c.cx}, {"cy", c.cy}, {"radius", c.radius}, {"echogenicity", c.echogenicity}});
  }
  return {
      {"width", s.width},
      {"height", s.height},
      {"pixel_size", s.pixel_size},
      {"depth_start", s.depth_start},
      {"scatterer_density", s.scatterer_density},
      {"margin", s.margin},
      {"cysts", cysts},
      {"angles", s.angles},
      {"geometry",
       {{"element_count", s.geometry.element_count},
        {"pitch", s.geometry.pitch},
        {"sampling_rate", s.geometry.sampling_rate},
        {"sound_speed", s.geometry.sound_speed},
        {"center_frequency", s.geometry.center_frequency}}},
      {"pulse", {{"sigma_cycles", s.pulse.sigma_cycles}}},
      {"bmode",
       {{"f_number", s.bmode.das.f_number},
        {"apodization", apodization_name(s.bmode.das.apodization)},
        {"axial_oversample", s.bmode.axial_oversample},
        {"dynamic_range_db", s.bmode.dynamic_range_db}}},
      {"seed", s.seed},
  };
}

PhantomSpec phantom_spec_from_json(const json& j) {
  const std::string w = "phantom";
  check_keys(j, {"width", "height", "pixel_size", "depth_start", "scatterer_density", "margin", "cysts", "angles",
                 "geometry", "pulse", "bmode", "seed"},
             w);
  PhantomSpec s;
  read(j, "width", s.width, w);
  read(j, "height", s.height, w);
  read(j, "pixel_size", s.pixel_size, w);
  read(j, "depth_start", s.depth_start, w);
  read(j, "scatterer_density", s.scatterer_density, w);
  read(j, "margin", s.margin, w);
  read(j, "seed", s.seed, w);
  if (const json* c = field(j, "cysts")) {
    if (!c->is_array()) bad(w, "cysts must be an array");
    s.cysts.clear();
    for (const auto& item : *c) {
      const std::string wc = w + ".cysts";
      check_keys(item, {"cx", "cy", "radius", "echogenicity"}, wc);
      CystSpec cy;
      read(item, "cx", cy.cx, wc);
      read(item, "cy", cy.cy, wc);
      read(item, "radius", cy.radius, wc);
      read(item, "echogenicity", cy.echogenicity, wc);
      s.cysts.push_back(cy);
    }
  }
  if (const json* a = field(j, "angles")) {
    if (!a->is_array()) bad(w, "angles must be an array of radians");
    s.angles.clear();
    for (const auto& v : *a) {
      if (!v.is_number()) bad(w, "angles must be numbers");
      s.angles.push_back(v.get<double>());
    }
  }
  if (const json* g = field(j, "geometry")) {
    const std::string wg = w + ".geometry";
    check_keys(*g, {"element_count", "pitch", "sampling_rate", "sound_speed", "center_frequency"}, wg);
    read(*g, "element_count", s.geometry.element_count, wg);
    read(*g, "pitch", s.geometry.pitch, wg);
    read(*g, "sampling_rate", s.geometry.sampling_rate, wg);
    read(*g, "sound_speed", s.geometry.sound_speed, wg);
    read(*g, "center_frequency", s.geometry.center_frequency, wg);
  }
  if (const json* p = field(j, "pulse")) {
    check_keys(*p, {"sigma_cycles"}, w + ".pulse");
    read(*p, "sigma_cycles", s.pulse.sigma_cycles, w + ".pulse");
  }
  if (const json* b = field(j, "bmode")) {
    const std::string wb = w + ".bmode";
    check_keys(*b, {"f_number", "apodization", "axial_oversample", "dynamic_range_db"}, wb);
    read(*b, "f_number", s.bmode.das.f_number, wb);
    std::string apod(apodization_name(s.bmode.das.apodization));
    read(*b, "apodization", apod, wb);
    s.bmode.das.apodization = rethrow_as_config(wb, [&] { return parse_apodization(apod); });
    read(*b, "axial_oversample", s.bmode.axial_oversample, wb);
    read(*b, "dynamic_range_db", s.bmode.dynamic_range_db, wb);
  }
  return s;
}

json to_json(const BenchConfig& c) {
  return {
      {"dataset_source", c.dataset_source},
      {"phantom", to_json(c.phantom)},
      {"image_dir", c.image_dir},
      {"test_count", c.test_count},
      {"t_starts", c.t_starts},
      {"methods", c.methods},
      {"seed", c.seed},
      {"sampler_variant", variant_name(c.sampler_variant)},
      {"inject_noise", c.inject_noise},
      {"psnr_formula", formula_name(c.psnr_formula)},
      {"gcnr_bins", c.gcnr_bins},
      {"checkpoint", c.checkpoint},
      {"output_dir", c.output_dir},
      {"schedule_steps", c.schedule_steps},
  };
}

BenchConfig bench_config_from_json(const json& j) {
  const std::string w = "bench";
  check_keys(j, {"dataset_source", "phantom", "image_dir", "test_count", "t_starts", "methods", "seed",
                 "sampler_variant", "inject_noise", "psnr_formula", "gcnr_bins", "checkpoint", "output_dir",
                 "schedule_steps"},
             w);
  BenchConfig c;
  read(j, "dataset_source", c.dataset_source, w);
  if (const json* p = field(j, "phantom")) c.phantom = phantom_spec_from_json(*p);
  read(j, "image_dir", c.image_dir, w);
  read(j, "test_count", c.test_count, w);
  if (const json* t = field(j, "t_starts")) {
    if (!t->is_array()) bad(w, "t_starts must be an array");
    c.t_starts.clear();
    for (const auto& v : *t) c.t_starts.push_back(as_int<int>(v, "t_starts entries", w));
  }
  if (const json* m = field(j, "methods")) {
    if (!m->is_array()) bad(w, "methods must be an array");
    c.methods.clear();
    for (const auto& v : *m) {
      if (!v.is_string()) bad(w, "methods entries must be strings");
      c.methods.push_back(v.get<std::string>());
    }
  }
  read(j, "seed", c.seed, w);
  std::string variant(variant_name(c.sampler_variant));
  read(j, "sampler_variant", variant, w);
  c.sampler_variant = rethrow_as_config(w, [&] { return parse_variant(variant); });
  read(j, "inject_noise", c.inject_noise, w);
  std::string formula(formula_name(c.psnr_formula));
  read(j, "psnr_formula", formula, w);
  c.psnr_formula = rethrow_as_config(w, [&] { return parse_formula(formula); });
  read(j, "gcnr_bins", c.gcnr_bins, w);
  read(j, "checkpoint", c.checkpoint, w);
  read(j, "output_dir", c.output_dir, w);
  read(j, "schedule_steps", c.schedule_steps, w);
  return c;
}

json parse_json_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
  }
}

void BenchConfig::validate() const {
  if (dataset_source == "phantom") {
    phantom.validate();
    if (test_count == 0) throw std::invalid_argument("bench: test_count must be >= 1");
  } else if (dataset_source == "directory") {
    if (image_dir.empty()) throw std::invalid_argument("bench: image_dir is required for a directory source");
  } else {
    throw std::invalid_argument("bench: dataset_source must be 'phantom' or 'directory'");
  }
  if (schedule_steps < 1) throw std::invalid_argument("bench: schedule_steps must be >= 1");
  if (t_starts.empty()) throw std::invalid_argument("bench: t_starts must not be empty");
  for (int t : t_starts) {
    if (t < 1 || t > schedule_steps) {
      throw std::invalid_argument("bench: t_start " + std::to_string(t) + " outside [1, " +
                                  std::to_string(schedule_steps) + "]");
    }
  }
  if (methods.empty()) throw std::invalid_argument("bench: methods must not be empty");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (std::find(std::begin(kKnownMethods), std::end(kKnownMethods), m) == std::end(kKnownMethods)) {
      throw std::invalid_argument("bench: unknown method '" + m + "'");
    }
    if (!seen.insert(m).second) throw std::invalid_argument("bench: method '" + m + "' listed twice");
  }
  if (gcnr_bins < 16) throw std::invalid_argument("bench: gcnr_bins must be >= 16");
}

// Methods ------------------------------------------------------------------------

Image2D corrupt_image(const Image2D& clean, int t, const NoiseSchedule& sched, std::uint64_t seed,
                      std::uint64_t draw) {
  if (t < 0) throw std::invalid_argument("corrupt: t must be >= 0");
  if (t == 0) return clean;
  const Image2D x0 = convert_range(clean, ValueRange::signed_unit);
  const GaussianField eps = gaussian_field(seed, draw, clean.width(), clean.height());
  return convert_range(forward_jump(x0, t, sched, eps), clean.range());
}

double baseline_sigma(const NoiseSchedule& sched, int t) {
  const double ab = sched.alpha_bar(t);
  return 0.5 * std::sqrt((1.0 - ab) / ab);
}

BaselineMethod parse_baseline(std::string_view name) {
  if (name == "nlm") return BaselineMethod::nlm;
  if (name == "bm3d") return BaselineMethod::bm3d;
  throw std::invalid_argument("unknown baseline '" + std::string(name) + "' (expected nlm or bm3d)");
}

Image2D undo_signal_scaling(const Image2D& noisy, int t, const NoiseSchedule& sched) {
  const double inv = 1.0 / std::sqrt(sched.alpha_bar(t));
  Image2D y = convert_range(noisy, ValueRange::signed_unit);
  for (float& v : y.pixels()) v = static_cast<float>(v * inv);
  return convert_range(y, ValueRange::unit_interval);
}

Image2D baseline_at_step(const Image2D& noisy, int t, BaselineMethod method, const NoiseSchedule& sched) {
  const Image2D unit = undo_signal_scaling(noisy, t, sched);
  const double sigma = baseline_sigma(sched, t);
  Image2D out = method == BaselineMethod::nlm ? nlm_denoise(unit, nlm_defaults(sigma))
                                              : bm3d_denoise(unit, bm3d_defaults(sigma));
  return convert_range(clamp_to_range(out), noisy.range());
}

Image2D ddpm_at_step(const Image2D& noisy, int t_start, const NoisePredictor& predictor,
                     const NoiseSchedule& sched, const DenoiseOptions& options) {
  const Image2D x = convert_range(noisy, ValueRange::signed_unit);
  const DenoiseResult r = denoise_from(x, t_start, predictor, sched, options);
  return convert_range(clamp_to_range(r.image), noisy.range());
}

// Harness ------------------------------------------------------------------------

std::pair<RegionMask, RegionMask> gcnr_regions(const CystSpec& cyst, std::size_t width, std::size_t height) {
  return cyst_region_pair(width, height, cyst.cx, cyst.cy, cyst.radius, 2.0);
}

std::vector<BenchImage> load_bench_images(const BenchConfig& cfg) {
  cfg.validate();
  std::vector<BenchImage> out;
  if (cfg.dataset_source == "phantom") {
    for (std::size_t k = 0; k < cfg.test_count; ++k) {
      const PhantomSpec spec = sample_phantom_spec(cfg.phantom, cfg.seed, Split::test, k);
      BenchImage img;
      char name[32];
      std::snprintf(name, sizeof name, "test_%03zu", k);
      img.name = name;
      img.clean = synth_phantom(spec).bmode;
      if (!spec.cysts.empty()) img.regions = gcnr_regions(spec.cysts.front(), spec.width, spec.height);
      out.push_back(std::move(img));
    }
    return out;
  }
  const std::filesystem::path dir(cfg.image_dir);
  if (!std::filesystem::is_directory(dir)) throw IoError("bench: '" + cfg.image_dir + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".ndf")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    BenchImage img;
    img.name = f.stem().string();
    img.clean = convert_range(load_image(f), ValueRange::unit_interval);
    out.push_back(std::move(img));
  }
  if (out.empty()) throw std::invalid_argument("bench: empty test set in '" + cfg.image_dir + "'");
  return out;
}

std::vector<Image2D> phantom_patches(const PhantomSpec& base, std::uint64_t seed, Split split,
                                     std::size_t phantoms, std::size_t patch) {
  if (patch == 0 || patch > base.width || patch > base.height) {
    throw std::invalid_argument("patch size must lie in [1, phantom size]");
  }
  std::vector<Image2D> out;
  for (std::size_t k = 0; k < phantoms; ++k) {
    const Image2D bmode = synth_phantom(sample_phantom_spec(base, seed, split, k)).bmode;
    for (std::size_t y = 0; y + patch <= bmode.height(); y += patch) {
      for (std::size_t x = 0; x + patch <= bmode.width(); x += patch) out.push_back(crop(bmode, x, y, patch, patch));
    }
  }
  return out;
}

MetricsReport run_bench(const BenchConfig& cfg, const std::vector<BenchImage>& images, const NoisePredictor* ddpm) {
  cfg.validate();
  if (images.empty()) throw std::invalid_argument("bench: empty test set");
  const NoiseSchedule sched = make_schedule(cfg.schedule_steps);
  const bool wants_ddpm = std::find(cfg.methods.begin(), cfg.methods.end(), "ddpm") != cfg.methods.end();
  NoisePredictor loaded;
  if (wants_ddpm && ddpm == nullptr) {
    if (cfg.checkpoint.empty()) throw std::invalid_argument("bench: method ddpm requires a checkpoint");
    auto [params, net] = load_model(cfg.checkpoint);
    loaded = make_predictor(params, net);
    ddpm = &loaded;
  }

  const double peak = nominal_peak(ValueRange::unit_interval);
  const std::uint64_t corrupt_seed = derive_seed(cfg.seed, kCorruptLabel);
  const std::uint64_t inject_seed = derive_seed(cfg.seed, kInjectLabel);

  MetricsReport report;
  for (const auto& m : cfg.methods) {
    for (int t : cfg.t_starts) {
      MetricsRow row;
      row.method = m;
      row.t_start = t;
      report.rows.push_back(row);
    }
  }
  auto row_of = [&](const std::string& m, int t) -> MetricsRow& {
    for (auto& r : report.rows) {
      if (r.method == m && r.t_start == t) return r;
    }
    throw std::logic_error("bench: missing row");
  };

  for (int t : cfg.t_starts) {
    for (std::size_t k = 0; k < images.size(); ++k) {
      const Image2D& clean = images[k].clean;
      const Image2D noisy = corrupt_image(clean, t, sched, corrupt_seed, draw_index(k, t));
      for (const auto& m : cfg.methods) {
        Image2D out;
        if (m == "noisy") {
          out = noisy;
        } else if (m == "ddpm") {
          DenoiseOptions opt;
          opt.variant = cfg.sampler_variant;
          opt.inject_noise = cfg.inject_noise;
          opt.noise_seed = derive_seed(inject_seed, draw_index(k, t));
          out = ddpm_at_step(noisy, t, *ddpm, sched, opt);
        } else {
          out = baseline_at_step(noisy, t, parse_baseline(m), sched);
        }
        if (!out.all_finite()) {
          throw NumericError("bench: " + m + " produced non-finite pixels on " + images[k].name + " at t=" +
                             std::to_string(t));
        }
        MetricsRow& row = row_of(m, t);
        row.psnr_per_image.push_back(psnr(clean, out, peak, cfg.psnr_formula));
        row.gcnr_per_image.push_back(images[k].regions
                                         ? 100.0 * gcnr(out, images[k].regions->first,
                                                        images[k].regions->second, cfg.gcnr_bins)
                                         : std::nan(""));
      }
    }
  }

  for (auto& row : report.rows) {
    double ps = 0.0;
    for (double v : row.psnr_per_image) ps += v;
    row.psnr_db = ps / static_cast<double>(row.psnr_per_image.size());
    double gs = 0.0;
    std::size_t gn = 0;
    for (double v : row.gcnr_per_image) {
      if (!std::isnan(v)) {
        gs += v;
        ++gn;
      }
    }
    row.gcnr_percent = gn ? gs / static_cast<double>(gn) : std::nan("");
  }
  report.sort_rows();

  auto& md = report.metadata;
  md.emplace_back("seed", std::to_string(cfg.seed));
  md.emplace_back("sampler_variant", std::string(variant_name(cfg.sampler_variant)));
  md.emplace_back("inject_noise", cfg.inject_noise ? "true" : "false");
  md.emplace_back("psnr_formula", std::string(formula_name(cfg.psnr_formula)));
  md.emplace_back("psnr_domain", "unit interval, max_val " + fmt_g(peak));
  md.emplace_back("gcnr_bins", std::to_string(cfg.gcnr_bins));
  md.emplace_back("gcnr_regions", "cyst disc eroded 2 px vs equal-area annulus from radius + 2 px");
  md.emplace_back("schedule", "T=" + std::to_string(sched.steps()) + ", constant beta " + fmt_g(sched.beta(1)));
  md.emplace_back("dataset_source", cfg.dataset_source);
  md.emplace_back("test_images", std::to_string(images.size()));
  md.emplace_back("baseline_sigma", "sqrt((1 - abar_t) / abar_t) / 2 after rescaling by 1/sqrt(abar_t)");
  md.emplace_back("nlm", "patch radius 2, search radius 7, h = 0.55 sigma");
  md.emplace_back("bm3d", "block 8, 16 matches, search radius 9, threshold 2.7 sigma, two stages");
  if (wants_ddpm) md.emplace_back("checkpoint", cfg.checkpoint.empty() ? "(in-memory model)" : cfg.checkpoint);
  md.emplace_back("config", to_json(cfg).dump());
  return report;
}

void write_report(const std::filesystem::path& dir, const MetricsReport& report, const BenchConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  auto put = [&](const char* name, const std::string& text) {
    write_file_bytes(dir / name, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  };
  put("report.csv", report.to_csv());
  put("report_per_image.csv", report.per_image_csv());
  put("report.md", report.to_markdown());
  put("config.json", to_json(cfg).dump(2) + "\n");
}

}  // namespace usdiff
