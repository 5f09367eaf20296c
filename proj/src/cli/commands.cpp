#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "usdiff/bench.hpp"
#include "usdiff/cli.hpp"
#include "usdiff/formats.hpp"
#include "usdiff/training.hpp"

namespace usdiff {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string config;
  std::string out = ".";
  CLI::Option* out_opt = nullptr;
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  write_file_bytes(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create '" + p.string() + "': " + ec.message());
}

BenchConfig config_or_default(const Globals& g) {
  if (g.config.empty()) return {};
  return bench_config_from_json(parse_json_text(read_text(g.config)));
}

void require_finite(const Image2D& img, const std::string& what) {
  if (!img.all_finite()) throw NumericError(what + " produced non-finite pixels");
}

fs::path output_path(const Globals& g, const std::string& explicit_path, const fs::path& in,
                     const std::string& suffix) {
  if (!explicit_path.empty()) return explicit_path;
  ensure_dir(g.out);
  return fs::path(g.out) / (in.stem().string() + suffix + in.extension().string());
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int parse_int(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::invalid_argument(what + ": '" + s + "' is not an integer");
  return v;
}

CystSpec parse_cyst(const std::string& s) {
  const auto parts = split_csv(s);
  if (parts.size() != 4) throw std::invalid_argument("--cyst expects cx,cy,radius,echogenicity (pixels)");
  double v[4];
  for (int i = 0; i < 4; ++i) {
    std::size_t used = 0;
    try {
      v[i] = std::stod(parts[static_cast<std::size_t>(i)], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != parts[static_cast<std::size_t>(i)].size() || used == 0) {
      throw std::invalid_argument("--cyst: '" + parts[static_cast<std::size_t>(i)] + "' is not a number");
    }
  }
  return {v[0], v[1], v[2], v[3]};
}

std::vector<double> spread_angles(std::size_t count, double span_deg) {
  if (count == 0) throw std::invalid_argument("--angles must be >= 1");
  std::vector<double> a(count, 0.0);
  for (std::size_t i = 0; i < count && count > 1; ++i) {
    a[i] = (-span_deg + 2.0 * span_deg * static_cast<double>(i) / static_cast<double>(count - 1)) *
           std::numbers::pi / 180.0;
  }
  return a;
}

void write_mask(const fs::path& p, const RegionMask& m) {
  Image2D img(m.width, m.height, ValueRange::unit_interval);
  for (std::size_t i = 0; i < m.bits.size(); ++i) img.data()[i] = m.bits[i] ? 1.0f : 0.0f;
  write_pgm(p, img);
}

std::string indexed(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu%s", stem, i, ext);
  return buf;
}

std::vector<Image2D> load_image_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".ndf")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Image2D> out;
  for (const auto& f : files) out.push_back(convert_range(load_image(f), ValueRange::unit_interval));
  return out;
}

// phantom ----------------------------------------------------------------------

struct PhantomArgs {
  std::size_t width = 0, height = 0, count = 1, angles = 0;
  double pixel_size = 0, density = 0, angle_span = 7.0, split_ratio = 0.15;
  std::vector<std::string> cysts;
  bool no_rf = false;
};

int cmd_phantom(const Globals& g, const PhantomArgs& a, CLI::App& sub, std::ostream& out) {
  PhantomSpec spec = config_or_default(g).phantom;
  if (sub.count("--width")) spec.width = a.width;
  if (sub.count("--height")) spec.height = a.height;
  if (sub.count("--pixel-size")) spec.pixel_size = a.pixel_size;
  if (sub.count("--density")) spec.scatterer_density = a.density;
  if (sub.count("--angles") || sub.count("--angle-span")) {
    spec.angles = spread_angles(sub.count("--angles") ? a.angles : spec.angles.size(), a.angle_span);
  }
  if (!a.cysts.empty()) {
    spec.cysts.clear();
    for (const auto& c : a.cysts) spec.cysts.push_back(parse_cyst(c));
  }
  spec.seed = g.seed;
  spec.validate();
  const fs::path dir = g.out;
  ensure_dir(dir);

  if (a.count <= 1) {
    const Phantom ph = synth_phantom(spec);
    write_pgm(dir / "bmode.pgm", ph.bmode);
    save_image(dir / "envelope.ndf", ph.envelope);
    for (std::size_t i = 0; i < ph.cyst_masks.size(); ++i) write_mask(dir / indexed("mask", i, ".pgm"), ph.cyst_masks[i]);
    if (!a.no_rf) {
      ensure_dir(dir / "rf");
      for (std::size_t i = 0; i < ph.rf_frames.size(); ++i) write_rf(dir / "rf" / indexed("frame", i, ".rf"), ph.rf_frames[i]);
    }
    write_text(dir / "spec.json", to_json(spec).dump(2) + "\n");
    out << "phantom " << spec.width << "x" << spec.height << ", " << ph.rf_frames.size() << " angles, "
        << ph.cyst_masks.size() << " cysts -> " << dir.string() << "\n";
    return kExitOk;
  }

  const SplitPlan plan = plan_splits(a.count, a.split_ratio);
  for (auto [split, n] : {std::pair{Split::train, plan.train}, std::pair{Split::validation, plan.validation},
                          std::pair{Split::test, plan.test}}) {
    const fs::path sdir = dir / std::string(split_name(split));
    ensure_dir(sdir);
    for (std::size_t i = 0; i < n; ++i) {
      const PhantomSpec s = sample_phantom_spec(spec, g.seed, split, i);
      const Phantom ph = synth_phantom(s);
      write_pgm(sdir / indexed("phantom", i, ".pgm"), ph.bmode);
      for (std::size_t c = 0; c < ph.cyst_masks.size(); ++c) {
        write_mask(sdir / (indexed("phantom", i, "") + indexed("_mask", c, ".pgm")), ph.cyst_masks[c]);
      }
      write_text(sdir / indexed("phantom", i, ".json"), to_json(s).dump(2) + "\n");
    }
    out << split_name(split) << ": " << n << " phantoms\n";
  }
  return kExitOk;
}

// corrupt ----------------------------------------------------------------------

int cmd_corrupt(const Globals& g, const std::string& in, int t, int steps, const std::string& output,
                std::ostream& out) {
  const Image2D clean = load_image(in);
  const NoiseSchedule sched = make_schedule(steps);
  if (t > steps) throw std::invalid_argument("--t must be <= " + std::to_string(steps));
  const Image2D noisy = corrupt_image(clean, t, sched, g.seed, 0);
  require_finite(noisy, "corrupt");
  const fs::path dst = output_path(g, output, in, "_t" + std::to_string(t));
  save_image(dst, noisy);
  out << "corrupted to t=" << t << " -> " << dst.string() << "\n";
  return kExitOk;
}

// train ------------------------------------------------------------------------

struct TrainArgs {
  std::string data, warm_start;
  int epochs = 30, checkpoint_every = 0, lr_step = 50;
  std::size_t batch = 16, phantoms = 50, heldout_phantoms = 8, patch = 32, base_channels = 16, depth = 2;
  double lr = 1e-3, gamma = 0.3;
};

int cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out) {
  std::vector<Image2D> data;
  std::vector<Image2D> heldout;
  if (!a.data.empty()) {
    const fs::path p = a.data;
    if (fs::is_directory(p)) {
      data = load_image_dir(p);
    } else if (p.extension() == ".bin") {
      const CifarSet set = load_cifar(p, true);
      for (const auto& t : set.images) data.push_back(cifar_image(t));
    } else {
      throw std::invalid_argument("--data must be a directory of .pgm/.ndf images or a CIFAR .bin batch");
    }
    if (data.size() < 2) throw std::invalid_argument("training needs at least two images");
    const auto n_hold = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.15 * data.size())));
    heldout.assign(data.end() - static_cast<std::ptrdiff_t>(n_hold), data.end());
    data.resize(data.size() - n_hold);
  } else {
    const PhantomSpec base = config_or_default(g).phantom;
    data = phantom_patches(base, g.seed, Split::train, a.phantoms, a.patch);
    heldout = phantom_patches(base, g.seed, Split::validation, a.heldout_phantoms, a.patch);
  }

  UNetConfig net;
  net.base_channels = a.base_channels;
  net.depth = a.depth;
  net.image_size = data.front().width();
  std::optional<std::pair<UNetParams, UNetConfig>> warm;
  TrainOptions opt;
  if (!a.warm_start.empty()) {
    warm = load_model(a.warm_start);
    net = warm->second;
    net.image_size = data.front().width();
    opt.warm_start = &warm->first;
  }
  net.validate();

  TrainConfig cfg;
  cfg.batch_size = a.batch;
  cfg.lr = a.lr;
  cfg.lr_gamma = a.gamma;
  cfg.lr_step_epochs = a.lr_step;
  cfg.epochs = a.epochs;
  cfg.seed = g.seed;
  opt.heldout = heldout;
  opt.out_dir = g.out;
  opt.checkpoint_every = a.checkpoint_every;
  opt.on_epoch = [&](const EpochStats& s) {
    char line[128];
    std::snprintf(line, sizeof line, "epoch %3d  train_mse %.6f  heldout_l1 %.6f  lr %.3g\n", s.epoch, s.train_mse,
                  s.heldout_l1, s.lr);
    out << line << std::flush;
  };
  ensure_dir(g.out);
  train(data, make_schedule(), cfg, net, opt);
  out << "model -> " << (fs::path(g.out) / "model.ckpt").string() << "\n";
  return kExitOk;
}

// denoise / baseline ---------------------------------------------------------------

int cmd_denoise(const Globals& g, const std::string& in, const std::string& ckpt, int t_start,
                const std::string& variant, bool inject, const std::string& output, std::ostream& out) {
  DenoiseOptions opt;
  opt.variant = parse_variant(variant);
  opt.inject_noise = inject;
  opt.noise_seed = g.seed;
  const Image2D noisy = load_image(in);
  auto [params, net] = load_model(ckpt);
  const NoiseSchedule sched = make_schedule();
  const Image2D res = ddpm_at_step(noisy, t_start, make_predictor(params, net), sched, opt);
  require_finite(res, "denoise");
  const fs::path dst = output_path(g, output, in, "_ddpm");
  save_image(dst, res);
  out << "denoised from t=" << t_start << " (" << variant_name(opt.variant) << ") -> " << dst.string() << "\n";
  return kExitOk;
}

struct BaselineArgs {
  std::string method, in, output;
  int t = 0;
  double sigma = 0.0;
  int patch_radius = 0, search_radius = 0, block = 0, matches = 0, stages = 2;
  double h = 0.0;
};

int cmd_baseline(const Globals& g, const BaselineArgs& a, CLI::App& sub, std::ostream& out) {
  const BaselineMethod method = parse_baseline(a.method);
  const bool by_t = sub.count("--t") > 0;
  const bool by_sigma = sub.count("--sigma") > 0;
  if (by_t == by_sigma) throw std::invalid_argument("give exactly one of --t or --sigma");
  const Image2D noisy = load_image(a.in);
  const NoiseSchedule sched = make_schedule();
  Image2D unit;
  double sigma = a.sigma;
  if (by_t) {
    unit = undo_signal_scaling(noisy, a.t, sched);
    sigma = baseline_sigma(sched, a.t);
  } else {
    unit = convert_range(noisy, ValueRange::unit_interval);
  }
  Image2D res;
  if (method == BaselineMethod::nlm) {
    NlmConfig cfg = nlm_defaults(sigma);
    if (sub.count("--patch-radius")) cfg.patch_radius = a.patch_radius;
    if (sub.count("--search-radius")) cfg.search_radius = a.search_radius;
    if (sub.count("--nlm-h")) cfg.h = a.h;
    res = nlm_denoise(unit, cfg);
  } else {
    Bm3dConfig cfg = bm3d_defaults(sigma);
    if (sub.count("--block")) cfg.block_size = a.block;
    if (sub.count("--matches")) cfg.max_matches = a.matches;
    if (sub.count("--search-radius")) cfg.search_radius = a.search_radius;
    if (a.stages != 1 && a.stages != 2) throw std::invalid_argument("--stages must be 1 or 2");
    cfg.stages = a.stages == 1 ? Bm3dStages::one : Bm3dStages::two;
    res = bm3d_denoise(unit, cfg);
  }
  res = convert_range(clamp_to_range(res), noisy.range());
  require_finite(res, a.method);
  const fs::path dst = output_path(g, a.output, a.in, "_" + a.method);
  save_image(dst, res);
  out << a.method << " (sigma " << sigma << ") -> " << dst.string() << "\n";
  return kExitOk;
}

// beamform ---------------------------------------------------------------------

struct BeamformArgs {
  std::string rf_dir, angles;
  bool compound = false;
  std::size_t width = 0, height = 0;
  double pixel_size = 0, depth_start = 0, f_number = 0, dynamic_range = 0;
};

int cmd_beamform(const Globals& g, const BeamformArgs& a, CLI::App& sub, std::ostream& out) {
  std::vector<fs::path> files;
  if (!fs::is_directory(a.rf_dir)) throw IoError("'" + a.rf_dir + "' is not a directory");
  for (const auto& e : fs::directory_iterator(a.rf_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".rf") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::invalid_argument("no .rf files in '" + a.rf_dir + "'");
  std::vector<std::size_t> pick;
  if (a.angles.empty()) {
    for (std::size_t i = 0; i < files.size(); ++i) pick.push_back(i);
  } else {
    for (const auto& s : split_csv(a.angles)) {
      const int i = parse_int(s, "--angles");
      if (i < 0 || static_cast<std::size_t>(i) >= files.size()) {
        throw std::invalid_argument("--angles index " + s + " outside [0, " + std::to_string(files.size()) + ")");
      }
      pick.push_back(static_cast<std::size_t>(i));
    }
  }
  std::vector<RFFrame> frames;
  for (std::size_t i : pick) frames.push_back(read_rf(files[i]));

  PhantomSpec spec = config_or_default(g).phantom;
  if (sub.count("--width")) spec.width = a.width;
  if (sub.count("--height")) spec.height = a.height;
  if (sub.count("--pixel-size")) spec.pixel_size = a.pixel_size;
  if (sub.count("--depth-start")) spec.depth_start = a.depth_start;
  if (sub.count("--f-number")) spec.bmode.das.f_number = a.f_number;
  if (sub.count("--dynamic-range")) spec.bmode.dynamic_range_db = a.dynamic_range;
  const ImagingGrid grid = spec.grid();
  const fs::path dir = g.out;
  ensure_dir(dir);
  if (a.compound) {
    const Image2D env = compound_envelope(frames, grid, spec.bmode);
    require_finite(env, "beamform");
    write_pgm(dir / "bmode.pgm", log_compress(env, spec.bmode.dynamic_range_db));
    save_image(dir / "envelope.ndf", env);
    out << "compounded " << frames.size() << " angles -> " << (dir / "bmode.pgm").string() << "\n";
  } else {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const Image2D env = envelope_image(frames[i], grid, spec.bmode);
      require_finite(env, "beamform");
      write_pgm(dir / indexed("bmode", pick[i], ".pgm"), log_compress(env, spec.bmode.dynamic_range_db));
    }
    out << "beamformed " << frames.size() << " angles -> " << dir.string() << "\n";
  }
  return kExitOk;
}

// bench ------------------------------------------------------------------------

struct BenchArgs {
  std::string methods, t_starts, ckpt, variant, images;
  std::size_t count = 0;
  bool inject = false;
};

int cmd_bench(const Globals& g, const BenchArgs& a, CLI::App& sub, std::ostream& out) {
  BenchConfig cfg = config_or_default(g);
  if (g.seed_opt->count()) cfg.seed = g.seed;
  if (sub.count("--methods")) cfg.methods = split_csv(a.methods);
  if (sub.count("--t-starts")) {
    cfg.t_starts.clear();
    for (const auto& s : split_csv(a.t_starts)) cfg.t_starts.push_back(parse_int(s, "--t-starts"));
  }
  if (sub.count("--count")) cfg.test_count = a.count;
  if (sub.count("--ckpt")) cfg.checkpoint = a.ckpt;
  if (sub.count("--variant")) cfg.sampler_variant = parse_variant(a.variant);
  if (sub.count("--inject")) cfg.inject_noise = a.inject;
  if (sub.count("--images")) {
    cfg.dataset_source = "directory";
    cfg.image_dir = a.images;
  }
  if (cfg.output_dir.empty() || g.out_opt->count()) cfg.output_dir = g.out;
  cfg.validate();
  const auto images = load_bench_images(cfg);
  const MetricsReport report = run_bench(cfg, images);
  write_report(cfg.output_dir, report, cfg);
  out << report.to_markdown();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Diffusion denoising of ultrasound B-mode images, with classical baselines and a phantom simulator",
               "usdiff"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--config", g.config, "JSON file with bench configuration keys")->check(CLI::ExistingFile);
  g.out_opt = app.add_option("--out", g.out, "Output directory")->capture_default_str();

  PhantomArgs pa;
  auto* ph = app.add_subcommand("phantom", "Simulate a speckle phantom (B-mode, RF frames, cyst masks)");
  ph->add_option("--width", pa.width, "Pixels");
  ph->add_option("--height", pa.height, "Pixels");
  ph->add_option("--pixel-size", pa.pixel_size, "Metres");
  ph->add_option("--density", pa.density, "Scatterers per resolution cell");
  ph->add_option("--angles", pa.angles, "Number of plane-wave angles");
  ph->add_option("--angle-span", pa.angle_span, "Largest steering angle in degrees");
  ph->add_option("--cyst", pa.cysts, "cx,cy,radius,echogenicity in pixels (repeatable)");
  ph->add_option("--count", pa.count, "Phantoms to generate; > 1 writes train/validation/test splits");
  ph->add_option("--split-ratio", pa.split_ratio, "Validation and test share of --count")->capture_default_str();
  ph->add_flag("--no-rf", pa.no_rf, "Skip writing RF frames");

  std::string c_in, c_out;
  int c_t = 0, c_steps = 300;
  auto* co = app.add_subcommand("corrupt", "Run the forward process to step t");
  co->add_option("--in", c_in, "Clean image (.pgm or .ndf)")->required();
  co->add_option("--t", c_t, "Forward steps (0 copies the input)")->required()->check(CLI::NonNegativeNumber);
  co->add_option("--steps", c_steps, "Schedule length T")->capture_default_str();
  co->add_option("-o,--output", c_out, "Output file (default <out>/<stem>_t<t>.<ext>)");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train the noise-prediction U-Net");
  tr->add_option("--data", ta.data, "Image directory or CIFAR-10 .bin batch (default: phantom patches)");
  tr->add_option("--warm-start", ta.warm_start, "Checkpoint to fine-tune");
  tr->add_option("--epochs", ta.epochs)->capture_default_str();
  tr->add_option("--batch", ta.batch)->capture_default_str();
  tr->add_option("--lr", ta.lr)->capture_default_str();
  tr->add_option("--lr-gamma", ta.gamma)->capture_default_str();
  tr->add_option("--lr-step", ta.lr_step, "Epochs between learning-rate decays")->capture_default_str();
  tr->add_option("--phantoms", ta.phantoms, "Training phantoms when --data is absent")->capture_default_str();
  tr->add_option("--heldout-phantoms", ta.heldout_phantoms)->capture_default_str();
  tr->add_option("--patch", ta.patch, "Patch side for phantom data")->capture_default_str();
  tr->add_option("--base-channels", ta.base_channels)->capture_default_str();
  tr->add_option("--depth", ta.depth)->capture_default_str();
  tr->add_option("--checkpoint-every", ta.checkpoint_every)->capture_default_str();

  std::string d_in, d_ckpt, d_variant = "standard-posterior", d_out;
  int d_t = 0;
  bool d_inject = false;
  auto* dn = app.add_subcommand("denoise", "Reverse diffusion from t-start with a trained model");
  dn->add_option("--in", d_in)->required();
  dn->add_option("--ckpt", d_ckpt)->required();
  dn->add_option("--t-start", d_t)->required();
  dn->add_option("--variant", d_variant, "standard-posterior or paper-literal")->capture_default_str();
  dn->add_flag("--inject", d_inject, "Inject posterior noise (standard-posterior only)");
  dn->add_option("-o,--output", d_out);

  BaselineArgs ba;
  auto* bl = app.add_subcommand("baseline", "Classical denoising (nlm or bm3d)");
  bl->add_option("--method", ba.method, "nlm or bm3d")->required();
  bl->add_option("--in", ba.in)->required();
  bl->add_option("--t", ba.t, "Forward step the input was corrupted to");
  bl->add_option("--sigma", ba.sigma, "Noise level on the unit interval");
  bl->add_option("--patch-radius", ba.patch_radius);
  bl->add_option("--search-radius", ba.search_radius);
  bl->add_option("--nlm-h", ba.h, "NLM filtering parameter on the unit interval");
  bl->add_option("--block", ba.block);
  bl->add_option("--matches", ba.matches);
  bl->add_option("--stages", ba.stages)->capture_default_str();
  bl->add_option("-o,--output", ba.output);

  BeamformArgs bf;
  auto* bm = app.add_subcommand("beamform", "Delay-and-sum RF frames into a B-mode image");
  bm->add_option("--rf", bf.rf_dir, "Directory of .rf frames")->required();
  bm->add_option("--angles", bf.angles, "Comma-separated frame indices (default all)");
  bm->add_flag("--compound", bf.compound, "Average envelopes over the selected angles");
  bm->add_option("--width", bf.width);
  bm->add_option("--height", bf.height);
  bm->add_option("--pixel-size", bf.pixel_size);
  bm->add_option("--depth-start", bf.depth_start);
  bm->add_option("--f-number", bf.f_number);
  bm->add_option("--dynamic-range", bf.dynamic_range);

  BenchArgs be;
  auto* bn = app.add_subcommand("bench", "Corrupt, denoise and tabulate PSNR / GCNR");
  bn->add_option("--methods", be.methods, "Comma-separated subset of noisy,nlm,bm3d,ddpm");
  bn->add_option("--t-starts", be.t_starts, "Comma-separated steps");
  bn->add_option("--count", be.count, "Test phantoms");
  bn->add_option("--ckpt", be.ckpt);
  bn->add_option("--variant", be.variant);
  bn->add_flag("--inject", be.inject);
  bn->add_option("--images", be.images, "Use a directory of clean images instead of phantoms");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  try {
    if (*ph) return cmd_phantom(g, pa, *ph, out);
    if (*co) return cmd_corrupt(g, c_in, c_t, c_steps, c_out, out);
    if (*tr) return cmd_train(g, ta, out);
    if (*dn) return cmd_denoise(g, d_in, d_ckpt, d_t, d_variant, d_inject, d_out, out);
    if (*bl) return cmd_baseline(g, ba, *bl, out);
    if (*bm) return cmd_beamform(g, bf, *bm, out);
    if (*bn) return cmd_bench(g, be, *bn, out);
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const PredictorError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitValidation;
}

}  // namespace usdiff
