#include "usdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>

#include "usdiff/simd.hpp"

namespace usdiff {

double mse(const Image2D& reference, const Image2D& test) {
  require_same_shape(reference, test, "mse");
  if (reference.empty()) throw std::invalid_argument("mse: empty images");
  return simd::sum_sq_diff(reference.pixels(), test.pixels()) / static_cast<double>(reference.size());
}

std::string_view formula_name(PsnrFormula f) {
  return f == PsnrFormula::standard ? "standard" : "paper-literal";
}

PsnrFormula parse_formula(std::string_view name) {
  if (name == "standard") return PsnrFormula::standard;
  if (name == "paper-literal") return PsnrFormula::paper_literal;
  throw std::invalid_argument("unknown PSNR formula '" + std::string(name) + "'");
}

double psnr(const Image2D& reference, const Image2D& test, double max_val, PsnrFormula formula) {
  if (!(max_val > 0)) throw std::invalid_argument("psnr: max_val must be positive");
  const double e = mse(reference, test);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  const double peak = formula == PsnrFormula::standard ? max_val * max_val : max_val;
  return 10.0 * std::log10(peak / e);
}

double nominal_peak(ValueRange range) {
  const RangeBounds b = bounds(range);
  return static_cast<double>(b.hi) - b.lo;
}

std::size_t RegionMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

double gcnr(const Image2D& img, const RegionMask& inside, const RegionMask& outside, int bins) {
  if (bins < 16) throw std::invalid_argument("gcnr: at least 16 bins required");
  for (const RegionMask* m : {&inside, &outside}) {
    if (m->width != img.width() || m->height != img.height() || m->bits.size() != img.size()) {
      throw std::invalid_argument("gcnr: mask shape does not match the image");
    }
    if (m->count() < kMinMaskPixels) throw std::invalid_argument("gcnr: mask has fewer than 32 pixels");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const bool a = inside.bits[i] != 0;
    const bool b = outside.bits[i] != 0;
    if (a && b) throw std::invalid_argument("gcnr: inside and outside masks overlap");
    if (a || b) {
      lo = std::min(lo, static_cast<double>(img.data()[i]));
      hi = std::max(hi, static_cast<double>(img.data()[i]));
    }
  }
  if (!(hi > lo)) return 0.0;

  std::vector<double> h_in(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> h_out(static_cast<std::size_t>(bins), 0.0);
  const double scale = bins / (hi - lo);
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!inside.bits[i] && !outside.bits[i]) continue;
    auto b = static_cast<int>((img.data()[i] - lo) * scale);
    b = std::clamp(b, 0, bins - 1);
    (inside.bits[i] ? h_in : h_out)[static_cast<std::size_t>(b)] += 1.0;
  }
  const double n_in = static_cast<double>(inside.count());
  const double n_out = static_cast<double>(outside.count());
  double overlap = 0.0;
  for (std::size_t b = 0; b < h_in.size(); ++b) overlap += std::min(h_in[b] / n_in, h_out[b] / n_out);
  return std::clamp(1.0 - overlap, 0.0, 1.0);
}

std::pair<RegionMask, RegionMask> cyst_region_pair(std::size_t width, std::size_t height, double cx,
                                                   double cy, double radius, double erode) {
  RegionMask in(width, height, MaskRole::inside);
  RegionMask out(width, height, MaskRole::outside);
  const double r_in = radius - erode;
  const double r0 = radius + erode;
  // Annulus [r0, r1] with the area of the un-eroded disc.
  const double r1 = std::sqrt(r0 * r0 + radius * radius);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double dx = static_cast<double>(x) + 0.5 - cx;
      const double dy = static_cast<double>(y) + 0.5 - cy;
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d <= r_in) in.set(x, y);
      if (d >= r0 && d <= r1) out.set(x, y);
    }
  }
  return {std::move(in), std::move(out)};
}

// Report ---------------------------------------------------------------------

namespace {

int method_rank(std::string_view m) {
  if (m == "noisy") return 0;
  if (m == "nlm") return 1;
  if (m == "bm3d") return 2;
  if (m == "ddpm") return 3;
  return 4;
}

std::string fmt(double v, const char* spec = "%.4f") {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::string display_name(std::string_view method) {
  if (method == "noisy") return "Noisy Image";
  if (method == "nlm") return "NLM";
  if (method == "bm3d") return "BM3D";
  if (method == "ddpm") return "OURS";
  return std::string(method);
}

void MetricsReport::sort_rows() {
  std::stable_sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
    const int ra = method_rank(a.method);
    const int rb = method_rank(b.method);
    if (ra != rb) return ra < rb;
    if (a.method != b.method) return a.method < b.method;
    return a.t_start < b.t_start;
  });
}

const MetricsRow* MetricsReport::find(std::string_view method, int t_start) const {
  for (const auto& r : rows) {
    if (r.method == method && r.t_start == t_start) return &r;
  }
  return nullptr;
}

std::string MetricsReport::to_csv() const {
  std::string out = "method,t_start,psnr_db,gcnr_percent\n";
  for (const auto& r : rows) {
    out += r.method + "," + std::to_string(r.t_start) + "," + fmt(r.psnr_db) + "," + fmt(r.gcnr_percent) + "\n";
  }
  return out;
}

std::string MetricsReport::per_image_csv() const {
  std::string out = "method,t_start,image,psnr_db,gcnr_percent\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.psnr_per_image.size(); ++i) {
      const double g = i < r.gcnr_per_image.size() ? r.gcnr_per_image[i] : std::nan("");
      out += r.method + "," + std::to_string(r.t_start) + "," + std::to_string(i) + "," +
             fmt(r.psnr_per_image[i]) + "," + fmt(g) + "\n";
    }
  }
  return out;
}

std::string MetricsReport::to_markdown() const {
  std::vector<std::string> methods;
  std::set<int> ts;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    ts.insert(r.t_start);
  }
  auto table = [&](const char* title, const char* corner, auto value) {
    std::string out = std::string("### ") + title + "\n\n| " + corner + " |";
    for (int t : ts) out += " T=" + std::to_string(t) + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < ts.size(); ++i) out += "---|";
    out += "\n";
    for (const auto& m : methods) {
      out += "| " + display_name(m) + " |";
      for (int t : ts) {
        const MetricsRow* r = find(m, t);
        out += " " + (r ? fmt(value(*r), "%.2f") : std::string()) + " |";
      }
      out += "\n";
    }
    return out + "\n";
  };
  std::string md = table("PSNR (dB)", "Technique", [](const MetricsRow& r) { return r.psnr_db; });
  md += table("GCNR (%)", "Method", [](const MetricsRow& r) { return r.gcnr_percent; });
  if (!metadata.empty()) {
    md += "### Run metadata\n\n";
    for (const auto& [k, v] : metadata) md += "- `" + k + "`: " + v + "\n";
  }
  return md;
}

}  // namespace usdiff
