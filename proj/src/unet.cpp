#include "usdiff/unet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "usdiff/rng.hpp"
#include "usdiff/simd.hpp"

namespace usdiff {

void UNetConfig::validate() const {
  if (in_channels < 1 || base_channels < 1 || depth < 1 || time_embed_dim < 1 || image_size < 1) {
    throw std::invalid_argument("UNetConfig: every count must be at least 1");
  }
  if (time_embed_dim % 2 != 0) throw std::invalid_argument("UNetConfig: time_embed_dim must be even");
  if (image_size % (std::size_t{1} << depth) != 0) {
    throw std::invalid_argument("UNetConfig: image_size " + std::to_string(image_size) +
                                " not divisible by 2^depth");
  }
}

std::vector<float> time_embed(double t, std::size_t dim) {
  if (dim % 2 != 0) throw std::invalid_argument("time_embed: dimension must be even");
  std::vector<float> e(dim);
  for (std::size_t k = 0; 2 * k < dim; ++k) {
    const double freq = std::pow(10000.0, static_cast<double>(2 * k) / static_cast<double>(dim));
    e[2 * k] = static_cast<float>(std::sin(t / freq));
    e[2 * k + 1] = static_cast<float>(std::cos(t / freq));
  }
  return e;
}

namespace {

struct Shape {
  std::size_t c = 0, h = 0, w = 0;
  std::size_t size() const { return c * h * w; }
  std::size_t plane() const { return h * w; }
};

// ---------------------------------------------------------------------------
// Parameter layout

std::string level_name(const char* kind, std::size_t l) { return kind + std::to_string(l); }

void add_conv(TensorTable& t, const std::string& name, std::size_t cout, std::size_t cin,
              std::size_t k) {
  t.emplace(name + ".weight", Tensor({cout, cin, k, k}));
  t.emplace(name + ".bias", Tensor({cout}));
}

void add_linear(TensorTable& t, const std::string& name, std::size_t out, std::size_t in) {
  t.emplace(name + ".weight", Tensor({out, in}));
  t.emplace(name + ".bias", Tensor({out}));
}

void add_block(TensorTable& t, const std::string& name, std::size_t cin, std::size_t cout,
               std::size_t embed) {
  add_conv(t, name + ".conv1", cout, cin, 3);
  add_linear(t, name + ".temb", cout, embed);
  add_conv(t, name + ".conv2", cout, cout, 3);
}

TensorTable layout(const UNetConfig& cfg) {
  cfg.validate();
  TensorTable t;
  const std::size_t e = cfg.time_embed_dim;
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    const std::size_t cin = l == 0 ? cfg.in_channels : cfg.channels_at(l - 1);
    add_block(t, level_name("enc", l), cin, cfg.channels_at(l), e);
    add_conv(t, level_name("down", l), cfg.channels_at(l), cfg.channels_at(l), 3);
    add_conv(t, level_name("up", l), cfg.channels_at(l), cfg.channels_at(l + 1), 3);
    add_block(t, level_name("dec", l), 2 * cfg.channels_at(l), cfg.channels_at(l), e);
  }
  add_block(t, "mid", cfg.channels_at(cfg.depth - 1), cfg.channels_at(cfg.depth), e);
  add_conv(t, "out", cfg.in_channels, cfg.channels_at(0), 1);
  return t;
}

const Tensor& param(const TensorTable& t, const std::string& name) {
  auto it = t.find(name);
  if (it == t.end()) throw std::invalid_argument("missing parameter '" + name + "'");
  return it->second;
}

Tensor& grad(TensorTable& t, const std::string& name) { return t.at(name); }

// ---------------------------------------------------------------------------
// Convolution via im2col. Weight dims [cout, cin, k, k], zero padding k/2.

struct ConvGeom {
  std::size_t cout, cin, k, stride, pad, ho, wo;
};

ConvGeom conv_geom(const Tensor& w, Shape in, std::size_t stride) {
  ConvGeom g{w.dim(0), w.dim(1), w.dim(2), stride, w.dim(2) / 2, 0, 0};
  if (g.cin != in.c) {
    throw std::invalid_argument("conv: expected " + std::to_string(g.cin) + " input channels, got " +
                                std::to_string(in.c));
  }
  g.ho = (in.h + 2 * g.pad - g.k) / stride + 1;
  g.wo = (in.w + 2 * g.pad - g.k) / stride + 1;
  return g;
}

void im2col(const float* in, Shape s, const ConvGeom& g, std::vector<float>& col) {
  const std::size_t cols = g.ho * g.wo;
  col.assign(g.cin * g.k * g.k * cols, 0.0f);
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const float* plane = in + ci * s.plane();
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        float* dst = col.data() + ((ci * g.k + ky) * g.k + kx) * cols;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                          static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(s.h)) continue;
          const float* src = plane + static_cast<std::size_t>(iy) * s.w;
          float* row = dst + oy * g.wo;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(s.w)) row[ox] = src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const std::vector<float>& col, Shape s, const ConvGeom& g, float* din) {
  const std::size_t cols = g.ho * g.wo;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    float* plane = din + ci * s.plane();
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const float* src = col.data() + ((ci * g.k + ky) * g.k + kx) * cols;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                          static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(s.h)) continue;
          float* dst = plane + static_cast<std::size_t>(iy) * s.w;
          const float* row = src + oy * g.wo;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(s.w)) dst[ix] += row[ox];
          }
        }
      }
    }
  }
}

thread_local std::vector<float> t_col;
thread_local std::vector<float> t_dcol;

std::vector<float> conv_forward(const float* in, Shape s, const Tensor& w, const Tensor& b,
                                std::size_t stride, Shape& out_shape) {
  const ConvGeom g = conv_geom(w, s, stride);
  im2col(in, s, g, t_col);
  const std::size_t cols = g.ho * g.wo;
  const std::size_t kk = g.cin * g.k * g.k;
  std::vector<float> out(g.cout * cols);
  const auto& kern = simd::kernels();
  for (std::size_t co = 0; co < g.cout; ++co) {
    float* dst = out.data() + co * cols;
    std::fill(dst, dst + cols, b[co]);
    const float* wrow = w.data() + co * kk;
    for (std::size_t j = 0; j < kk; ++j) {
      kern.saxpy(wrow[j], t_col.data() + j * cols, dst, cols);
    }
  }
  out_shape = {g.cout, g.ho, g.wo};
  return out;
}

/// Accumulates weight/bias gradients; returns the input gradient when wanted.
std::vector<float> conv_backward(const float* in, Shape s, const Tensor& w, std::size_t stride,
                                 const float* dout, Tensor& dw, Tensor& db, bool want_input_grad) {
  const ConvGeom g = conv_geom(w, s, stride);
  im2col(in, s, g, t_col);
  const std::size_t cols = g.ho * g.wo;
  const std::size_t kk = g.cin * g.k * g.k;
  const auto& kern = simd::kernels();
  for (std::size_t co = 0; co < g.cout; ++co) {
    const float* drow = dout + co * cols;
    double bias_sum = 0.0;
    for (std::size_t i = 0; i < cols; ++i) bias_sum += drow[i];
    db[co] += static_cast<float>(bias_sum);
    float* dwrow = dw.data() + co * kk;
    for (std::size_t j = 0; j < kk; ++j) dwrow[j] += kern.dot(drow, t_col.data() + j * cols, cols);
  }
  if (!want_input_grad) return {};
  t_dcol.assign(kk * cols, 0.0f);
  for (std::size_t co = 0; co < g.cout; ++co) {
    const float* drow = dout + co * cols;
    const float* wrow = w.data() + co * kk;
    for (std::size_t j = 0; j < kk; ++j) {
      kern.saxpy(wrow[j], drow, t_dcol.data() + j * cols, cols);
    }
  }
  std::vector<float> din(s.size(), 0.0f);
  col2im_add(t_dcol, s, g, din.data());
  return din;
}

inline float sigmoid(float a) { return 1.0f / (1.0f + std::exp(-a)); }
inline float silu(float a) { return a * sigmoid(a); }
inline float silu_grad(float a) {
  const float s = sigmoid(a);
  return s * (1.0f + a * (1.0f - s));
}

std::vector<float> silu_of(const std::vector<float>& a) {
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = silu(a[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Blocks

struct BlockTape {
  Shape in_shape;
  std::vector<float> in;
  std::vector<float> a1;  // conv1 + time bias, pre-activation
  std::vector<float> a2;  // conv2, pre-activation
  Shape mid_shape;
};

std::vector<float> block_forward(const TensorTable& p, const std::string& name,
                                 const std::vector<float>& in, Shape s,
                                 const std::vector<float>& temb, Shape& out_shape,
                                 BlockTape* tape) {
  Shape s1;
  std::vector<float> a1 =
      conv_forward(in.data(), s, param(p, name + ".conv1.weight"), param(p, name + ".conv1.bias"), 1, s1);
  const Tensor& tw = param(p, name + ".temb.weight");
  const Tensor& tb = param(p, name + ".temb.bias");
  const std::size_t e = tw.dim(1);
  if (temb.size() != e) throw std::invalid_argument("time embedding width mismatch in " + name);
  for (std::size_t c = 0; c < s1.c; ++c) {
    const float shift = tb[c] + simd::dot({tw.data() + c * e, e}, temb);
    float* plane = a1.data() + c * s1.plane();
    for (std::size_t i = 0; i < s1.plane(); ++i) plane[i] += shift;
  }
  const std::vector<float> h1 = silu_of(a1);
  std::vector<float> a2 = conv_forward(h1.data(), s1, param(p, name + ".conv2.weight"),
                                       param(p, name + ".conv2.bias"), 1, out_shape);
  std::vector<float> out = silu_of(a2);
  if (tape) {
    tape->in_shape = s;
    tape->in = in;
    tape->a1 = std::move(a1);
    tape->a2 = std::move(a2);
    tape->mid_shape = s1;
  }
  return out;
}

std::vector<float> block_backward(const TensorTable& p, TensorTable& g, const std::string& name,
                                  const BlockTape& tape, const std::vector<float>& temb,
                                  const std::vector<float>& dout, bool want_input_grad) {
  std::vector<float> da2(dout.size());
  for (std::size_t i = 0; i < da2.size(); ++i) da2[i] = dout[i] * silu_grad(tape.a2[i]);
  const std::vector<float> h1 = silu_of(tape.a1);
  std::vector<float> dh1 =
      conv_backward(h1.data(), tape.mid_shape, param(p, name + ".conv2.weight"), 1, da2.data(),
                    grad(g, name + ".conv2.weight"), grad(g, name + ".conv2.bias"), true);
  std::vector<float> da1(dh1.size());
  for (std::size_t i = 0; i < da1.size(); ++i) da1[i] = dh1[i] * silu_grad(tape.a1[i]);

  Tensor& dtw = grad(g, name + ".temb.weight");
  Tensor& dtb = grad(g, name + ".temb.bias");
  const std::size_t e = temb.size();
  const Shape s1 = tape.mid_shape;
  for (std::size_t c = 0; c < s1.c; ++c) {
    double sum = 0.0;
    const float* plane = da1.data() + c * s1.plane();
    for (std::size_t i = 0; i < s1.plane(); ++i) sum += plane[i];
    const auto shift_grad = static_cast<float>(sum);
    dtb[c] += shift_grad;
    simd::saxpy(shift_grad, temb, {dtw.data() + c * e, e});
  }
  return conv_backward(tape.in.data(), tape.in_shape, param(p, name + ".conv1.weight"), 1, da1.data(),
                       grad(g, name + ".conv1.weight"), grad(g, name + ".conv1.bias"),
                       want_input_grad);
}

std::vector<float> upsample2(const std::vector<float>& in, Shape s, Shape& out_shape) {
  out_shape = {s.c, 2 * s.h, 2 * s.w};
  std::vector<float> out(out_shape.size());
  for (std::size_t c = 0; c < s.c; ++c) {
    for (std::size_t y = 0; y < out_shape.h; ++y) {
      const float* src = in.data() + c * s.plane() + (y / 2) * s.w;
      float* dst = out.data() + c * out_shape.plane() + y * out_shape.w;
      for (std::size_t x = 0; x < out_shape.w; ++x) dst[x] = src[x / 2];
    }
  }
  return out;
}

std::vector<float> upsample2_backward(const std::vector<float>& dout, Shape s) {
  const Shape big{s.c, 2 * s.h, 2 * s.w};
  std::vector<float> din(s.size(), 0.0f);
  for (std::size_t c = 0; c < s.c; ++c) {
    for (std::size_t y = 0; y < big.h; ++y) {
      const float* src = dout.data() + c * big.plane() + y * big.w;
      float* dst = din.data() + c * s.plane() + (y / 2) * s.w;
      for (std::size_t x = 0; x < big.w; ++x) dst[x / 2] += src[x];
    }
  }
  return din;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape and public entry points

struct ItemTape {
  int step = 0;
  std::vector<float> temb;
  std::vector<BlockTape> enc;
  std::vector<std::vector<float>> skip;
  std::vector<Shape> skip_shape;
  BlockTape mid;
  std::vector<std::vector<float>> up_in;  // upsampled input of up_l
  std::vector<Shape> up_in_shape;
  std::vector<Shape> up_src_shape;        // shape before upsampling
  std::vector<BlockTape> dec;
  std::vector<float> out_in;
  Shape out_in_shape;
};

struct UNetTape {
  const UNetParams* params = nullptr;
  std::uint64_t generation = 0;
  UNetConfig cfg;
  std::vector<std::size_t> x_dims;
  std::vector<ItemTape> items;
};

UNetParams zero_params(const UNetConfig& cfg) {
  UNetParams p;
  p.weights = layout(cfg);
  return p;
}

UNetParams init_params(const UNetConfig& cfg, std::uint64_t seed) {
  UNetParams p = zero_params(cfg);
  SplitMix64 rng(derive_seed(seed, 0x1417));
  for (auto& [name, t] : p.weights) {
    if (name.ends_with(".bias")) continue;
    std::size_t fan_in = 1;
    for (std::size_t i = 1; i < t.rank(); ++i) fan_in *= t.dim(i);
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (float& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
  }
  return p;
}

namespace {

void check_input(const UNetConfig& cfg, const Tensor& x, std::span<const int> steps) {
  cfg.validate();
  if (x.rank() != 4) throw std::invalid_argument("unet: input must be [batch, channel, H, W]");
  if (x.dim(1) != cfg.in_channels) {
    throw std::invalid_argument("unet: input has " + std::to_string(x.dim(1)) +
                                " channels, config expects " + std::to_string(cfg.in_channels));
  }
  const std::size_t unit = std::size_t{1} << cfg.depth;
  if (x.dim(2) == 0 || x.dim(3) == 0 || x.dim(2) % unit != 0 || x.dim(3) % unit != 0) {
    throw std::invalid_argument("unet: spatial dims " + x.shape_string() +
                                " must be positive multiples of 2^depth");
  }
  if (steps.size() != x.dim(0)) {
    throw std::invalid_argument("unet: one step index per batch item required");
  }
}

std::vector<float> item_forward(const TensorTable& p, const UNetConfig& cfg, const float* x,
                                Shape s, int step, ItemTape* tape) {
  const std::vector<float> temb = time_embed(step, cfg.time_embed_dim);
  const std::size_t depth = cfg.depth;
  if (tape) {
    tape->step = step;
    tape->temb = temb;
    tape->enc.resize(depth);
    tape->skip.resize(depth);
    tape->skip_shape.resize(depth);
    tape->up_in.resize(depth);
    tape->up_in_shape.resize(depth);
    tape->up_src_shape.resize(depth);
    tape->dec.resize(depth);
  }
  std::vector<float> h(x, x + s.size());
  std::vector<std::vector<float>> skips(depth);
  std::vector<Shape> skip_shapes(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    const std::string name = level_name("enc", l);
    Shape so;
    skips[l] = block_forward(p, name, h, s, temb, so, tape ? &tape->enc[l] : nullptr);
    skip_shapes[l] = so;
    const std::string down = level_name("down", l);
    h = conv_forward(skips[l].data(), so, param(p, down + ".weight"), param(p, down + ".bias"), 2, s);
  }
  {
    Shape so;
    h = block_forward(p, "mid", h, s, temb, so, tape ? &tape->mid : nullptr);
    s = so;
  }
  for (std::size_t li = depth; li-- > 0;) {
    const std::string up = level_name("up", li);
    Shape us;
    std::vector<float> u = upsample2(h, s, us);
    Shape cs;
    std::vector<float> c =
        conv_forward(u.data(), us, param(p, up + ".weight"), param(p, up + ".bias"), 1, cs);
    if (tape) {
      tape->up_src_shape[li] = s;
      tape->up_in[li] = std::move(u);
      tape->up_in_shape[li] = us;
    }
    const Shape cat_shape{cs.c + skip_shapes[li].c, cs.h, cs.w};
    c.insert(c.end(), skips[li].begin(), skips[li].end());
    Shape so;
    h = block_forward(p, level_name("dec", li), c, cat_shape, temb, so, tape ? &tape->dec[li] : nullptr);
    s = so;
  }
  if (tape) {
    tape->skip = std::move(skips);
    tape->skip_shape = skip_shapes;
    tape->out_in = h;
    tape->out_in_shape = s;
  }
  Shape os;
  return conv_forward(h.data(), s, param(p, "out.weight"), param(p, "out.bias"), 1, os);
}

void item_backward(const TensorTable& p, TensorTable& g, const UNetConfig& cfg,
                   const ItemTape& tape, const float* dout) {
  const std::size_t depth = cfg.depth;
  std::vector<float> dh = conv_backward(tape.out_in.data(), tape.out_in_shape, param(p, "out.weight"),
                                        1, dout, grad(g, "out.weight"), grad(g, "out.bias"), true);
  std::vector<std::vector<float>> dskip(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    std::vector<float> dcat = block_backward(p, g, level_name("dec", l), tape.dec[l], tape.temb, dh, true);
    const Shape ss = tape.skip_shape[l];
    const std::size_t split = dcat.size() - ss.size();
    dskip[l].assign(dcat.begin() + static_cast<std::ptrdiff_t>(split), dcat.end());
    dcat.resize(split);
    const std::string up = level_name("up", l);
    std::vector<float> du = conv_backward(tape.up_in[l].data(), tape.up_in_shape[l],
                                          param(p, up + ".weight"), 1, dcat.data(),
                                          grad(g, up + ".weight"), grad(g, up + ".bias"), true);
    dh = upsample2_backward(du, tape.up_src_shape[l]);
  }
  dh = block_backward(p, g, "mid", tape.mid, tape.temb, dh, true);
  for (std::size_t li = depth; li-- > 0;) {
    const std::string down = level_name("down", li);
    std::vector<float> ds = conv_backward(tape.skip[li].data(), tape.skip_shape[li],
                                          param(p, down + ".weight"), 2, dh.data(),
                                          grad(g, down + ".weight"), grad(g, down + ".bias"), true);
    for (std::size_t i = 0; i < ds.size(); ++i) ds[i] += dskip[li][i];
    dh = block_backward(p, g, level_name("enc", li), tape.enc[li], tape.temb, ds, li > 0);
  }
}

Tensor run_forward(const UNetParams& params, const UNetConfig& cfg, const Tensor& x,
                   std::span<const int> steps, UNetTape* tape) {
  check_input(cfg, x, steps);
  const Shape s{x.dim(1), x.dim(2), x.dim(3)};
  Tensor out(x.dims());
  if (tape) tape->items.resize(x.dim(0));
  for (std::size_t n = 0; n < x.dim(0); ++n) {
    std::vector<float> y = item_forward(params.weights, cfg, x.data() + n * s.size(), s, steps[n],
                                        tape ? &tape->items[n] : nullptr);
    std::copy(y.begin(), y.end(), out.data() + n * s.size());
  }
  return out;
}

}  // namespace

ForwardResult unet_forward(const UNetParams& params, const UNetConfig& cfg, const Tensor& x,
                           std::span<const int> steps) {
  auto tape = std::make_shared<UNetTape>();
  tape->params = &params;
  tape->generation = params.generation;
  tape->cfg = cfg;
  tape->x_dims = x.dims();
  Tensor out = run_forward(params, cfg, x, steps, tape.get());
  return {std::move(out), std::move(tape)};
}

Tensor unet_predict(const UNetParams& params, const UNetConfig& cfg, const Tensor& x,
                    std::span<const int> steps) {
  return run_forward(params, cfg, x, steps, nullptr);
}

TensorTable unet_backward(const UNetTape& tape, const Tensor& dloss_deps_hat) {
  if (tape.params == nullptr) throw std::logic_error("unet_backward: empty tape");
  if (tape.params->generation != tape.generation) {
    throw std::logic_error("unet_backward: parameters were updated after the forward pass");
  }
  if (dloss_deps_hat.dims() != tape.x_dims) {
    throw std::invalid_argument("unet_backward: upstream gradient shape " +
                                dloss_deps_hat.shape_string() + " does not match the forward output");
  }
  TensorTable grads;
  for (const auto& [name, t] : tape.params->weights) grads.emplace(name, Tensor(t.dims()));
  const std::size_t item = element_count(tape.x_dims) / tape.x_dims[0];
  for (std::size_t n = 0; n < tape.items.size(); ++n) {
    item_backward(tape.params->weights, grads, tape.cfg, tape.items[n],
                  dloss_deps_hat.data() + n * item);
  }
  return grads;
}

}  // namespace usdiff
