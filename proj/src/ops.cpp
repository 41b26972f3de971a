#include "hygnn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

#include "hygnn/detail/autograd.hpp"

namespace hygnn {

using detail::input_value;
using detail::make_result;
using detail::Node;
using GradIn = std::span<std::span<double>>;
using GradOut = std::span<const double>;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(t.shape()));
  }
}

template <typename F, typename G>
Tensor unary(const char* name, const Tensor& x, F forward, G derivative) {
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  return make_result(name, x.shape(), std::move(out), {x},
                     [derivative](const Node& self, GradOut g, GradIn gin) {
                       auto xin = input_value(self, 0);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         gin[0][i] += g[i] * derivative(xin[i], self.value[i]);
                       }
                     });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result("add", a.shape(), std::move(out), {a, b},
                     [](const Node&, GradOut g, GradIn gin) {
                       for (auto& dst : gin) {
                         if (dst.empty()) continue;
                         for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result("sub", a.shape(), std::move(out), {a, b},
                     [](const Node&, GradOut g, GradIn gin) {
                       if (!gin[0].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                       if (!gin[1].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] -= g[i];
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result("mul", a.shape(), std::move(out), {a, b},
                     [](const Node& self, GradOut g, GradIn gin) {
                       auto x = input_value(self, 0), y = input_value(self, 1);
                       if (!gin[0].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * y[i];
                       if (!gin[1].empty())
                         for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] += g[i] * x[i];
                     });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor one_minus(const Tensor& x) {
  return unary(
      "one_minus", x, [](double v) { return 1.0 - v; }, [](double, double) { return -1.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result("sum", {1}, {s}, {x}, [](const Node&, GradOut g, GradIn gin) {
    for (auto& v : gin[0]) v += g[0];
  });
}

Tensor mean(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  const double n = static_cast<double>(x.numel());
  return make_result("mean", {1}, {s / n}, {x}, [n](const Node&, GradOut g, GradIn gin) {
    for (auto& v : gin[0]) v += g[0] / n;
  });
}

Tensor gate_channels(const Tensor& weight_map, const Tensor& x) {
  require_rank(x, 4, "gate_channels");
  require_rank(weight_map, 4, "gate_channels");
  const auto B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  if (weight_map.shape() != Shape{B, 1, x.dim(2), x.dim(3)}) {
    throw ShapeError("gate_channels: weight map " + to_string(weight_map.shape()) +
                     " does not broadcast over " + to_string(x.shape()));
  }
  auto w = weight_map.data(), v = x.data();
  std::vector<double> out(v.size());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < HW; ++p)
        out[(b * C + c) * HW + p] = w[b * HW + p] * v[(b * C + c) * HW + p];
  return make_result("gate_channels", x.shape(), std::move(out), {weight_map, x},
                     [B, C, HW](const Node& self, GradOut g, GradIn gin) {
                       auto w = input_value(self, 0), v = input_value(self, 1);
                       for (std::size_t b = 0; b < B; ++b)
                         for (std::size_t c = 0; c < C; ++c)
                           for (std::size_t p = 0; p < HW; ++p) {
                             const auto i = (b * C + c) * HW + p;
                             if (!gin[0].empty()) gin[0][b * HW + p] += g[i] * v[i];
                             if (!gin[1].empty()) gin[1][i] += g[i] * w[b * HW + p];
                           }
                     });
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

struct ConvGeometry {
  std::size_t batch, cin, h, w, cout, kh, kw, stride, pad, dil, oh, ow;

  std::size_t patch() const { return cin * kh * kw; }
  std::size_t out_pixels() const { return oh * ow; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

void im2col(const double* img, const ConvGeometry& g, double* cols) {
  const auto opix = g.out_pixels();
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        double* row = cols + ((c * g.kh + ky) * g.kw + kx) * opix;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky * g.dil) -
                          static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx * g.dil) -
                            static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.h) &&
                                ix < static_cast<std::ptrdiff_t>(g.w);
            row[oy * g.ow + ox] = inside ? img[(c * g.h + iy) * g.w + ix] : 0.0;
          }
        }
      }
}

void col2im(const double* cols, const ConvGeometry& g, double* img) {
  const auto opix = g.out_pixels();
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const double* row = cols + ((c * g.kh + ky) * g.kw + kx) * opix;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky * g.dil) -
                          static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx * g.dil) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            img[(c * g.h + iy) * g.w + ix] += row[oy * g.ow + ox];
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvParams& params) {
  require_rank(input, 4, "conv2d");
  require_rank(params.kernel, 4, "conv2d kernel");
  if (params.stride == 0 || params.dilation == 0) {
    throw ShapeError("conv2d: stride and dilation must be positive");
  }
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.cin = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.cout = params.kernel.dim(0);
  g.kh = params.kernel.dim(2);
  g.kw = params.kernel.dim(3);
  g.stride = params.stride;
  g.pad = params.padding;
  g.dil = params.dilation;
  if (params.kernel.dim(1) != g.cin) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(params.kernel.dim(1)) +
                     " input channels, input has " + std::to_string(g.cin));
  }
  if (params.bias.shape() != Shape{g.cout}) {
    throw ShapeError("conv2d: bias shape " + to_string(params.bias.shape()) +
                     " does not match " + std::to_string(g.cout) + " output channels");
  }
  const auto span_h = g.dil * (g.kh - 1) + 1, span_w = g.dil * (g.kw - 1) + 1;
  if (g.h + 2 * g.pad < span_h || g.w + 2 * g.pad < span_w) {
    throw ShapeError("conv2d: non-positive output size for input " + to_string(input.shape()));
  }
  g.oh = (g.h + 2 * g.pad - span_h) / g.stride + 1;
  g.ow = (g.w + 2 * g.pad - span_w) / g.stride + 1;

  const auto K = g.patch(), P = g.out_pixels();
  auto x = input.data();
  auto bias = params.bias.data();
  ConstMapMat weight(params.kernel.data().data(), g.cout, K);

  std::vector<double> out(g.batch * g.cout * P);
  std::vector<double> cols(g.pointwise() ? 0 : K * P);
  for (std::size_t b = 0; b < g.batch; ++b) {
    const double* img = x.data() + b * g.cin * g.h * g.w;
    const double* col_ptr = img;
    if (!g.pointwise()) {
      im2col(img, g, cols.data());
      col_ptr = cols.data();
    }
    MapMat y(out.data() + b * g.cout * P, g.cout, P);
    y.noalias() = weight * ConstMapMat(col_ptr, K, P);
    for (std::size_t o = 0; o < g.cout; ++o) y.row(o).array() += bias[o];
  }

  return make_result(
      "conv2d", {g.batch, g.cout, g.oh, g.ow}, std::move(out),
      {input, params.kernel, params.bias}, [g](const Node& self, GradOut grad, GradIn gin) {
        const auto K = g.patch(), P = g.out_pixels();
        auto x = input_value(self, 0);
        ConstMapMat weight(input_value(self, 1).data(), g.cout, K);
        std::vector<double> cols(g.pointwise() ? 0 : K * P);
        std::vector<double> dcols(K * P);
        for (std::size_t b = 0; b < g.batch; ++b) {
          ConstMapMat gy(grad.data() + b * g.cout * P, g.cout, P);
          if (!gin[2].empty()) {
            for (std::size_t o = 0; o < g.cout; ++o) gin[2][o] += gy.row(o).sum();
          }
          const double* img = x.data() + b * g.cin * g.h * g.w;
          if (!gin[1].empty()) {
            const double* col_ptr = img;
            if (!g.pointwise()) {
              im2col(img, g, cols.data());
              col_ptr = cols.data();
            }
            MapMat dw(gin[1].data(), g.cout, K);
            dw.noalias() += gy * ConstMapMat(col_ptr, K, P).transpose();
          }
          if (!gin[0].empty()) {
            double* dimg = gin[0].data() + b * g.cin * g.h * g.w;
            if (g.pointwise()) {
              MapMat dx(dimg, K, P);
              dx.noalias() += weight.transpose() * gy;
            } else {
              MapMat dc(dcols.data(), K, P);
              dc.noalias() = weight.transpose() * gy;
              col2im(dcols.data(), g, dimg);
            }
          }
        }
      });
}

Tensor max_pool2x2(const Tensor& input) {
  require_rank(input, 4, "max_pool2x2");
  const auto B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (H % 2 || W % 2) throw ShapeError("max_pool2x2: odd spatial size " + to_string(input.shape()));
  const auto oh = H / 2, ow = W / 2;
  auto x = input.data();
  std::vector<double> out(B * C * oh * ow);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  for (std::size_t bc = 0; bc < B * C; ++bc)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (bc * H + 2 * oy) * W + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const auto idx = (bc * H + 2 * oy + dy) * W + 2 * ox + dx;
            if (x[idx] > x[best]) best = idx;
          }
        const auto o = (bc * oh + oy) * ow + ox;
        out[o] = x[best];
        (*argmax)[o] = best;
      }
  return make_result("max_pool2x2", {B, C, oh, ow}, std::move(out), {input},
                     [argmax](const Node&, GradOut g, GradIn gin) {
                       for (std::size_t o = 0; o < g.size(); ++o) gin[0][(*argmax)[o]] += g[o];
                     });
}

Tensor adaptive_avg_pool(const Tensor& input, std::size_t bins) {
  require_rank(input, 4, "adaptive_avg_pool");
  const auto B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (bins == 0 || bins > H || bins > W) {
    throw ShapeError("adaptive_avg_pool: " + std::to_string(bins) + " bins for spatial size " +
                     std::to_string(H) + "x" + std::to_string(W));
  }
  auto window = [bins](std::size_t i, std::size_t n) {
    return std::pair{(i * n) / bins, ((i + 1) * n + bins - 1) / bins};
  };
  auto x = input.data();
  std::vector<double> out(B * C * bins * bins);
  for (std::size_t bc = 0; bc < B * C; ++bc)
    for (std::size_t i = 0; i < bins; ++i)
      for (std::size_t j = 0; j < bins; ++j) {
        auto [y0, y1] = window(i, H);
        auto [x0, x1] = window(j, W);
        double s = 0.0;
        for (auto y = y0; y < y1; ++y)
          for (auto xx = x0; xx < x1; ++xx) s += x[(bc * H + y) * W + xx];
        out[(bc * bins + i) * bins + j] = s / static_cast<double>((y1 - y0) * (x1 - x0));
      }
  return make_result("adaptive_avg_pool", {B, C, bins, bins}, std::move(out), {input},
                     [=](const Node&, GradOut g, GradIn gin) {
                       for (std::size_t bc = 0; bc < B * C; ++bc)
                         for (std::size_t i = 0; i < bins; ++i)
                           for (std::size_t j = 0; j < bins; ++j) {
                             auto [y0, y1] = window(i, H);
                             auto [x0, x1] = window(j, W);
                             const double share = g[(bc * bins + i) * bins + j] /
                                                  static_cast<double>((y1 - y0) * (x1 - x0));
                             for (auto y = y0; y < y1; ++y)
                               for (auto xx = x0; xx < x1; ++xx)
                                 gin[0][(bc * H + y) * W + xx] += share;
                           }
                     });
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;  // weight of hi
};

std::vector<Tap> corner_aligned_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  for (std::size_t o = 0; o < out; ++o) {
    if (in == 1 || out == 1) {
      taps[o] = {0, 0, 0.0};
      continue;
    }
    if (in == out) {
      taps[o] = {o, o, 0.0};
      continue;
    }
    const double src = static_cast<double>(o) * static_cast<double>(in - 1) /
                       static_cast<double>(out - 1);
    auto lo = std::min(static_cast<std::size_t>(std::floor(src)), in - 1);
    auto hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

inline double lerp(double a, double b, double t) { return a + (b - a) * t; }

}  // namespace

Tensor bilinear_resize(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  require_rank(input, 4, "bilinear_resize");
  if (out_h == 0 || out_w == 0) throw ShapeError("bilinear_resize: target size must be positive");
  const auto B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  auto ty = corner_aligned_taps(H, out_h);
  auto tx = corner_aligned_taps(W, out_w);
  auto x = input.data();
  std::vector<double> out(B * C * out_h * out_w);
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const double* src = x.data() + bc * H * W;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const auto& a = ty[oy];
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const auto& b = tx[ox];
        // lerp form keeps constant maps exactly constant
        const double top = lerp(src[a.lo * W + b.lo], src[a.lo * W + b.hi], b.frac);
        const double bot = lerp(src[a.hi * W + b.lo], src[a.hi * W + b.hi], b.frac);
        out[(bc * out_h + oy) * out_w + ox] = lerp(top, bot, a.frac);
      }
    }
  }
  return make_result("bilinear_resize", {B, C, out_h, out_w}, std::move(out), {input},
                     [=](const Node&, GradOut g, GradIn gin) {
                       for (std::size_t bc = 0; bc < B * C; ++bc) {
                         double* dst = gin[0].data() + bc * H * W;
                         for (std::size_t oy = 0; oy < out_h; ++oy) {
                           const auto& a = ty[oy];
                           for (std::size_t ox = 0; ox < out_w; ++ox) {
                             const auto& b = tx[ox];
                             const double v = g[(bc * out_h + oy) * out_w + ox];
                             dst[a.lo * W + b.lo] += v * (1.0 - a.frac) * (1.0 - b.frac);
                             dst[a.lo * W + b.hi] += v * (1.0 - a.frac) * b.frac;
                             dst[a.hi * W + b.lo] += v * a.frac * (1.0 - b.frac);
                             dst[a.hi * W + b.hi] += v * a.frac * b.frac;
                           }
                         }
                       }
                     });
}

Tensor pyramid_pool(const Tensor& input, std::size_t bins) {
  require_rank(input, 4, "pyramid_pool");
  const auto H = input.dim(2), W = input.dim(3);
  if (bins == 0 || bins > std::min(H, W)) {
    throw ShapeError("pyramid_pool: " + std::to_string(bins) + " bins exceed spatial size " +
                     std::to_string(H) + "x" + std::to_string(W));
  }
  return bilinear_resize(adaptive_avg_pool(input, bins), H, W);
}

Tensor concat_channels(const std::vector<Tensor>& inputs) {
  if (inputs.empty()) throw ShapeError("concat_channels: no inputs");
  for (const auto& t : inputs) require_rank(t, 4, "concat_channels");
  const auto B = inputs[0].dim(0), H = inputs[0].dim(2), W = inputs[0].dim(3);
  std::vector<std::size_t> channels;
  std::size_t total = 0;
  for (const auto& t : inputs) {
    if (t.dim(0) != B || t.dim(2) != H || t.dim(3) != W) {
      throw ShapeError("concat_channels: " + to_string(t.shape()) + " incompatible with " +
                       to_string(inputs[0].shape()));
    }
    channels.push_back(t.dim(1));
    total += t.dim(1);
  }
  const auto HW = H * W;
  std::vector<double> out(B * total * HW);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto v = inputs[k].data();
    for (std::size_t b = 0; b < B; ++b)
      std::copy_n(v.data() + b * channels[k] * HW, channels[k] * HW,
                  out.data() + (b * total + offset) * HW);
    offset += channels[k];
  }
  return make_result("concat_channels", {B, total, H, W}, std::move(out), inputs,
                     [=](const Node&, GradOut g, GradIn gin) {
                       std::size_t offset = 0;
                       for (std::size_t k = 0; k < gin.size(); ++k) {
                         if (!gin[k].empty()) {
                           for (std::size_t b = 0; b < B; ++b) {
                             const double* src = g.data() + (b * total + offset) * HW;
                             double* dst = gin[k].data() + b * channels[k] * HW;
                             for (std::size_t i = 0; i < channels[k] * HW; ++i) dst[i] += src[i];
                           }
                         }
                         offset += channels[k];
                       }
                     });
}

Tensor dynamic_conv(const Tensor& input, const Tensor& kernel) {
  require_rank(input, 4, "dynamic_conv");
  require_rank(kernel, 5, "dynamic_conv kernel");
  const auto B = input.dim(0), C = input.dim(1), HW = input.dim(2) * input.dim(3);
  if (kernel.dim(0) != B) {
    throw ShapeError("dynamic_conv: kernel batch " + std::to_string(kernel.dim(0)) +
                     " does not match input batch " + std::to_string(B));
  }
  if (kernel.shape() != Shape{B, C, C, 1, 1}) {
    throw ShapeError("dynamic_conv: kernel " + to_string(kernel.shape()) + " for input " +
                     to_string(input.shape()));
  }
  auto x = input.data(), k = kernel.data();
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < C; ++o) {
      double* dst = out.data() + (b * C + o) * HW;
      for (std::size_t c = 0; c < C; ++c) {
        const double w = k[(b * C + o) * C + c];
        const double* src = x.data() + (b * C + c) * HW;
        for (std::size_t p = 0; p < HW; ++p) dst[p] += w * src[p];
      }
    }
  return make_result("dynamic_conv", input.shape(), std::move(out), {input, kernel},
                     [B, C, HW](const Node& self, GradOut g, GradIn gin) {
                       auto x = input_value(self, 0), k = input_value(self, 1);
                       for (std::size_t b = 0; b < B; ++b)
                         for (std::size_t o = 0; o < C; ++o) {
                           const double* go = g.data() + (b * C + o) * HW;
                           for (std::size_t c = 0; c < C; ++c) {
                             const auto ki = (b * C + o) * C + c;
                             const double* src = x.data() + (b * C + c) * HW;
                             if (!gin[1].empty()) {
                               double acc = 0.0;
                               for (std::size_t p = 0; p < HW; ++p) acc += go[p] * src[p];
                               gin[1][ki] += acc;
                             }
                             if (!gin[0].empty()) {
                               double* dx = gin[0].data() + (b * C + c) * HW;
                               for (std::size_t p = 0; p < HW; ++p) dx[p] += k[ki] * go[p];
                             }
                           }
                         }
                     });
}

Tensor global_avg_pool(const Tensor& input) {
  require_rank(input, 4, "global_avg_pool");
  const auto B = input.dim(0), C = input.dim(1), HW = input.dim(2) * input.dim(3);
  auto x = input.data();
  std::vector<double> out(B * C);
  for (std::size_t i = 0; i < B * C; ++i) {
    double s = 0.0;
    for (std::size_t p = 0; p < HW; ++p) s += x[i * HW + p];
    out[i] = s / static_cast<double>(HW);
  }
  return make_result("global_avg_pool", {B, C}, std::move(out), {input},
                     [B, C, HW](const Node&, GradOut g, GradIn gin) {
                       for (std::size_t i = 0; i < B * C; ++i)
                         for (std::size_t p = 0; p < HW; ++p)
                           gin[0][i * HW + p] += g[i] / static_cast<double>(HW);
                     });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear weight");
  const auto B = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in || bias.shape() != Shape{out_dim}) {
    throw ShapeError("linear: weight " + to_string(weight.shape()) + " / bias " +
                     to_string(bias.shape()) + " incompatible with input " + to_string(x.shape()));
  }
  auto xv = x.data(), w = weight.data(), bv = bias.data();
  std::vector<double> out(B * out_dim);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < out_dim; ++o) {
      double acc = bv[o];
      for (std::size_t i = 0; i < in; ++i) acc += w[o * in + i] * xv[b * in + i];
      out[b * out_dim + o] = acc;
    }
  return make_result("linear", {B, out_dim}, std::move(out), {x, weight, bias},
                     [B, in, out_dim](const Node& self, GradOut g, GradIn gin) {
                       auto xv = input_value(self, 0), w = input_value(self, 1);
                       for (std::size_t b = 0; b < B; ++b)
                         for (std::size_t o = 0; o < out_dim; ++o) {
                           const double go = g[b * out_dim + o];
                           if (!gin[2].empty()) gin[2][o] += go;
                           for (std::size_t i = 0; i < in; ++i) {
                             if (!gin[0].empty()) gin[0][b * in + i] += go * w[o * in + i];
                             if (!gin[1].empty()) gin[1][o * in + i] += go * xv[b * in + i];
                           }
                         }
                     });
}

namespace {

Tensor squared_error(const char* name, const Tensor& pred, const Tensor& target, bool average) {
  require_same_shape(pred, target, name);
  if (target.requires_grad()) {
    throw AutogradError(std::string(name) + ": target must not require a gradient");
  }
  auto p = pred.data(), t = target.data();
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    s += d * d;
  }
  const double norm = average ? static_cast<double>(p.size()) : 1.0;
  return make_result(name, {1}, {s / norm}, {pred, target},
                     [norm](const Node& self, GradOut g, GradIn gin) {
                       auto p = input_value(self, 0), t = input_value(self, 1);
                       for (std::size_t i = 0; i < p.size(); ++i)
                         gin[0][i] += g[0] * 2.0 * (p[i] - t[i]) / norm;
                     });
}

}  // namespace

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  return squared_error("mse_loss", pred, target, true);
}

Tensor sse_loss(const Tensor& pred, const Tensor& target) {
  return squared_error("sse_loss", pred, target, false);
}

Tensor conv_gru_step(const Tensor& state, const Tensor& input, const ConvGruParams& params) {
  require_same_shape(state, input, "conv_gru_step");
  require_rank(state, 4, "conv_gru_step");
  auto joint = concat_channels({state, input});
  auto z = sigmoid(conv2d(joint, params.update));
  auto r = sigmoid(conv2d(joint, params.reset));
  auto cand = hygnn::tanh(conv2d(concat_channels({mul(r, state), input}), params.candidate));
  if (z.shape() != state.shape() || cand.shape() != state.shape()) {
    throw ShapeError("conv_gru_step: gate convolutions must preserve " + to_string(state.shape()));
  }
  return add(mul(one_minus(z), state), mul(z, cand));
}

}  // namespace hygnn
