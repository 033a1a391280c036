// Copyright 2026 The RawTFNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <algorithm>
#include <limits>

#include "rawtfnet/errors.hpp"
#include "rawtfnet/kernels.hpp"

namespace rawtfnet::kernels {

namespace {

struct Dims {
  std::size_t n, c, h, w;
};

Dims dims4(const Tensor& x, const char* what) {
  if (x.rank() != 4)
    throw DimensionError(std::string(what) + " expects NCHW, got " + shape_str(x.shape()));
  return {x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]};
}

// Output columns [lo, hi) whose input column ox*stride + off lies in [0, extent).
struct Range {
  long lo, hi;
};

Range valid_range(long off, long stride, long extent, long out_extent) {
  long lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  long hi = extent - 1 - off < 0 ? 0 : (extent - 1 - off) / stride + 1;
  hi = std::min(hi, out_extent);
  return {std::min(lo, hi), hi};
}

}  // namespace

namespace {

constexpr long kTile = 256;  // doubles per output tile; keeps accumulators in L1

struct ConvParams {
  long n, cin, cout, cin_g, cout_g, H, W, oh, ow, KH, KW, sh, sw, ph, pw, dh, dw;
  bool pointwise;
};

ConvParams conv_params(const Conv2dGeometry& g, const Dims& in, long oh, long ow) {
  ConvParams p{};
  p.n = static_cast<long>(in.n);
  p.cin = static_cast<long>(in.c);
  p.cout = static_cast<long>(g.out_channels);
  p.cin_g = static_cast<long>(g.in_per_group());
  p.cout_g = static_cast<long>(g.out_per_group());
  p.H = static_cast<long>(in.h);
  p.W = static_cast<long>(in.w);
  p.oh = oh;
  p.ow = ow;
  p.KH = static_cast<long>(g.kernel_h);
  p.KW = static_cast<long>(g.kernel_w);
  p.sh = static_cast<long>(g.stride_h);
  p.sw = static_cast<long>(g.stride_w);
  p.ph = static_cast<long>(g.pad_h);
  p.pw = static_cast<long>(g.pad_w);
  p.dh = static_cast<long>(g.dilation_h);
  p.dw = static_cast<long>(g.dilation_w);
  p.pointwise = p.KH == 1 && p.KW == 1 && p.sh == 1 && p.sw == 1 && p.ph == 0 && p.pw == 0;
  return p;
}

// dst[0, len) += w * src[off + stride * i]
inline void axpy_strided(double* dst, const double* src, double w, long len, long stride) {
  if (stride == 1) {
    for (long i = 0; i < len; ++i) dst[i] += w * src[i];
  } else {
    for (long i = 0; i < len; ++i) dst[i] += w * src[i * stride];
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                      const Conv2dGeometry& g) {
  g.validate();
  const Dims in = dims4(x, "conv2d");
  if (in.c != g.in_channels)
    throw DimensionError("conv2d expects " + std::to_string(g.in_channels) +
                         " input channels, got " + std::to_string(in.c));
  if (weight.shape() != g.weight_shape())
    throw DimensionError("conv2d weight shape " + shape_str(weight.shape()) + ", expected " +
                         shape_str(g.weight_shape()));
  const bool has_bias = !bias.empty();
  if (has_bias && bias.size() != g.out_channels) throw DimensionError("conv2d bias size");

  const long oh = static_cast<long>(g.out_h(in.h));
  const long ow = static_cast<long>(g.out_w(in.w));
  const ConvParams p = conv_params(g, in, oh, ow);
  Tensor y({in.n, g.out_channels, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  const double* xp = x.data().data();
  const double* wp = weight.data().data();
  const double* bp = has_bias ? bias.data().data() : nullptr;
  double* yp = y.data().data();

  if (p.pointwise) {
    // Tiled GEMM: y[n, :, tile] = W x[n, :, tile].
    const long plane = p.H * p.W;
    const long tiles = (plane + kTile - 1) / kTile;
    const long jobs = p.n * tiles;
#pragma omp parallel for schedule(static)
    for (long job = 0; job < jobs; ++job) {
      const long n = job / tiles;
      const long t0 = (job % tiles) * kTile;
      const long len = std::min(kTile, plane - t0);
      for (long co = 0; co < p.cout; ++co) {
        double* out = yp + (n * p.cout + co) * plane + t0;
        const double b0 = bp ? bp[co] : 0.0;
        for (long i = 0; i < len; ++i) out[i] = b0;
        const long grp = co / p.cout_g;
        const double* wk = wp + co * p.cin_g;
        for (long cig = 0; cig < p.cin_g; ++cig) {
          const double* src = xp + (n * p.cin + grp * p.cin_g + cig) * plane + t0;
          const double wv = wk[cig];
          for (long i = 0; i < len; ++i) out[i] += wv * src[i];
        }
      }
    }
    debug_check_finite(y, "conv2d_forward");
    return y;
  }

  const long col_tiles = (ow + kTile - 1) / kTile;
  const long jobs = p.n * p.cout;
#pragma omp parallel for schedule(static)
  for (long job = 0; job < jobs; ++job) {
    const long n = job / p.cout;
    const long co = job % p.cout;
    const long grp = co / p.cout_g;
    double* out = yp + job * oh * ow;
    const double b0 = bp ? bp[co] : 0.0;
    for (long oy = 0; oy < oh; ++oy) {
      double* orow = out + oy * ow;
      for (long c0 = 0; c0 < col_tiles; ++c0) {
        const long lo = c0 * kTile;
        const long hi = std::min(ow, lo + kTile);
        for (long ox = lo; ox < hi; ++ox) orow[ox] = b0;
        for (long cig = 0; cig < p.cin_g; ++cig) {
          const double* plane = xp + (n * p.cin + grp * p.cin_g + cig) * p.H * p.W;
          const double* wk = wp + (co * p.cin_g + cig) * p.KH * p.KW;
          for (long ky = 0; ky < p.KH; ++ky) {
            const long iy = oy * p.sh - p.ph + ky * p.dh;
            if (iy < 0 || iy >= p.H) continue;
            const double* row = plane + iy * p.W;
            for (long kx = 0; kx < p.KW; ++kx) {
              const long off_x = kx * p.dw - p.pw;
              const Range r = valid_range(off_x, p.sw, p.W, ow);
              const long a = std::max(lo, r.lo), b = std::min(hi, r.hi);
              if (a >= b) continue;
              axpy_strided(orow + a, row + a * p.sw + off_x, wk[ky * p.KW + kx], b - a, p.sw);
            }
          }
        }
      }
    }
  }
  debug_check_finite(y, "conv2d_forward");
  return y;
}

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& weight,
                             const Conv2dGeometry& g, const Shape& input_shape) {
  g.validate();
  Tensor gx(input_shape);
  const Dims in = dims4(gx, "conv2d_backward_input");
  const Dims out = dims4(grad_out, "conv2d_backward_input");
  const long oh = static_cast<long>(out.h), ow = static_cast<long>(out.w);
  if (out.c != g.out_channels || static_cast<long>(g.out_h(in.h)) != oh ||
      static_cast<long>(g.out_w(in.w)) != ow || out.n != in.n)
    throw DimensionError("conv2d_backward_input gradient shape " + shape_str(grad_out.shape()));
  const ConvParams p = conv_params(g, in, oh, ow);
  const double* gp = grad_out.data().data();
  const double* wp = weight.data().data();
  double* gxp = gx.data().data();

  if (p.pointwise) {
    const long plane = p.H * p.W;
    const long tiles = (plane + kTile - 1) / kTile;
    const long jobs = p.n * tiles;
#pragma omp parallel for schedule(static)
    for (long job = 0; job < jobs; ++job) {
      const long n = job / tiles;
      const long t0 = (job % tiles) * kTile;
      const long len = std::min(kTile, plane - t0);
      for (long ci = 0; ci < p.cin; ++ci) {
        double* dst = gxp + (n * p.cin + ci) * plane + t0;
        const long grp = ci / p.cin_g;
        const long cig = ci % p.cin_g;
        for (long col = 0; col < p.cout_g; ++col) {
          const long co = grp * p.cout_g + col;
          const double wv = wp[co * p.cin_g + cig];
          const double* src = gp + (n * p.cout + co) * plane + t0;
          for (long i = 0; i < len; ++i) dst[i] += wv * src[i];
        }
      }
    }
    debug_check_finite(gx, "conv2d_backward_input");
    return gx;
  }

  const long jobs = p.n * p.cin;
#pragma omp parallel for schedule(static)
  for (long job = 0; job < jobs; ++job) {
    const long n = job / p.cin;
    const long ci = job % p.cin;
    const long grp = ci / p.cin_g;
    const long cig = ci % p.cin_g;
    double* plane = gxp + job * p.H * p.W;
    for (long oy = 0; oy < oh; ++oy) {
      for (long col = 0; col < p.cout_g; ++col) {
        const long co = grp * p.cout_g + col;
        const double* grow = gp + ((n * p.cout + co) * oh + oy) * ow;
        const double* wk = wp + (co * p.cin_g + cig) * p.KH * p.KW;
        for (long ky = 0; ky < p.KH; ++ky) {
          const long iy = oy * p.sh - p.ph + ky * p.dh;
          if (iy < 0 || iy >= p.H) continue;
          double* row = plane + iy * p.W;
          for (long kx = 0; kx < p.KW; ++kx) {
            const long off_x = kx * p.dw - p.pw;
            const Range r = valid_range(off_x, p.sw, p.W, ow);
            if (r.lo >= r.hi) continue;
            const double wv = wk[ky * p.KW + kx];
            double* dst = row + r.lo * p.sw + off_x;
            const double* src = grow + r.lo;
            const long len = r.hi - r.lo;
            if (p.sw == 1) {
              for (long i = 0; i < len; ++i) dst[i] += wv * src[i];
            } else {
              for (long i = 0; i < len; ++i) dst[i * p.sw] += wv * src[i];
            }
          }
        }
      }
    }
  }
  debug_check_finite(gx, "conv2d_backward_input");
  return gx;
}

void conv2d_backward_params(const Tensor& x, const Tensor& grad_out, const Conv2dGeometry& g,
                            Tensor& grad_weight, Tensor* grad_bias) {
  g.validate();
  const Dims in = dims4(x, "conv2d_backward_params");
  const Dims out = dims4(grad_out, "conv2d_backward_params");
  if (grad_weight.shape() != g.weight_shape())
    throw DimensionError("conv2d weight gradient shape " + shape_str(grad_weight.shape()));
  const ConvParams p = conv_params(g, in, static_cast<long>(out.h), static_cast<long>(out.w));
  const double* xp = x.data().data();
  const double* gp = grad_out.data().data();
  double* gwp = grad_weight.data().data();
  double* gbp = grad_bias ? grad_bias->data().data() : nullptr;
  const long oh = p.oh, ow = p.ow;

  if (gbp) {
    for (long co = 0; co < p.cout; ++co)
      for (long n = 0; n < p.n; ++n) {
        const double* go = gp + (n * p.cout + co) * oh * ow;
        double s = 0.0;
        for (long i = 0; i < oh * ow; ++i) s += go[i];
        gbp[co] += s;
      }
  }

  if (p.pointwise) {
    // gw[co, cig] = sum_p gy[co, p] x[ci, p], tiled over p.
    const long plane = p.H * p.W;
#pragma omp parallel for schedule(static)
    for (long co = 0; co < p.cout; ++co) {
      const long grp = co / p.cout_g;
      double* gwk = gwp + co * p.cin_g;
      for (long n = 0; n < p.n; ++n) {
        const double* go = gp + (n * p.cout + co) * plane;
        for (long cig = 0; cig < p.cin_g; ++cig) {
          const double* src = xp + (n * p.cin + grp * p.cin_g + cig) * plane;
          double s = 0.0;
          for (long i = 0; i < plane; ++i) s += go[i] * src[i];
          gwk[cig] += s;
        }
      }
    }
    return;
  }

  const long taps = p.KH * p.KW;
#pragma omp parallel for schedule(static)
  for (long co = 0; co < p.cout; ++co) {
    const long grp = co / p.cout_g;
    std::vector<double> acc(static_cast<std::size_t>(p.cin_g * taps), 0.0);
    for (long n = 0; n < p.n; ++n) {
      const double* go = gp + (n * p.cout + co) * oh * ow;
      for (long oy = 0; oy < oh; ++oy) {
        const double* grow = go + oy * ow;
        for (long cig = 0; cig < p.cin_g; ++cig) {
          const double* plane = xp + (n * p.cin + grp * p.cin_g + cig) * p.H * p.W;
          for (long ky = 0; ky < p.KH; ++ky) {
            const long iy = oy * p.sh - p.ph + ky * p.dh;
            if (iy < 0 || iy >= p.H) continue;
            const double* row = plane + iy * p.W;
            for (long kx = 0; kx < p.KW; ++kx) {
              const long off_x = kx * p.dw - p.pw;
              const Range r = valid_range(off_x, p.sw, p.W, ow);
              double s = 0.0;
              if (p.sw == 1) {
                for (long ox = r.lo; ox < r.hi; ++ox) s += grow[ox] * row[ox + off_x];
              } else {
                for (long ox = r.lo; ox < r.hi; ++ox) s += grow[ox] * row[ox * p.sw + off_x];
              }
              acc[static_cast<std::size_t>(cig * taps + ky * p.KW + kx)] += s;
            }
          }
        }
      }
    }
    double* gwk = gwp + co * p.cin_g * taps;
    for (long i = 0; i < p.cin_g * taps; ++i) gwk[i] += acc[static_cast<std::size_t>(i)];
  }
}

namespace {

Shape as_4d(const Shape& s, const char* what) {
  if (s.size() != 3) throw DimensionError(std::string(what) + " expects [N, C, L], got " + shape_str(s));
  return {s[0], s[1], 1, s[2]};
}

}  // namespace

Tensor conv1d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                      const Conv1dGeometry& g) {
  if (weight.shape() != g.weight_shape())
    throw DimensionError("conv1d weight shape " + shape_str(weight.shape()) + ", expected " +
                         shape_str(g.weight_shape()));
  const Conv2dGeometry g2 = g.as_2d();
  Tensor y = conv2d_forward(reshape(x, as_4d(x.shape(), "conv1d")),
                            reshape(weight, g2.weight_shape()), bias, g2);
  return reshape(y, {y.shape()[0], y.shape()[1], y.shape()[3]});
}

Tensor conv1d_backward_input(const Tensor& grad_out, const Tensor& weight,
                             const Conv1dGeometry& g, const Shape& input_shape) {
  const Conv2dGeometry g2 = g.as_2d();
  Tensor gx = conv2d_backward_input(reshape(grad_out, as_4d(grad_out.shape(), "conv1d")),
                                    reshape(weight, g2.weight_shape()), g2,
                                    as_4d(input_shape, "conv1d"));
  return reshape(gx, input_shape);
}

void conv1d_backward_params(const Tensor& x, const Tensor& grad_out, const Conv1dGeometry& g,
                            Tensor& grad_weight, Tensor* grad_bias) {
  const Conv2dGeometry g2 = g.as_2d();
  if (grad_weight.shape() != g.weight_shape())
    throw DimensionError("conv1d weight gradient shape " + shape_str(grad_weight.shape()));
  Tensor gw(g2.weight_shape());
  conv2d_backward_params(reshape(x, as_4d(x.shape(), "conv1d")),
                         reshape(grad_out, as_4d(grad_out.shape(), "conv1d")), g2, gw, grad_bias);
  auto dst = grad_weight.data();
  const auto src = gw.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor maxpool2d_forward(const Tensor& x, const PoolGeometry& p,
                         std::vector<std::size_t>& argmax) {
  const Dims in = dims4(x, "maxpool2d");
  const std::size_t oh = p.out_h(in.h), ow = p.out_w(in.w);
  Tensor y({in.n, in.c, oh, ow});
  argmax.assign(y.size(), 0);
  const double* xp = x.data().data();
  double* yp = y.data().data();
  const long planes = static_cast<long>(in.n * in.c);

#pragma omp parallel for schedule(static)
  for (long pl = 0; pl < planes; ++pl) {
    const std::size_t base = static_cast<std::size_t>(pl) * in.h * in.w;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_i = base;
        for (std::size_t ky = 0; ky < p.window_h; ++ky)
          for (std::size_t kx = 0; kx < p.window_w; ++kx) {
            const std::size_t i = base + (oy * p.stride_h + ky) * in.w + ox * p.stride_w + kx;
            if (xp[i] > best) {
              best = xp[i];
              best_i = i;
            }
          }
        const std::size_t o = (static_cast<std::size_t>(pl) * oh + oy) * ow + ox;
        yp[o] = best;
        argmax[o] = best_i;
      }
  }
  return y;
}

Tensor maxpool2d_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                          const Shape& input_shape) {
  if (argmax.size() != grad_out.size())
    throw StateError("maxpool2d backward without matching forward");
  Tensor gx(input_shape);
  auto g = grad_out.data();
  auto dst = gx.data();
  // Windows may overlap when stride < window, so this stays serial.
  for (std::size_t o = 0; o < g.size(); ++o) dst[argmax[o]] += g[o];
  return gx;
}

}  // namespace rawtfnet::kernels
