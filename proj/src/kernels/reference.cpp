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

namespace rawtfnet::reference {

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const Conv2dGeometry& g, std::uint64_t* multiplies) {
  g.validate();
  if (x.rank() != 4 || x.shape()[1] != g.in_channels)
    throw DimensionError("reference conv2d input " + shape_str(x.shape()));
  if (weight.shape() != g.weight_shape())
    throw DimensionError("reference conv2d weight " + shape_str(weight.shape()));
  const std::size_t N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  const std::size_t HP = H + 2 * g.pad_h, WP = W + 2 * g.pad_w;

  Tensor padded({N, C, HP, WP});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j)
          padded.at({n, c, i + g.pad_h, j + g.pad_w}) = x.at({n, c, i, j});

  const std::size_t OH = g.out_h(H), OW = g.out_w(W);
  const std::size_t cin_g = g.in_per_group(), cout_g = g.out_per_group();
  Tensor y({N, g.out_channels, OH, OW});
  std::uint64_t count = 0;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[co];
          const std::size_t grp = co / cout_g;
          for (std::size_t cig = 0; cig < cin_g; ++cig)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                acc += weight.at({co, cig, ky, kx}) *
                       padded.at({n, grp * cin_g + cig, oy * g.stride_h + ky * g.dilation_h,
                                  ox * g.stride_w + kx * g.dilation_w});
                ++count;
              }
          y.at({n, co, oy, ox}) = acc;
        }
  if (multiplies) *multiplies = count;
  return y;
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const Conv1dGeometry& g, std::uint64_t* multiplies) {
  g.as_2d().validate();
  if (x.rank() != 3 || x.shape()[1] != g.in_channels)
    throw DimensionError("reference conv1d input " + shape_str(x.shape()));
  if (weight.shape() != g.weight_shape())
    throw DimensionError("reference conv1d weight " + shape_str(weight.shape()));
  const std::size_t N = x.shape()[0], L = x.shape()[2];
  const std::size_t OL = g.out_len(L);
  const std::size_t cin_g = g.in_channels / g.groups, cout_g = g.out_channels / g.groups;
  Tensor y({N, g.out_channels, OL});
  std::uint64_t count = 0;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t o = 0; o < OL; ++o) {
        double acc = bias.empty() ? 0.0 : bias[co];
        const std::size_t grp = co / cout_g;
        for (std::size_t cig = 0; cig < cin_g; ++cig)
          for (std::size_t k = 0; k < g.kernel; ++k) {
            const std::size_t pos = o * g.stride + k * g.dilation;  // in padded coordinates
            const double xv = pos < g.pad || pos >= g.pad + L
                                  ? 0.0
                                  : x.at({n, grp * cin_g + cig, pos - g.pad});
            acc += weight.at({co, cig, k}) * xv;
            ++count;
          }
        y.at({n, co, o}) = acc;
      }
  if (multiplies) *multiplies = count;
  return y;
}

Tensor maxpool2d(const Tensor& x, const PoolGeometry& p) {
  if (x.rank() != 4) throw DimensionError("reference maxpool2d expects NCHW");
  const std::size_t N = x.shape()[0], C = x.shape()[1];
  const std::size_t OH = p.out_h(x.shape()[2]), OW = p.out_w(x.shape()[3]);
  Tensor y({N, C, OH, OW});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          for (std::size_t ky = 0; ky < p.window_h; ++ky)
            for (std::size_t kx = 0; kx < p.window_w; ++kx)
              best = std::max(best, x.at({n, c, oy * p.stride_h + ky, ox * p.stride_w + kx}));
          y.at({n, c, oy, ox}) = best;
        }
  return y;
}

}  // namespace rawtfnet::reference
