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
#include <string>

#include "rawtfnet/errors.hpp"
#include "rawtfnet/kernels.hpp"

namespace rawtfnet {

namespace {

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t s, std::size_t p, std::size_t d) {
  const long span = static_cast<long>(d * (k - 1) + 1);
  const long padded = static_cast<long>(in + 2 * p);
  if (padded < span)
    throw DimensionError("convolution kernel span " + std::to_string(span) +
                         " exceeds padded input " + std::to_string(padded));
  return static_cast<std::size_t>((padded - span) / static_cast<long>(s)) + 1;
}

}  // namespace

void Conv2dGeometry::validate() const {
  if (in_channels == 0 || out_channels == 0 || kernel_h == 0 || kernel_w == 0 ||
      stride_h == 0 || stride_w == 0 || dilation_h == 0 || dilation_w == 0 || groups == 0)
    throw ConfigError("convolution sizes, strides, dilations and groups must be positive");
  if (in_channels % groups != 0)
    throw ConfigError("in_channels " + std::to_string(in_channels) +
                      " not divisible by groups " + std::to_string(groups));
  if (out_channels % groups != 0)
    throw ConfigError("out_channels " + std::to_string(out_channels) +
                      " not divisible by groups " + std::to_string(groups));
}

std::size_t Conv2dGeometry::out_h(std::size_t h) const {
  return conv_out(h, kernel_h, stride_h, pad_h, dilation_h);
}

std::size_t Conv2dGeometry::out_w(std::size_t w) const {
  return conv_out(w, kernel_w, stride_w, pad_w, dilation_w);
}

std::uint64_t Conv2dGeometry::macs(std::size_t h, std::size_t w) const {
  return static_cast<std::uint64_t>(out_channels) * in_per_group() * kernel_h * kernel_w *
         out_h(h) * out_w(w);
}

std::size_t PoolGeometry::out_h(std::size_t h) const {
  if (window_h > h)
    throw DimensionError("pool window " + std::to_string(window_h) + " exceeds height " +
                         std::to_string(h));
  return (h - window_h) / stride_h + 1;
}

std::size_t PoolGeometry::out_w(std::size_t w) const {
  if (window_w > w)
    throw DimensionError("pool window " + std::to_string(window_w) + " exceeds width " +
                         std::to_string(w));
  return (w - window_w) / stride_w + 1;
}

Conv2dGeometry Conv1dGeometry::as_2d() const {
  Conv2dGeometry g;
  g.in_channels = in_channels;
  g.out_channels = out_channels;
  g.kernel_w = kernel;
  g.stride_w = stride;
  g.pad_w = pad;
  g.dilation_w = dilation;
  g.groups = groups;
  return g;
}

}  // namespace rawtfnet
