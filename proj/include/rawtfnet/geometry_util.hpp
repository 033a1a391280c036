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


#pragma once

#include <cstddef>

#include "rawtfnet/kernels.hpp"

namespace rawtfnet {

/// 1x1 convolution Cin -> Cout.
inline Conv2dGeometry pointwise(std::size_t in, std::size_t out) {
  Conv2dGeometry g;
  g.in_channels = in;
  g.out_channels = out;
  return g;
}

/// Per-channel Kh x Kw convolution with "same" padding for odd kernels.
inline Conv2dGeometry depthwise(std::size_t channels, std::size_t kh, std::size_t kw,
                                std::size_t dil_h, std::size_t dil_w) {
  Conv2dGeometry g;
  g.in_channels = channels;
  g.out_channels = channels;
  g.groups = channels;
  g.kernel_h = kh;
  g.kernel_w = kw;
  g.dilation_h = dil_h;
  g.dilation_w = dil_w;
  g.pad_h = dil_h * (kh - 1) / 2;
  g.pad_w = dil_w * (kw - 1) / 2;
  return g;
}

}  // namespace rawtfnet
