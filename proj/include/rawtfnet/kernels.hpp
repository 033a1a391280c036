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
#include <cstdint>
#include <vector>

#include "rawtfnet/tensor.hpp"

namespace rawtfnet {

// Hyperparameters of a (grouped, dilated, strided) 2D cross-correlation.
// Depthwise: groups == in_channels. Pointwise: 1x1 kernel.
struct Conv2dGeometry {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
  std::size_t dilation_h = 1;
  std::size_t dilation_w = 1;
  std::size_t groups = 1;

  /// Throws ConfigError on divisibility or zero-size violations.
  void validate() const;
  std::size_t in_per_group() const { return in_channels / groups; }
  std::size_t out_per_group() const { return out_channels / groups; }
  /// floor((H + 2p - d(K-1) - 1) / s) + 1; throws DimensionError if < 1.
  std::size_t out_h(std::size_t h) const;
  std::size_t out_w(std::size_t w) const;
  Shape weight_shape() const { return {out_channels, in_per_group(), kernel_h, kernel_w}; }
  /// Cout * (Cin/groups) * Kh * Kw * Hout * Wout for one sample.
  std::uint64_t macs(std::size_t h, std::size_t w) const;
};

// 1D convolution over [N, C, L]; run through the 2D kernels with height 1.
struct Conv1dGeometry {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t dilation = 1;
  std::size_t groups = 1;

  Conv2dGeometry as_2d() const;
  std::size_t out_len(std::size_t len) const { return as_2d().out_w(len); }
  Shape weight_shape() const { return {out_channels, in_channels / groups, kernel}; }
  std::uint64_t macs(std::size_t len) const { return as_2d().macs(1, len); }
};

struct PoolGeometry {
  std::size_t window_h = 2;
  std::size_t window_w = 2;
  std::size_t stride_h = 2;
  std::size_t stride_w = 2;

  std::size_t out_h(std::size_t h) const;
  std::size_t out_w(std::size_t w) const;
};

// Production kernels. Outer loops are OpenMP-parallel over independent
// output planes, so results do not depend on the thread count. Tensors are
// NCHW.
namespace kernels {

/// y[n,co] = bias[co] + sum over group inputs of w * x. `bias` may be empty.
Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                      const Conv2dGeometry& g);
/// dL/dx given dL/dy.
Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& weight,
                             const Conv2dGeometry& g, const Shape& input_shape);
/// Accumulates dL/dw into grad_weight and, if non-null, dL/db into grad_bias.
void conv2d_backward_params(const Tensor& x, const Tensor& grad_out, const Conv2dGeometry& g,
                            Tensor& grad_weight, Tensor* grad_bias);

/// [N, Cin, L] -> [N, Cout, L'] through the 2D kernels.
Tensor conv1d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                      const Conv1dGeometry& g);
Tensor conv1d_backward_input(const Tensor& grad_out, const Tensor& weight,
                             const Conv1dGeometry& g, const Shape& input_shape);
void conv1d_backward_params(const Tensor& x, const Tensor& grad_out, const Conv1dGeometry& g,
                            Tensor& grad_weight, Tensor* grad_bias);

/// Max over each window (floor semantics). `argmax` receives flat input indices.
Tensor maxpool2d_forward(const Tensor& x, const PoolGeometry& p,
                         std::vector<std::size_t>& argmax);
Tensor maxpool2d_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                          const Shape& input_shape);

}  // namespace kernels

// Naive serial kernels kept as test oracles and benchmark baselines. They pad
// the input explicitly and multiply every tap, so `multiplies` counts exactly
// the MACs a dense implementation performs.
namespace reference {

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const Conv2dGeometry& g, std::uint64_t* multiplies = nullptr);
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const Conv1dGeometry& g, std::uint64_t* multiplies = nullptr);
Tensor maxpool2d(const Tensor& x, const PoolGeometry& p);

}  // namespace reference

}  // namespace rawtfnet
