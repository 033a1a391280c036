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
#include <string>
#include <utility>
#include <vector>

#include "rawtfnet/layers.hpp"

namespace rawtfnet {

// Time-frequency separated convolution block and its building blocks.
//
// Feature maps are NCHW with H = frequency bins and W = time steps; the
// free functions also accept unbatched C x F x T tensors (rank 3).

struct TfConvConfig {
  std::size_t in_channels = 64;
  std::size_t out_channels = 16;  // C'
  bool enable_freq_branch = true;
  bool enable_time_branch = true;
  bool enable_shuffle = true;
  std::size_t shuffle_groups = 2;

  void validate() const;
};

/// out channel o reads input channel perm[o]: reshape (g, C/g), transpose, flatten.
std::vector<std::size_t> shuffle_permutation(std::size_t channels, std::size_t groups);
Tensor channel_shuffle(const Tensor& x, std::size_t groups);
/// Inverse permutation; the gradient of channel_shuffle.
Tensor channel_unshuffle(const Tensor& x, std::size_t groups);

/// First half of the channels -> frequency path, second half -> time path.
std::pair<Tensor, Tensor> split_channels(const Tensor& x);

/// out[c,i,j] = x[c,i,j] + v[c,0,j] (v copied across frequency).
Tensor broadcast_add_freq(const Tensor& x, const Tensor& v);
/// out[c,i,j] = x[c,i,j] + v[c,i,0] (v copied across time).
Tensor broadcast_add_time(const Tensor& x, const Tensor& v);
/// Gradient w.r.t. v of the broadcast adds: sum over the broadcast axis.
Tensor broadcast_freq_grad(const Tensor& grad_out);
Tensor broadcast_time_grad(const Tensor& grad_out);

// Depthwise conv along one axis (3x1 for frequency, 1x3 for time) + BN + ReLU,
// mean over that axis, pointwise conv + BN. Produces the compact vector that
// is broadcast back onto the branch input.
class AxisBranch {
 public:
  enum class Axis { frequency, time };

  AxisBranch() = default;
  AxisBranch(std::string name, std::size_t channels, Axis axis, Rng& rng);

  /// x [N,c,F,T] -> v [N,c,1,T] (frequency) or [N,c,F,1] (time).
  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_v);
  void collect(ParamList& out);
  Shape cost(const Shape& in, CostRows& rows) const;
  Axis axis() const { return axis_; }

  Conv2d dw, pw;
  BatchNorm2d bn_dw, bn_pw;

 private:
  std::size_t pooled_axis() const { return axis_ == Axis::frequency ? 2 : 3; }

  Axis axis_ = Axis::frequency;
  Relu relu_;
  std::size_t pooled_extent_ = 0;
};

Tensor freq_branch(AxisBranch& branch, const Tensor& x_f, Mode mode);
Tensor time_branch(AxisBranch& branch, const Tensor& x_t, Mode mode);

// Transition 1x1 (C -> C') + BN + ReLU, optional channel shuffle, split,
// per-axis branches with broadcast residual addition, concat (freq first).
// A disabled branch is dropped; its half of the channels passes through
// unchanged, so the variant loses exactly that branch's parameters.
class TfConvBlock {
 public:
  TfConvBlock() = default;
  TfConvBlock(std::string name, const TfConvConfig& cfg, Rng& rng);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_out);
  void collect(ParamList& out);
  Shape cost(const Shape& in, CostRows& rows) const;

  const TfConvConfig& config() const { return cfg_; }
  /// Post-transition (and post-shuffle) map from the last forward call.
  const Tensor& branch_input() const { return mixed_; }

  Conv2d transition;
  BatchNorm2d bn_transition;
  AxisBranch freq;
  AxisBranch time;

 private:
  std::string name_;
  TfConvConfig cfg_;
  Relu relu_;
  Tensor mixed_;
};

}  // namespace rawtfnet
