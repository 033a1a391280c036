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
#include <string>
#include <vector>

#include "rawtfnet/kernels.hpp"
#include "rawtfnet/tensor.hpp"

namespace rawtfnet {

enum class Mode { train, eval };

// A named tensor owned by a layer. Trainable tensors receive gradients;
// non-trainable ones (BN running statistics) are state that is checkpointed
// but never optimized.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, Tensor v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), trainable(train) {}
};

using ParamList = std::vector<Param*>;

/// One row of a complexity report.
struct LayerCost {
  std::string name;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};
using CostRows = std::vector<LayerCost>;

/// Sum of trainable scalars in `params`.
std::uint64_t trainable_count(const ParamList& params);

class Conv2d {
 public:
  Conv2d() = default;
  /// He-uniform weights (bound sqrt(6 / fan_in)), zero bias.
  Conv2d(std::string name, const Conv2dGeometry& geometry, bool with_bias, Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out, bool need_input_grad = true);
  void collect(ParamList& out);
  /// Appends this layer's row; returns the output shape for NCHW input `in`.
  Shape cost(const Shape& in, CostRows& rows) const;

  const Conv2dGeometry& geometry() const { return geom_; }
  bool has_bias() const { return has_bias_; }

  Param weight;
  Param bias;

 private:
  Conv2dGeometry geom_;
  bool has_bias_ = false;
  Tensor input_;
  bool cached_ = false;
};

// 1D convolution over [N, C, L].
class Conv1d {
 public:
  Conv1d() = default;
  /// He-uniform weights (bound sqrt(6 / fan_in)), zero bias.
  Conv1d(std::string name, const Conv1dGeometry& geometry, bool with_bias, Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out, bool need_input_grad = true);
  void collect(ParamList& out);
  /// `in` is [N, C, L]; returns [N, Cout, L'].
  Shape cost(const Shape& in, CostRows& rows) const;

  const Conv1dGeometry& geometry() const { return geom_; }

  Param weight;
  Param bias;

 private:
  Conv1dGeometry geom_;
  bool has_bias_ = false;
  Tensor input_;
  bool cached_ = false;
};

// Per-channel batch normalization over (N, H, W) of an NCHW tensor.
class BatchNorm2d {
 public:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEps = 1e-5;

  BatchNorm2d() = default;
  BatchNorm2d(std::string name, std::size_t channels, double momentum = kMomentum,
              double eps = kEps);

  /// Train mode normalizes with batch statistics and updates the running
  /// estimates (unbiased variance); eval mode uses the running estimates,
  /// which start at mean 0 / variance 1.
  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_out);
  void collect(ParamList& out);
  Shape cost(const Shape& in, CostRows& rows) const;

  Param gamma;
  Param beta;
  Param running_mean;
  Param running_var;

 private:
  std::string name_;
  double momentum_ = kMomentum;
  double eps_ = kEps;
  Mode mode_ = Mode::train;
  Tensor normalized_;
  std::vector<double> inv_std_;
  bool cached_ = false;
};

class Relu {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Tensor output_;
  bool cached_ = false;
};

class MaxPool2d {
 public:
  MaxPool2d() = default;
  MaxPool2d(std::string name, const PoolGeometry& geometry) : name_(std::move(name)), geom_(geometry) {}

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;
  Shape cost(const Shape& in, CostRows& rows) const;
  const PoolGeometry& geometry() const { return geom_; }

 private:
  std::string name_;
  PoolGeometry geom_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
  bool cached_ = false;
};

// Mean over one spatial axis of an NCHW tensor, keeping the axis as size 1.
Tensor mean_over_axis(const Tensor& x, std::size_t axis);
/// Gradient of mean_over_axis: spreads grad/extent back along `axis`.
Tensor mean_over_axis_backward(const Tensor& grad_out, std::size_t axis, std::size_t extent);

// ---------------------------------------------------------------------------
// Sinc band-pass frontend.

struct SincBank {
  std::size_t n_filters = 70;
  std::size_t kernel_len = 129;
  double sample_rate = 16000.0;
  std::vector<double> f_low;   // Hz
  std::vector<double> f_band;  // Hz
};

/// Mel-spaced band edges over [0, sample_rate/2]. The rng is accepted for
/// interface symmetry with other initializers; the layout is deterministic.
SincBank sinc_bank_init(std::size_t n_filters, std::size_t kernel_len, double sample_rate,
                        Rng& rng);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

class SincConv {
 public:
  SincConv() = default;
  SincConv(std::string name, const SincBank& bank);

  /// [N, L] waveform batch -> [N, n_filters, L - kernel_len + 1].
  Tensor forward(const Tensor& wave);
  /// Accumulates band-edge gradients; returns dL/dwave when requested.
  Tensor backward(const Tensor& grad_out, bool need_input_grad = false);
  void collect(ParamList& out);
  Shape cost(const Shape& in, CostRows& rows) const;

  /// Windowed impulse responses [n_filters, kernel_len] for the current edges.
  Tensor filters() const;
  SincBank bank() const;
  std::size_t n_filters() const { return n_filters_; }
  std::size_t kernel_len() const { return kernel_len_; }

  Param low_hz;
  Param band_hz;

 private:
  Conv2dGeometry geometry() const;

  std::string name_;
  std::size_t n_filters_ = 0;
  std::size_t kernel_len_ = 0;
  double sample_rate_ = 16000.0;
  Tensor input4_;
  bool cached_ = false;
};

/// Stateless convenience: filter `wave` ([T] or [N, T]) with `bank`.
Tensor sinc_conv_forward(const SincBank& bank, const Tensor& wave);

// ---------------------------------------------------------------------------
// Composite blocks.

// Squeeze-and-excitation: channel gates sigmoid(W2 relu(W1 mean_hw(x) + b1) + b2).
class SeBlock {
 public:
  SeBlock() = default;
  SeBlock(std::string name, std::size_t channels, std::size_t reduction, Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(ParamList& out);
  Shape cost(const Shape& in, CostRows& rows) const;

  Conv2d fc1;
  Conv2d fc2;

 private:
  Relu relu_;
  Tensor input_;
  Tensor gate_;
  bool cached_ = false;
};

/// Frontend pooling window (stride equals window); 1x1 means no pooling.
struct PoolWindow {
  std::size_t h = 1;
  std::size_t w = 1;
  bool active() const { return h > 1 || w > 1; }
  friend bool operator==(const PoolWindow&, const PoolWindow&) = default;
};

// Residual block built from depthwise-separable 3x3 convolutions:
// dw -> pw -> BN -> ReLU -> dw -> pw -> BN, plus shortcut, ReLU, optional pool.
class DwsResBlock {
 public:
  DwsResBlock() = default;
  DwsResBlock(std::string name, std::size_t in_channels, std::size_t filters, PoolWindow pool,
              Rng& rng);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_out);
  void collect(ParamList& out);
  Shape cost(const Shape& in, CostRows& rows) const;

  Conv2d dw1, pw1, dw2, pw2, shortcut;
  BatchNorm2d bn1, bn2, bn_shortcut;

 private:
  std::string name_;
  bool projection_ = false;
  PoolWindow pool_window_;
  MaxPool2d pool_;
  Relu relu1_, relu_out_;
};

struct Res2Config {
  std::size_t filters = 64;
  std::size_t scale = 4;
  std::size_t dilation = 2;
  std::size_t se_reduction = 8;
  PoolWindow pool{1, 3};
};

// DWS SE-Res2Net block. Pointwise (Cin -> filters) + BN + ReLU, then the
// channels are split into `scale` groups: with scale 1 the single group goes
// through a dilated depthwise 3x3 (+BN+ReLU); otherwise group 1 passes through
// and group i >= 2 gets the depthwise conv of (group i + output of group i-1).
// The groups are concatenated, mixed by a pointwise conv + BN, gated by SE,
// added to the (projected) shortcut, rectified and optionally max-pooled.
class Res2Block {
 public:
  Res2Block() = default;
  Res2Block(std::string name, std::size_t in_channels, const Res2Config& cfg, Rng& rng);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_out);
  void collect(ParamList& out);
  Shape cost(const Shape& in, CostRows& rows) const;

  const Res2Config& config() const { return cfg_; }

  Conv2d pw_in, pw_out, shortcut;
  BatchNorm2d bn_in, bn_out, bn_shortcut;
  std::vector<Conv2d> dw;
  std::vector<BatchNorm2d> bn_dw;
  SeBlock se;

 private:
  std::string name_;
  Res2Config cfg_;
  bool projection_ = false;
  MaxPool2d pool_;
  Relu relu_in_, relu_out_;
  std::vector<Relu> relu_dw_;
};

}  // namespace rawtfnet
