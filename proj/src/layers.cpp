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


#include <cmath>

#include "rawtfnet/errors.hpp"
#include "rawtfnet/layers.hpp"

namespace rawtfnet {

std::uint64_t trainable_count(const ParamList& params) {
  std::uint64_t n = 0;
  for (const Param* p : params)
    if (p->trainable) n += p->value.size();
  return n;
}

Conv2d::Conv2d(std::string name, const Conv2dGeometry& geometry, bool with_bias, Rng& rng)
    : geom_(geometry), has_bias_(with_bias) {
  geom_.validate();
  const double fan_in = static_cast<double>(geom_.in_per_group() * geom_.kernel_h * geom_.kernel_w);
  const double bound = std::sqrt(6.0 / fan_in);
  weight = Param(name + ".weight", random_uniform(geom_.weight_shape(), rng, -bound, bound));
  if (has_bias_) bias = Param(name + ".bias", Tensor({geom_.out_channels}));
}

Tensor Conv2d::forward(const Tensor& x) {
  input_ = x;
  cached_ = true;
  return kernels::conv2d_forward(x, weight.value, has_bias_ ? bias.value : Tensor(), geom_);
}

Tensor Conv2d::backward(const Tensor& grad_out, bool need_input_grad) {
  if (!cached_) throw StateError(weight.name + ": backward before forward");
  kernels::conv2d_backward_params(input_, grad_out, geom_, weight.grad,
                                  has_bias_ ? &bias.grad : nullptr);
  if (!need_input_grad) return {};
  return kernels::conv2d_backward_input(grad_out, weight.value, geom_, input_.shape());
}

void Conv2d::collect(ParamList& out) {
  out.push_back(&weight);
  if (has_bias_) out.push_back(&bias);
}

Shape Conv2d::cost(const Shape& in, CostRows& rows) const {
  const std::size_t h = in[2], w = in[3];
  std::string name = weight.name.substr(0, weight.name.size() - std::string(".weight").size());
  rows.push_back({name, weight.value.size() + (has_bias_ ? bias.value.size() : 0),
                  geom_.macs(h, w)});
  return {in[0], geom_.out_channels, geom_.out_h(h), geom_.out_w(w)};
}

Conv1d::Conv1d(std::string name, const Conv1dGeometry& geometry, bool with_bias, Rng& rng)
    : geom_(geometry), has_bias_(with_bias) {
  geom_.as_2d().validate();
  const double fan_in = static_cast<double>(geom_.in_channels / geom_.groups * geom_.kernel);
  const double bound = std::sqrt(6.0 / fan_in);
  weight = Param(name + ".weight", random_uniform(geom_.weight_shape(), rng, -bound, bound));
  if (has_bias_) bias = Param(name + ".bias", Tensor({geom_.out_channels}));
}

Tensor Conv1d::forward(const Tensor& x) {
  input_ = x;
  cached_ = true;
  return kernels::conv1d_forward(x, weight.value, has_bias_ ? bias.value : Tensor(), geom_);
}

Tensor Conv1d::backward(const Tensor& grad_out, bool need_input_grad) {
  if (!cached_) throw StateError(weight.name + ": backward before forward");
  kernels::conv1d_backward_params(input_, grad_out, geom_, weight.grad,
                                  has_bias_ ? &bias.grad : nullptr);
  if (!need_input_grad) return {};
  return kernels::conv1d_backward_input(grad_out, weight.value, geom_, input_.shape());
}

void Conv1d::collect(ParamList& out) {
  out.push_back(&weight);
  if (has_bias_) out.push_back(&bias);
}

Shape Conv1d::cost(const Shape& in, CostRows& rows) const {
  if (in.size() != 3) throw DimensionError(weight.name + ": cost expects [N, C, L]");
  const std::string name = weight.name.substr(0, weight.name.size() - std::string(".weight").size());
  rows.push_back({name, weight.value.size() + (has_bias_ ? bias.value.size() : 0), geom_.macs(in[2])});
  return {in[0], geom_.out_channels, geom_.out_len(in[2])};
}

BatchNorm2d::BatchNorm2d(std::string name, std::size_t channels, double momentum, double eps)
    : gamma(name + ".gamma", Tensor::full({channels}, 1.0)),
      beta(name + ".beta", Tensor({channels})),
      running_mean(name + ".running_mean", Tensor({channels}), false),
      running_var(name + ".running_var", Tensor::full({channels}, 1.0), false),
      name_(std::move(name)),
      momentum_(momentum),
      eps_(eps) {
  if (!(eps_ > 0.0)) throw ConfigError(name_ + ": eps must be positive");
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
  if (x.rank() != 4 || x.shape()[1] != gamma.value.size())
    throw DimensionError(name_ + ": expects NCHW with " + std::to_string(gamma.value.size()) +
                         " channels, got " + shape_str(x.shape()));
  const std::size_t N = x.shape()[0], C = x.shape()[1];
  const std::size_t plane = x.shape()[2] * x.shape()[3];
  const std::size_t count = N * plane;
  mode_ = mode;
  normalized_ = Tensor(x.shape());
  inv_std_.assign(C, 0.0);
  Tensor y(x.shape());
  auto src = x.data();
  auto xh = normalized_.data();
  auto dst = y.data();

  for (std::size_t c = 0; c < C; ++c) {
    double mean, var;
    if (mode == Mode::train) {
      double s = 0.0;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t p = 0; p < plane; ++p) s += src[(n * C + c) * plane + p];
      mean = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t p = 0; p < plane; ++p) {
          const double d = src[(n * C + c) * plane + p] - mean;
          ss += d * d;
        }
      var = ss / static_cast<double>(count);
      const double unbiased = count > 1 ? ss / static_cast<double>(count - 1) : var;
      running_mean.value[c] = (1.0 - momentum_) * running_mean.value[c] + momentum_ * mean;
      running_var.value[c] = (1.0 - momentum_) * running_var.value[c] + momentum_ * unbiased;
    } else {
      mean = running_mean.value[c];
      var = running_var.value[c];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    const double g = gamma.value[c], b = beta.value[c];
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t i = (n * C + c) * plane + p;
        xh[i] = (src[i] - mean) * inv;
        dst[i] = g * xh[i] + b;
      }
  }
  cached_ = true;
  debug_check_finite(y, "batchnorm");
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  if (!cached_) throw StateError(name_ + ": backward before forward");
  if (grad_out.shape() != normalized_.shape())
    throw DimensionError(name_ + ": gradient shape " + shape_str(grad_out.shape()));
  const std::size_t N = grad_out.shape()[0], C = grad_out.shape()[1];
  const std::size_t plane = grad_out.shape()[2] * grad_out.shape()[3];
  const double count = static_cast<double>(N * plane);
  Tensor gx(grad_out.shape());
  auto g = grad_out.data();
  auto xh = normalized_.data();
  auto dst = gx.data();
  for (std::size_t c = 0; c < C; ++c) {
    double sg = 0.0, sgx = 0.0;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t i = (n * C + c) * plane + p;
        sg += g[i];
        sgx += g[i] * xh[i];
      }
    gamma.grad[c] += sgx;
    beta.grad[c] += sg;
    const double scale = gamma.value[c] * inv_std_[c];
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t i = (n * C + c) * plane + p;
        if (mode_ == Mode::train)
          dst[i] = scale * (g[i] - sg / count - xh[i] * sgx / count);
        else
          dst[i] = scale * g[i];
      }
  }
  return gx;
}

void BatchNorm2d::collect(ParamList& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
  out.push_back(&running_mean);
  out.push_back(&running_var);
}

Shape BatchNorm2d::cost(const Shape& in, CostRows& rows) const {
  rows.push_back({name_, gamma.value.size() + beta.value.size(), 0});
  return in;
}

Tensor Relu::forward(const Tensor& x) {
  output_ = Tensor(x.shape());
  auto src = x.data();
  auto dst = output_.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
  cached_ = true;
  return output_;
}

Tensor Relu::backward(const Tensor& grad_out) const {
  if (!cached_) throw StateError("relu: backward before forward");
  if (grad_out.shape() != output_.shape()) throw DimensionError("relu: gradient shape");
  Tensor gx(grad_out.shape());
  auto g = grad_out.data();
  auto y = output_.data();
  auto dst = gx.data();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] = y[i] > 0.0 ? g[i] : 0.0;
  return gx;
}

Tensor MaxPool2d::forward(const Tensor& x) {
  input_shape_ = x.shape();
  cached_ = true;
  return kernels::maxpool2d_forward(x, geom_, argmax_);
}

Tensor MaxPool2d::backward(const Tensor& grad_out) const {
  if (!cached_) throw StateError(name_ + ": backward before forward");
  return kernels::maxpool2d_backward(grad_out, argmax_, input_shape_);
}

Shape MaxPool2d::cost(const Shape& in, CostRows& rows) const {
  rows.push_back({name_, 0, 0});
  return {in[0], in[1], geom_.out_h(in[2]), geom_.out_w(in[3])};
}

Tensor mean_over_axis(const Tensor& x, std::size_t axis) {
  if (x.rank() != 4 || (axis != 2 && axis != 3))
    throw DimensionError("mean_over_axis expects NCHW and a spatial axis");
  const std::size_t NC = x.shape()[0] * x.shape()[1];
  const std::size_t H = x.shape()[2], W = x.shape()[3];
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  Tensor y(out_shape);
  auto src = x.data();
  auto dst = y.data();
  for (std::size_t p = 0; p < NC; ++p) {
    const double* plane = src.data() + p * H * W;
    if (axis == 2) {
      double* row = dst.data() + p * W;
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) row[j] += plane[i * W + j];
      for (std::size_t j = 0; j < W; ++j) row[j] /= static_cast<double>(H);
    } else {
      double* col = dst.data() + p * H;
      for (std::size_t i = 0; i < H; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < W; ++j) s += plane[i * W + j];
        col[i] = s / static_cast<double>(W);
      }
    }
  }
  return y;
}

Tensor mean_over_axis_backward(const Tensor& grad_out, std::size_t axis, std::size_t extent) {
  if (grad_out.rank() != 4 || (axis != 2 && axis != 3) || grad_out.shape()[axis] != 1)
    throw DimensionError("mean_over_axis_backward: bad gradient shape");
  Shape in_shape = grad_out.shape();
  in_shape[axis] = extent;
  Tensor gx(in_shape);
  const std::size_t NC = in_shape[0] * in_shape[1];
  const std::size_t H = in_shape[2], W = in_shape[3];
  const double scale = 1.0 / static_cast<double>(extent);
  auto g = grad_out.data();
  auto dst = gx.data();
  for (std::size_t p = 0; p < NC; ++p)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j)
        dst[(p * H + i) * W + j] = scale * (axis == 2 ? g[p * W + j] : g[p * H + i]);
  return gx;
}

}  // namespace rawtfnet
