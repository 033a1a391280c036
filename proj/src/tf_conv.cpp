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


#include "rawtfnet/tf_conv.hpp"

#include "rawtfnet/errors.hpp"
#include "rawtfnet/geometry_util.hpp"

namespace rawtfnet {

namespace {

// View of a C x F x T map, optionally with leading batch dims.
struct MapDims {
  std::size_t outer, c, f, t;
};

MapDims map_dims(const Tensor& x, const char* what) {
  if (x.rank() != 3 && x.rank() != 4)
    throw DimensionError(std::string(what) + " expects [C,F,T] or [N,C,F,T], got " +
                         shape_str(x.shape()));
  const std::size_t r = x.rank();
  return {r == 4 ? x.shape()[0] : 1, x.shape()[r - 3], x.shape()[r - 2], x.shape()[r - 1]};
}

Tensor permute_channels(const Tensor& x, const std::vector<std::size_t>& perm) {
  const MapDims d = map_dims(x, "channel permutation");
  const std::size_t plane = d.f * d.t;
  Tensor y(x.shape());
  auto src = x.data();
  auto dst = y.data();
  for (std::size_t n = 0; n < d.outer; ++n)
    for (std::size_t o = 0; o < d.c; ++o)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((n * d.c + perm[o]) * plane), plane,
                  dst.begin() + static_cast<std::ptrdiff_t>((n * d.c + o) * plane));
  return y;
}

}  // namespace

void TfConvConfig::validate() const {
  if (!enable_freq_branch && !enable_time_branch)
    throw ConfigError("TF-Conv block needs at least one branch enabled");
  if (in_channels == 0 || out_channels == 0) throw ConfigError("TF-Conv channels must be positive");
  if (out_channels % 2 != 0)
    throw ConfigError("TF-Conv width " + std::to_string(out_channels) + " must be even");
  if (enable_shuffle && (shuffle_groups == 0 || out_channels % shuffle_groups != 0))
    throw ConfigError("TF-Conv width " + std::to_string(out_channels) +
                      " not divisible by shuffle groups " + std::to_string(shuffle_groups));
}

std::vector<std::size_t> shuffle_permutation(std::size_t channels, std::size_t groups) {
  if (groups == 0 || channels % groups != 0)
    throw ConfigError("channel count " + std::to_string(channels) +
                      " not divisible by shuffle groups " + std::to_string(groups));
  const std::size_t per = channels / groups;
  std::vector<std::size_t> perm(channels);
  for (std::size_t j = 0; j < per; ++j)
    for (std::size_t i = 0; i < groups; ++i) perm[j * groups + i] = i * per + j;
  return perm;
}

Tensor channel_shuffle(const Tensor& x, std::size_t groups) {
  return permute_channels(x, shuffle_permutation(map_dims(x, "channel_shuffle").c, groups));
}

Tensor channel_unshuffle(const Tensor& x, std::size_t groups) {
  const auto perm = shuffle_permutation(map_dims(x, "channel_unshuffle").c, groups);
  std::vector<std::size_t> inverse(perm.size());
  for (std::size_t o = 0; o < perm.size(); ++o) inverse[perm[o]] = o;
  return permute_channels(x, inverse);
}

std::pair<Tensor, Tensor> split_channels(const Tensor& x) {
  const MapDims d = map_dims(x, "split_channels");
  if (d.c % 2 != 0)
    throw ConfigError("cannot split an odd channel count " + std::to_string(d.c));
  const std::size_t axis = x.rank() - 3;
  return {slice(x, axis, 0, d.c / 2), slice(x, axis, d.c / 2, d.c)};
}

Tensor broadcast_add_freq(const Tensor& x, const Tensor& v) {
  const MapDims d = map_dims(x, "broadcast_add_freq");
  const MapDims dv = map_dims(v, "broadcast_add_freq");
  if (dv.outer != d.outer || dv.c != d.c || dv.f != 1 || dv.t != d.t)
    throw DimensionError("broadcast_add_freq: vector " + shape_str(v.shape()) +
                         " incompatible with map " + shape_str(x.shape()));
  Tensor y(x.shape());
  auto src = x.data();
  auto vec = v.data();
  auto dst = y.data();
  for (std::size_t nc = 0; nc < d.outer * d.c; ++nc)
    for (std::size_t i = 0; i < d.f; ++i)
      for (std::size_t j = 0; j < d.t; ++j) {
        const std::size_t k = (nc * d.f + i) * d.t + j;
        dst[k] = src[k] + vec[nc * d.t + j];
      }
  return y;
}

Tensor broadcast_add_time(const Tensor& x, const Tensor& v) {
  const MapDims d = map_dims(x, "broadcast_add_time");
  const MapDims dv = map_dims(v, "broadcast_add_time");
  if (dv.outer != d.outer || dv.c != d.c || dv.f != d.f || dv.t != 1)
    throw DimensionError("broadcast_add_time: vector " + shape_str(v.shape()) +
                         " incompatible with map " + shape_str(x.shape()));
  Tensor y(x.shape());
  auto src = x.data();
  auto vec = v.data();
  auto dst = y.data();
  for (std::size_t nc = 0; nc < d.outer * d.c; ++nc)
    for (std::size_t i = 0; i < d.f; ++i)
      for (std::size_t j = 0; j < d.t; ++j) {
        const std::size_t k = (nc * d.f + i) * d.t + j;
        dst[k] = src[k] + vec[nc * d.f + i];
      }
  return y;
}

Tensor broadcast_freq_grad(const Tensor& grad_out) {
  const MapDims d = map_dims(grad_out, "broadcast_freq_grad");
  Shape s = grad_out.shape();
  s[s.size() - 2] = 1;
  Tensor gv(s);
  auto g = grad_out.data();
  for (std::size_t nc = 0; nc < d.outer * d.c; ++nc)
    for (std::size_t i = 0; i < d.f; ++i)
      for (std::size_t j = 0; j < d.t; ++j) gv[nc * d.t + j] += g[(nc * d.f + i) * d.t + j];
  return gv;
}

Tensor broadcast_time_grad(const Tensor& grad_out) {
  const MapDims d = map_dims(grad_out, "broadcast_time_grad");
  Shape s = grad_out.shape();
  s[s.size() - 1] = 1;
  Tensor gv(s);
  auto g = grad_out.data();
  for (std::size_t nc = 0; nc < d.outer * d.c; ++nc)
    for (std::size_t i = 0; i < d.f; ++i)
      for (std::size_t j = 0; j < d.t; ++j) gv[nc * d.f + i] += g[(nc * d.f + i) * d.t + j];
  return gv;
}

// ---------------------------------------------------------------------------

AxisBranch::AxisBranch(std::string name, std::size_t channels, Axis axis, Rng& rng)
    : axis_(axis) {
  const bool f = axis == Axis::frequency;
  dw = Conv2d(name + ".dw", depthwise(channels, f ? 3 : 1, f ? 1 : 3, 1, 1), false, rng);
  bn_dw = BatchNorm2d(name + ".bn_dw", channels);
  pw = Conv2d(name + ".pw", pointwise(channels, channels), false, rng);
  bn_pw = BatchNorm2d(name + ".bn_pw", channels);
}

Tensor AxisBranch::forward(const Tensor& x, Mode mode) {
  const Tensor h = relu_.forward(bn_dw.forward(dw.forward(x), mode));
  pooled_extent_ = x.shape()[pooled_axis()];
  return bn_pw.forward(pw.forward(mean_over_axis(h, pooled_axis())), mode);
}

Tensor AxisBranch::backward(const Tensor& grad_v) {
  if (pooled_extent_ == 0) throw StateError(dw.weight.name + ": backward before forward");
  const Tensor g_pooled = pw.backward(bn_pw.backward(grad_v));
  const Tensor g_h = mean_over_axis_backward(g_pooled, pooled_axis(), pooled_extent_);
  return dw.backward(bn_dw.backward(relu_.backward(g_h)));
}

void AxisBranch::collect(ParamList& out) {
  dw.collect(out);
  bn_dw.collect(out);
  pw.collect(out);
  bn_pw.collect(out);
}

Shape AxisBranch::cost(const Shape& in, CostRows& rows) const {
  Shape s = bn_dw.cost(dw.cost(in, rows), rows);
  s[pooled_axis()] = 1;
  return bn_pw.cost(pw.cost(s, rows), rows);
}

Tensor freq_branch(AxisBranch& branch, const Tensor& x_f, Mode mode) {
  if (branch.axis() != AxisBranch::Axis::frequency)
    throw ConfigError("freq_branch called with a time-axis branch");
  return branch.forward(x_f, mode);
}

Tensor time_branch(AxisBranch& branch, const Tensor& x_t, Mode mode) {
  if (branch.axis() != AxisBranch::Axis::time)
    throw ConfigError("time_branch called with a frequency-axis branch");
  return branch.forward(x_t, mode);
}

// ---------------------------------------------------------------------------

TfConvBlock::TfConvBlock(std::string name, const TfConvConfig& cfg, Rng& rng)
    : name_(std::move(name)), cfg_(cfg) {
  cfg_.validate();
  const std::size_t c = cfg.out_channels;
  const std::size_t branch_width = c / 2;
  transition = Conv2d(name_ + ".transition", pointwise(cfg.in_channels, c), false, rng);
  bn_transition = BatchNorm2d(name_ + ".bn_transition", c);
  if (cfg.enable_freq_branch)
    freq = AxisBranch(name_ + ".freq", branch_width, AxisBranch::Axis::frequency, rng);
  if (cfg.enable_time_branch)
    time = AxisBranch(name_ + ".time", branch_width, AxisBranch::Axis::time, rng);
}

Tensor TfConvBlock::forward(const Tensor& x, Mode mode) {
  mixed_ = relu_.forward(bn_transition.forward(transition.forward(x), mode));
  if (cfg_.enable_shuffle) mixed_ = channel_shuffle(mixed_, cfg_.shuffle_groups);
  auto [x_f, x_t] = split_channels(mixed_);
  const Tensor y_f = cfg_.enable_freq_branch ? broadcast_add_freq(x_f, freq_branch(freq, x_f, mode)) : x_f;
  const Tensor y_t = cfg_.enable_time_branch ? broadcast_add_time(x_t, time_branch(time, x_t, mode)) : x_t;
  return concat({y_f, y_t}, 1);
}

Tensor TfConvBlock::backward(const Tensor& grad_out) {
  if (mixed_.empty()) throw StateError(name_ + ": backward before forward");
  auto [g_f, g_t] = split_channels(grad_out);
  const Tensor gx_f = cfg_.enable_freq_branch ? add(g_f, freq.backward(broadcast_freq_grad(g_f))) : g_f;
  const Tensor gx_t = cfg_.enable_time_branch ? add(g_t, time.backward(broadcast_time_grad(g_t))) : g_t;
  Tensor g_mixed = concat({gx_f, gx_t}, 1);
  if (cfg_.enable_shuffle) g_mixed = channel_unshuffle(g_mixed, cfg_.shuffle_groups);
  return transition.backward(bn_transition.backward(relu_.backward(g_mixed)));
}

void TfConvBlock::collect(ParamList& out) {
  transition.collect(out);
  bn_transition.collect(out);
  if (cfg_.enable_freq_branch) freq.collect(out);
  if (cfg_.enable_time_branch) time.collect(out);
}

Shape TfConvBlock::cost(const Shape& in, CostRows& rows) const {
  const Shape s = bn_transition.cost(transition.cost(in, rows), rows);
  const Shape branch_in{s[0], s[1] / 2, s[2], s[3]};
  if (cfg_.enable_freq_branch) freq.cost(branch_in, rows);
  if (cfg_.enable_time_branch) time.cost(branch_in, rows);
  return s;
}

}  // namespace rawtfnet
