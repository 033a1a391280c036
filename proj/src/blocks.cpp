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
#include <cmath>

#include "rawtfnet/errors.hpp"
#include "rawtfnet/geometry_util.hpp"
#include "rawtfnet/layers.hpp"

namespace rawtfnet {

// ---------------------------------------------------------------------------

SeBlock::SeBlock(std::string name, std::size_t channels, std::size_t reduction, Rng& rng) {
  if (reduction == 0) throw ConfigError(name + ": reduction must be positive");
  const std::size_t bottleneck = std::max<std::size_t>(1, channels / reduction);
  fc1 = Conv2d(name + ".fc1", pointwise(channels, bottleneck), true, rng);
  fc2 = Conv2d(name + ".fc2", pointwise(bottleneck, channels), true, rng);
}

Tensor SeBlock::forward(const Tensor& x) {
  const std::size_t N = x.shape()[0], C = x.shape()[1];
  const std::size_t plane = x.shape()[2] * x.shape()[3];
  Tensor squeeze({N, C, 1, 1});
  auto src = x.data();
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    double s = 0.0;
    for (std::size_t p = 0; p < plane; ++p) s += src[nc * plane + p];
    squeeze[nc] = s / static_cast<double>(plane);
  }
  Tensor z = fc2.forward(relu_.forward(fc1.forward(squeeze)));
  gate_ = Tensor(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) gate_[i] = 1.0 / (1.0 + std::exp(-z[i]));
  input_ = x;
  cached_ = true;
  Tensor y(x.shape());
  auto dst = y.data();
  for (std::size_t nc = 0; nc < N * C; ++nc)
    for (std::size_t p = 0; p < plane; ++p) dst[nc * plane + p] = src[nc * plane + p] * gate_[nc];
  return y;
}

Tensor SeBlock::backward(const Tensor& grad_out) {
  if (!cached_) throw StateError(fc1.weight.name + ": backward before forward");
  const std::size_t N = input_.shape()[0], C = input_.shape()[1];
  const std::size_t plane = input_.shape()[2] * input_.shape()[3];
  auto g = grad_out.data();
  auto x = input_.data();
  Tensor grad_z({N, C, 1, 1});
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    double s = 0.0;
    for (std::size_t p = 0; p < plane; ++p) s += g[nc * plane + p] * x[nc * plane + p];
    grad_z[nc] = s * gate_[nc] * (1.0 - gate_[nc]);
  }
  const Tensor grad_squeeze = fc1.backward(relu_.backward(fc2.backward(grad_z)));
  Tensor gx(input_.shape());
  auto dst = gx.data();
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const double spread = grad_squeeze[nc] / static_cast<double>(plane);
    for (std::size_t p = 0; p < plane; ++p)
      dst[nc * plane + p] = g[nc * plane + p] * gate_[nc] + spread;
  }
  return gx;
}

void SeBlock::collect(ParamList& out) {
  fc1.collect(out);
  fc2.collect(out);
}

Shape SeBlock::cost(const Shape& in, CostRows& rows) const {
  const Shape squeezed{in[0], in[1], 1, 1};
  fc2.cost(fc1.cost(squeezed, rows), rows);
  return in;
}

// ---------------------------------------------------------------------------

DwsResBlock::DwsResBlock(std::string name, std::size_t in_channels, std::size_t filters,
                         PoolWindow pool, Rng& rng)
    : name_(std::move(name)), projection_(in_channels != filters), pool_window_(pool) {
  dw1 = Conv2d(name_ + ".dw1", depthwise(in_channels, 3, 3, 1, 1), false, rng);
  pw1 = Conv2d(name_ + ".pw1", pointwise(in_channels, filters), false, rng);
  bn1 = BatchNorm2d(name_ + ".bn1", filters);
  dw2 = Conv2d(name_ + ".dw2", depthwise(filters, 3, 3, 1, 1), false, rng);
  pw2 = Conv2d(name_ + ".pw2", pointwise(filters, filters), false, rng);
  bn2 = BatchNorm2d(name_ + ".bn2", filters);
  if (projection_) {
    shortcut = Conv2d(name_ + ".shortcut", pointwise(in_channels, filters), false, rng);
    bn_shortcut = BatchNorm2d(name_ + ".bn_shortcut", filters);
  }
  if (pool.active()) pool_ = MaxPool2d(name_ + ".pool", {pool.h, pool.w, pool.h, pool.w});
}

Tensor DwsResBlock::forward(const Tensor& x, Mode mode) {
  Tensor h = relu1_.forward(bn1.forward(pw1.forward(dw1.forward(x)), mode));
  h = bn2.forward(pw2.forward(dw2.forward(h)), mode);
  const Tensor skip = projection_ ? bn_shortcut.forward(shortcut.forward(x), mode) : x;
  Tensor y = relu_out_.forward(add(h, skip));
  return pool_window_.active() ? pool_.forward(y) : y;
}

Tensor DwsResBlock::backward(const Tensor& grad_out) {
  Tensor g = pool_window_.active() ? pool_.backward(grad_out) : grad_out;
  g = relu_out_.backward(g);
  Tensor gx = dw1.backward(pw1.backward(bn1.backward(relu1_.backward(
      dw2.backward(pw2.backward(bn2.backward(g)))))));
  const Tensor g_skip = projection_ ? shortcut.backward(bn_shortcut.backward(g)) : g;
  return add(gx, g_skip);
}

void DwsResBlock::collect(ParamList& out) {
  dw1.collect(out);
  pw1.collect(out);
  bn1.collect(out);
  dw2.collect(out);
  pw2.collect(out);
  bn2.collect(out);
  if (projection_) {
    shortcut.collect(out);
    bn_shortcut.collect(out);
  }
}

Shape DwsResBlock::cost(const Shape& in, CostRows& rows) const {
  Shape s = bn1.cost(pw1.cost(dw1.cost(in, rows), rows), rows);
  s = bn2.cost(pw2.cost(dw2.cost(s, rows), rows), rows);
  if (projection_) bn_shortcut.cost(shortcut.cost(in, rows), rows);
  return pool_window_.active() ? pool_.cost(s, rows) : s;
}

// ---------------------------------------------------------------------------

Res2Block::Res2Block(std::string name, std::size_t in_channels, const Res2Config& cfg, Rng& rng)
    : name_(std::move(name)), cfg_(cfg), projection_(in_channels != cfg.filters) {
  if (cfg.scale == 0 || cfg.filters % cfg.scale != 0)
    throw ConfigError(name_ + ": filters " + std::to_string(cfg.filters) +
                      " not divisible by scale " + std::to_string(cfg.scale));
  const std::size_t width = cfg.filters / cfg.scale;
  pw_in = Conv2d(name_ + ".pw_in", pointwise(in_channels, cfg.filters), false, rng);
  bn_in = BatchNorm2d(name_ + ".bn_in", cfg.filters);
  const std::size_t n_dw = cfg.scale == 1 ? 1 : cfg.scale - 1;
  for (std::size_t i = 0; i < n_dw; ++i) {
    const std::string tag = name_ + ".dw" + std::to_string(i + 1);
    dw.emplace_back(tag, depthwise(width, 3, 3, cfg.dilation, cfg.dilation), false, rng);
    bn_dw.emplace_back(tag + ".bn", width);
  }
  relu_dw_.resize(n_dw);
  pw_out = Conv2d(name_ + ".pw_out", pointwise(cfg.filters, cfg.filters), false, rng);
  bn_out = BatchNorm2d(name_ + ".bn_out", cfg.filters);
  se = SeBlock(name_ + ".se", cfg.filters, cfg.se_reduction, rng);
  if (projection_) {
    shortcut = Conv2d(name_ + ".shortcut", pointwise(in_channels, cfg.filters), false, rng);
    bn_shortcut = BatchNorm2d(name_ + ".bn_shortcut", cfg.filters);
  }
  if (cfg.pool.active())
    pool_ = MaxPool2d(name_ + ".pool", {cfg.pool.h, cfg.pool.w, cfg.pool.h, cfg.pool.w});
}

Tensor Res2Block::forward(const Tensor& x, Mode mode) {
  const Tensor h = relu_in_.forward(bn_in.forward(pw_in.forward(x), mode));
  const std::size_t width = cfg_.filters / cfg_.scale;
  std::vector<Tensor> outs;
  if (cfg_.scale == 1) {
    outs.push_back(relu_dw_[0].forward(bn_dw[0].forward(dw[0].forward(h), mode)));
  } else {
    outs.push_back(slice(h, 1, 0, width));
    for (std::size_t i = 1; i < cfg_.scale; ++i) {
      const Tensor part = add(slice(h, 1, i * width, (i + 1) * width), outs.back());
      outs.push_back(
          relu_dw_[i - 1].forward(bn_dw[i - 1].forward(dw[i - 1].forward(part), mode)));
    }
  }
  Tensor body = se.forward(bn_out.forward(pw_out.forward(concat(outs, 1)), mode));
  const Tensor skip = projection_ ? bn_shortcut.forward(shortcut.forward(x), mode) : x;
  Tensor y = relu_out_.forward(add(body, skip));
  return cfg_.pool.active() ? pool_.forward(y) : y;
}

Tensor Res2Block::backward(const Tensor& grad_out) {
  Tensor g = cfg_.pool.active() ? pool_.backward(grad_out) : grad_out;
  g = relu_out_.backward(g);
  const Tensor g_cat = pw_out.backward(bn_out.backward(se.backward(g)));
  const std::size_t width = cfg_.filters / cfg_.scale;
  Tensor g_h;
  if (cfg_.scale == 1) {
    g_h = dw[0].backward(bn_dw[0].backward(relu_dw_[0].backward(g_cat)));
  } else {
    // Walk the cascade backwards: group i feeds group i+1 through the sum.
    std::vector<Tensor> g_parts(cfg_.scale);
    Tensor carry;
    for (std::size_t i = cfg_.scale; i-- > 1;) {
      Tensor g_out = slice(g_cat, 1, i * width, (i + 1) * width);
      if (!carry.empty()) g_out = add(g_out, carry);
      const Tensor g_in =
          dw[i - 1].backward(bn_dw[i - 1].backward(relu_dw_[i - 1].backward(g_out)));
      g_parts[i] = g_in;
      carry = g_in;
    }
    g_parts[0] = add(slice(g_cat, 1, 0, width), carry);
    g_h = concat(g_parts, 1);
  }
  Tensor gx = pw_in.backward(bn_in.backward(relu_in_.backward(g_h)));
  const Tensor g_skip = projection_ ? shortcut.backward(bn_shortcut.backward(g)) : g;
  return add(gx, g_skip);
}

void Res2Block::collect(ParamList& out) {
  pw_in.collect(out);
  bn_in.collect(out);
  for (std::size_t i = 0; i < dw.size(); ++i) {
    dw[i].collect(out);
    bn_dw[i].collect(out);
  }
  pw_out.collect(out);
  bn_out.collect(out);
  se.collect(out);
  if (projection_) {
    shortcut.collect(out);
    bn_shortcut.collect(out);
  }
}

Shape Res2Block::cost(const Shape& in, CostRows& rows) const {
  Shape s = bn_in.cost(pw_in.cost(in, rows), rows);
  const Shape group{s[0], cfg_.filters / cfg_.scale, s[2], s[3]};
  for (std::size_t i = 0; i < dw.size(); ++i) bn_dw[i].cost(dw[i].cost(group, rows), rows);
  s = se.cost(bn_out.cost(pw_out.cost(s, rows), rows), rows);
  if (projection_) bn_shortcut.cost(shortcut.cost(in, rows), rows);
  return cfg_.pool.active() ? pool_.cost(s, rows) : s;
}

}  // namespace rawtfnet
