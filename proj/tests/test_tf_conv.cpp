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

#include "doctest.h"
#include "rawtfnet/errors.hpp"
#include "rawtfnet/tf_conv.hpp"
#include "support.hpp"

using namespace rawtfnet;

namespace {

// BN as identity up to the eps term: gamma 1, beta 0, running stats (0, 1).
void bypass(BatchNorm2d& bn) {
  bn.gamma.value.fill(1.0);
  bn.beta.value.fill(0.0);
  bn.running_mean.value.fill(0.0);
  bn.running_var.value.fill(1.0);
}

const double kUnit = 1.0 / std::sqrt(1.0 + 1e-5);

void identity_pointwise(Conv2d& pw) {
  const std::size_t c = pw.weight.value.shape()[0];
  pw.weight.value.fill(0.0);
  for (std::size_t i = 0; i < c; ++i) pw.weight.value[i * c + i] = 1.0;
}

}  // namespace

TEST_CASE("channel shuffle") {
  Rng rng(1);
  const Tensor x = random_uniform({4, 2, 3}, rng);
  CHECK(channel_shuffle(x, 1) == x);
  CHECK(shuffle_permutation(4, 2) == std::vector<std::size_t>{0, 2, 1, 3});
  CHECK(channel_shuffle(channel_shuffle(x, 2), 2) == x);

  for (std::size_t c = 1; c <= 16; ++c)
    for (std::size_t g = 1; g <= c; ++g) {
      if (c % g != 0) continue;
      const Tensor m = random_uniform({2, c, 2, 3}, rng);
      // Reshape (N, g, C/g, F, T), swap the two channel axes, flatten back.
      const Tensor want = reshape(transpose(reshape(m, {2, g, c / g, 2, 3}), {0, 2, 1, 3, 4}), {2, c, 2, 3});
      CHECK(channel_shuffle(m, g) == want);
      CHECK(channel_unshuffle(channel_shuffle(m, g), g) == m);
    }
  CHECK_THROWS_AS(channel_shuffle(random_uniform({6, 1, 1}, rng), 4), ConfigError);
}

TEST_CASE("channel split") {
  Rng rng(2);
  const Tensor two = random_uniform({2, 3, 4}, rng);
  const auto [a, b] = split_channels(two);
  CHECK(a.shape() == Shape{1, 3, 4});
  CHECK(b.shape() == Shape{1, 3, 4});

  const Tensor x = random_uniform({2, 6, 3, 4}, rng);
  const auto [xf, xt] = split_channels(x);
  CHECK(concat({xf, xt}, 1) == x);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t f = 0; f < 3; ++f)
        for (std::size_t t = 0; t < 4; ++t) {
          CHECK(xt.at({n, i, f, t}) == x.at({n, 3 + i, f, t}));
          CHECK(xf.at({n, i, f, t}) == x.at({n, i, f, t}));
        }
  CHECK_THROWS_AS(split_channels(random_uniform({3, 2, 2}, rng)), ConfigError);
}

TEST_CASE("broadcast adds") {
  const Tensor x({1, 2, 2}, {1, 2, 3, 4});
  CHECK(broadcast_add_freq(x, Tensor({1, 1, 2}, {10, 20})) == Tensor({1, 2, 2}, {11, 22, 13, 24}));
  CHECK(broadcast_add_freq(x, Tensor({1, 1, 2})) == x);
  CHECK(broadcast_add_time(x, Tensor({1, 2, 1})) == x);

  Rng rng(3);
  const Tensor m = random_uniform({3, 4, 5}, rng);
  const Tensor vf = random_uniform({3, 1, 5}, rng);
  const Tensor vt = random_uniform({3, 4, 1}, rng);
  const Tensor yf = broadcast_add_freq(m, vf), yt = broadcast_add_time(m, vt);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        CHECK(yf.at({c, i, j}) == m.at({c, i, j}) + vf.at({c, 0, j}));
        CHECK(yt.at({c, i, j}) == m.at({c, i, j}) + vt.at({c, i, 0}));
      }
  // Swapping F and T turns one broadcast into the other.
  const Tensor swapped = broadcast_add_time(transpose(m, {0, 2, 1}), transpose(vf, {0, 2, 1}));
  CHECK(transpose(swapped, {0, 2, 1}) == yf);

  const Tensor g = random_uniform({3, 4, 5}, rng);
  const Tensor gf = broadcast_freq_grad(g), gt = broadcast_time_grad(g);
  CHECK(std::abs(dot(gf, vf) - dot(g, sub(yf, m))) < 1e-12);
  CHECK(std::abs(dot(gt, vt) - dot(g, sub(yt, m))) < 1e-12);
  CHECK_THROWS_AS(broadcast_add_freq(m, vt), DimensionError);
}

TEST_CASE("frequency branch staged example") {
  Rng rng(4);
  AxisBranch br("f", 2, AxisBranch::Axis::frequency, rng);
  br.dw.weight.value = Tensor({2, 1, 3, 1}, {0, 1, 0, 0, 1, 0});
  identity_pointwise(br.pw);
  bypass(br.bn_dw);
  bypass(br.bn_pw);
  const Tensor x = random_uniform({1, 2, 3, 4}, rng);
  const Tensor v = freq_branch(br, x, Mode::eval);
  REQUIRE(v.shape() == Shape{1, 2, 1, 4});
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t t = 0; t < 4; ++t) {
      double m = 0.0;
      for (std::size_t f = 0; f < 3; ++f) m += std::max(x.at({0, c, f, t}) * kUnit, 0.0) / 3.0;
      CHECK(std::abs(v.at({0, c, 0, t}) - m * kUnit) < 1e-15);
    }

  // With the identity tap the branch only sees a mean over F.
  Tensor flipped(x.shape());
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t t = 0; t < 4; ++t) flipped.at({0, c, f, t}) = x.at({0, c, (f + 1) % 3, t});
  CHECK(max_abs_diff(freq_branch(br, flipped, Mode::eval), v) < 1e-15);

  // A single frequency bin: pooling changes nothing but the axis label.
  const Tensor one = random_uniform({1, 2, 1, 4}, rng);
  const Tensor v1 = freq_branch(br, one, Mode::eval);
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(v1[i] == std::max(one[i] * kUnit, 0.0) * kUnit);
  CHECK(mean_over_axis(one, 2) == one);
  CHECK_THROWS_AS(time_branch(br, x, Mode::eval), ConfigError);
}

TEST_CASE("time branch mirrors the frequency branch") {
  Rng rng(5);
  AxisBranch fb("f", 3, AxisBranch::Axis::frequency, rng);
  AxisBranch tb("t", 3, AxisBranch::Axis::time, rng);
  tb.dw.weight.value = reshape(fb.dw.weight.value, {3, 1, 1, 3});
  tb.pw.weight.value = fb.pw.weight.value;
  for (auto* bn : {&fb.bn_dw, &fb.bn_pw}) {
    bn->gamma.value = random_uniform({3}, rng, 0.5, 1.5);
    bn->running_var.value = random_uniform({3}, rng, 0.5, 1.5);
  }
  tb.bn_dw = fb.bn_dw;
  tb.bn_pw = fb.bn_pw;
  const Tensor x = random_uniform({2, 3, 4, 5}, rng);
  const Tensor vf = freq_branch(fb, x, Mode::eval);
  const Tensor vt = time_branch(tb, transpose(x, {0, 1, 3, 2}), Mode::eval);
  CHECK(max_abs_diff(transpose(vt, {0, 1, 3, 2}), vf) < 1e-14);

  const Tensor one = random_uniform({1, 3, 4, 1}, rng);
  CHECK(time_branch(tb, one, Mode::eval).shape() == one.shape());
  CHECK(mean_over_axis(one, 3) == one);

  const Tensor c = Tensor::full({1, 3, 4, 6}, 0.7);
  const Tensor vc = time_branch(tb, c, Mode::eval);
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t f = 1; f < 4; ++f) CHECK(std::abs(vc.at({0, ch, f, 0}) - vc.at({0, ch, 0, 0})) < 1e-15);
}

TEST_CASE("TF-Conv block") {
  Rng rng(6);
  TfConvConfig cfg;
  cfg.in_channels = 5;
  cfg.out_channels = 8;
  TfConvBlock block("tf", cfg, rng);
  for (AxisBranch* b : {&block.freq, &block.time}) {
    b->dw.weight.value.fill(0.0);
    b->pw.weight.value.fill(0.0);
    bypass(b->bn_dw);
    bypass(b->bn_pw);
  }
  const Tensor x = random_uniform({2, 5, 3, 4}, rng);
  const Tensor y = block.forward(x, Mode::eval);
  CHECK(y == block.branch_input());

  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t f = 1 + rng.below(5), t = 1 + rng.below(6), cp = 2 * (1 + rng.below(4));
    TfConvConfig c2;
    c2.in_channels = 3;
    c2.out_channels = cp;
    TfConvBlock b2("tf", c2, rng);
    CHECK(b2.forward(random_uniform({2, 3, f, t}, rng), Mode::train).shape() == Shape{2, cp, f, t});
  }

  // Shuffle only reorders the post-transition channels.
  TfConvConfig on = cfg, off = cfg;
  off.enable_shuffle = false;
  TfConvBlock a("tf", on, rng);
  TfConvBlock b = a;
  b = TfConvBlock("tf", off, rng);
  b.transition = a.transition;
  b.bn_transition = a.bn_transition;
  a.forward(x, Mode::train);
  b.forward(x, Mode::train);
  const auto perm = shuffle_permutation(8, 2);
  std::vector<double> va(a.branch_input().vec()), vb(b.branch_input().vec());
  const std::size_t plane = 12;
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 8; ++o)
      for (std::size_t p = 0; p < plane; ++p)
        CHECK(va[(n * 8 + o) * plane + p] == vb[(n * 8 + perm[o]) * plane + p]);
  std::sort(va.begin(), va.end());
  std::sort(vb.begin(), vb.end());
  CHECK(va == vb);

  TfConvConfig bad = cfg;
  bad.out_channels = 7;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.enable_freq_branch = bad.enable_time_branch = false;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("TF-Conv ablations keep the width") {
  Rng rng(7);
  for (int v = 0; v < 3; ++v) {
    TfConvConfig cfg;
    cfg.in_channels = 4;
    cfg.out_channels = 6;
    cfg.enable_freq_branch = v != 0;
    cfg.enable_time_branch = v != 1;
    cfg.enable_shuffle = v != 2;
    TfConvBlock block("tf", cfg, rng);
    const Tensor y = block.forward(random_uniform({2, 4, 3, 5}, rng), Mode::train);
    REQUIRE(y.shape() == Shape{2, 6, 3, 5});
    // The dropped branch's half passes through untouched.
    if (v < 2) {
      const auto halves = split_channels(block.branch_input());
      const Tensor& kept = v == 0 ? halves.first : halves.second;
      const auto out = split_channels(y);
      CHECK((v == 0 ? out.first : out.second) == kept);
      CHECK((v == 0 ? out.second : out.first) != (v == 0 ? halves.second : halves.first));
    }
  }
}
