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
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "naive.hpp"
#include "rawtfnet/errors.hpp"
#include "rawtfnet/model.hpp"
#include "rawtfnet/train.hpp"
#include "support.hpp"

using namespace rawtfnet;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.tau = 4;
  c.width_mult = 1;
  c.n_tf_blocks = 1;
  c.pool_positions = {1};
  c.sinc_filters = 4;
  c.sinc_kernel = 33;
  c.sinc_pool = {1, 3};
  c.resnet_filters = 6;
  c.n_res2_blocks = 0;
  c.frontend_pool = {{1, 3}};
  c.segment_len = 2000;
  c.zero_init_head = false;
  return c;
}

void randomize(BatchNorm2d& bn, Rng& rng) {
  for (std::size_t c = 0; c < bn.gamma.value.size(); ++c) {
    bn.gamma.value[c] = rng.uniform(0.5, 1.5);
    bn.beta.value[c] = rng.uniform(-0.5, 0.5);
    bn.running_mean.value[c] = rng.uniform(-0.3, 0.3);
    bn.running_var.value[c] = rng.uniform(0.5, 2.0);
  }
}

naive::Map bn(const naive::Map& x, const BatchNorm2d& b, Mode mode) {
  return naive::batchnorm(x, {b.gamma.value.vec(), b.beta.value.vec(), b.running_mean.value.vec(),
                              b.running_var.value.vec()},
                          mode == Mode::train);
}

// Channel c of the grouped layout (g, C/g) moves to position (c % (C/g)) * g + c / (C/g).
naive::Map shuffled(const naive::Map& x, std::size_t g) {
  naive::Map y = x;
  const std::size_t per = x.c / g, plane = x.h * x.w;
  for (std::size_t n = 0; n < x.n; ++n)
    for (std::size_t c = 0; c < x.c; ++c) {
      const std::size_t to = (c % per) * g + c / per;
      for (std::size_t p = 0; p < plane; ++p)
        y.v[(n * x.c + to) * plane + p] = x.v[(n * x.c + c) * plane + p];
    }
  return y;
}

// Adds v (extent 1 along `axis`) to every position of x along that axis.
naive::Map broadcast(const naive::Map& x, const naive::Map& v, int axis) {
  naive::Map y = x;
  for (std::size_t n = 0; n < x.n; ++n)
    for (std::size_t c = 0; c < x.c; ++c)
      for (std::size_t f = 0; f < x.h; ++f)
        for (std::size_t t = 0; t < x.w; ++t) {
          const std::size_t vf = axis == 2 ? 0 : f, vt = axis == 3 ? 0 : t;
          y.v[((n * x.c + c) * x.h + f) * x.w + t] += v.v[((n * v.c + c) * v.h + vf) * v.w + vt];
        }
  return y;
}

naive::Map branch(const AxisBranch& b, const naive::Map& x, int axis, Mode mode) {
  const std::size_t kh = axis == 2 ? 3 : 1, kw = axis == 2 ? 1 : 3;
  const auto h = naive::relu(bn(naive::depthwise(x, b.dw.weight.value, kh, kw), b.bn_dw, mode));
  return bn(naive::pointwise(naive::mean_axis(h, axis), b.pw.weight.value, x.c), b.bn_pw, mode);
}

// Straight-line forward of the tiny config.
std::vector<double> reference_logits(Model& m, const Tensor& waves, Mode mode) {
  const ModelConfig& c = m.config();
  const std::size_t N = waves.shape()[0], L = waves.shape()[1], K = c.sinc_kernel;
  const std::size_t F = c.sinc_filters, T = L - K + 1;
  const double sr = static_cast<double>(c.sample_rate);
  naive::Map x(N, 1, F, T);
  for (std::size_t k = 0; k < F; ++k) {
    const double f1 = std::abs(m.sinc.low_hz.value[k]);
    const double f2 = std::min(f1 + std::abs(m.sinc.band_hz.value[k]), sr / 2);
    const auto taps = naive::bandpass_taps(f1 / sr, f2 / sr, K);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t t = 0; t < T; ++t) {
        double s = 0.0;
        for (std::size_t j = 0; j < K; ++j) s += taps[j] * waves.at({n, t + j});
        x.v[(n * F + k) * T + t] = std::abs(s);
      }
  }
  x = naive::maxpool(x, 1, 3);

  const auto& r = m.resnet;
  const std::size_t R = c.resnet_filters;
  auto h = naive::relu(bn(naive::pointwise(naive::depthwise(x, r.dw1.weight.value, 3, 3), r.pw1.weight.value, R), r.bn1, mode));
  h = bn(naive::pointwise(naive::depthwise(h, r.dw2.weight.value, 3, 3), r.pw2.weight.value, R), r.bn2, mode);
  const auto skip = bn(naive::pointwise(x, r.shortcut.weight.value, R), r.bn_shortcut, mode);
  x = naive::maxpool(naive::relu(naive::plus(h, skip)), 1, 3);

  const auto& b = m.tf[0];
  const std::size_t W = c.tf_width();
  auto mixed = shuffled(naive::relu(bn(naive::pointwise(x, b.transition.weight.value, W), b.bn_transition, mode)), 2);
  const auto xf = naive::channels(mixed, 0, W / 2), xt = naive::channels(mixed, W / 2, W);
  x = naive::stack_channels({broadcast(xf, branch(b.freq, xf, 2, mode), 2),
                             broadcast(xt, branch(b.time, xt, 3, mode), 3)});
  x = naive::maxpool(x, 2, 2);

  const auto pooled = naive::mean_axis(x, 2);
  std::vector<double> logits(N * 2, 0.0);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < 2; ++o) {
      double acc = 0.0;
      for (std::size_t t = 0; t < pooled.w; ++t) {
        double s = m.head.bias.value[o];
        for (std::size_t ch = 0; ch < W; ++ch)
          s += m.head.weight.value[o * W + ch] * pooled.v[(n * W + ch) * pooled.w + t];
        acc += s;
      }
      logits[n * 2 + o] = acc / static_cast<double>(pooled.w);
    }
  return logits;
}

std::uint64_t trainable_scalars(Model& m) {
  std::uint64_t n = 0;
  for (Param* p : m.parameters())
    if (p->trainable) n += p->value.size();
  return n;
}

std::uint64_t rows_with_prefix(const ComplexityReport& rep, const std::string& infix) {
  std::uint64_t n = 0;
  for (const auto& r : rep.rows)
    if (r.name.find(infix) != std::string::npos) n += r.params;
  return n;
}

}  // namespace

TEST_CASE("tiny model matches the straight-line reference") {
  Rng rng(11);
  Model m(tiny(), rng);
  for (BatchNorm2d* b : {&m.resnet.bn1, &m.resnet.bn2, &m.resnet.bn_shortcut, &m.tf[0].bn_transition,
                         &m.tf[0].freq.bn_dw, &m.tf[0].freq.bn_pw, &m.tf[0].time.bn_dw, &m.tf[0].time.bn_pw})
    randomize(*b, rng);
  for (std::size_t o = 0; o < 2; ++o) m.head.bias.value[o] = rng.uniform(-0.5, 0.5);
  const Tensor waves = random_uniform({3, 2000}, rng);
  for (Mode mode : {Mode::eval, Mode::train}) {
    INFO(std::string(mode == Mode::train ? "train" : "eval"));
    const auto want = reference_logits(m, waves, mode);
    const Tensor got = m.forward(waves, mode);
    REQUIRE(got.shape() == Shape{3, 2});
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-10);
  }
}

TEST_CASE("forward_utterance") {
  Rng rng(12);
  Model m(tiny(), rng);
  const Tensor wave = random_uniform({2000}, rng);
  const Tensor a = forward_utterance(m, wave, Mode::eval);
  const Tensor b = forward_utterance(m, wave, Mode::eval);
  CHECK(a == b);
  CHECK(std::isfinite(detection_score(a)));
  CHECK(detection_score(a) == a[1] - a[0]);
  CHECK_THROWS_AS(forward_utterance(m, random_uniform({1999}, rng), Mode::eval), DimensionError);
  CHECK_THROWS_AS(m.forward(random_uniform({1, 2001}, rng), Mode::eval), DimensionError);
  CHECK_THROWS_AS(detection_score(Tensor({3})), DimensionError);

  ModelConfig zero = tiny();
  zero.zero_init_head = true;
  Model z(zero, rng);
  for (int i = 0; i < 3; ++i) CHECK(detection_score(forward_utterance(z, random_uniform({2000}, rng), Mode::eval)) == 0.0);
}

TEST_CASE("full-size model") {
  ModelConfig c16;
  Rng r1(5), r2(5);
  Model a(c16, r1), b(c16, r2);
  const auto pa = a.parameters(), pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);

  std::set<std::string> names;
  for (Param* p : pa) CHECK(names.insert(p->name).second);

  Rng rng(6);
  const Tensor logits = forward_utterance(a, random_uniform({64000}, rng, -0.5, 0.5), Mode::eval);
  CHECK(logits.size() == 2);
  CHECK(std::isfinite(logits[0]));
  CHECK(std::isfinite(logits[1]));

  ModelConfig c32;
  c32.tau = 32;
  Rng r3(5);
  Model big(c32, r3);
  CHECK(count_params(big).total_params > count_params(a).total_params);
}

TEST_CASE("complexity report") {
  for (std::size_t tau : {16u, 32u}) {
    ModelConfig cfg;
    cfg.tau = tau;
    Rng rng(1);
    Model m(cfg, rng);
    const ComplexityReport rep = count_macs(m, 64000);
    std::uint64_t p = 0, q = 0;
    for (const auto& r : rep.rows) {
      p += r.params;
      q += r.macs;
    }
    CHECK(rep.total_params == p);
    CHECK(rep.total_macs == q);
    CHECK(rep.input_length == 64000);
    CHECK(rep.total_params == trainable_scalars(m));
    CHECK(count_params(m).total_params == rep.total_params);

    // Published sizes 0.07M / 0.17M params, 2.9G / 5.4G MACs; factor-of-2 bands.
    const double params = static_cast<double>(rep.total_params);
    const double macs = static_cast<double>(rep.total_macs);
    const double want_p = tau == 16 ? 0.07e6 : 0.17e6;
    const double want_m = tau == 16 ? 2.9e9 : 5.4e9;
    CHECK(params >= want_p / 2);
    CHECK(params <= want_p * 2);
    CHECK(macs >= want_m / 2);
    CHECK(macs <= want_m * 2);

    std::ostringstream tsv;
    rep.write_tsv(tsv);
    const std::string s = tsv.str();
    CHECK(std::count(s.begin(), s.end(), '\n') == static_cast<long>(rep.rows.size() + 1));
    CHECK(s.find("total\t" + std::to_string(rep.total_params) + "\t" + std::to_string(rep.total_macs)) !=
          std::string::npos);
  }
}

TEST_CASE("one Adam step with nonzero gradients touches exactly the counted scalars") {
  Rng rng(13);
  Model m(tiny(), rng);
  const auto params = m.parameters();
  std::vector<Tensor> before;
  for (Param* p : params) {
    before.push_back(p->value);
    p->grad.fill(1.0);
  }
  OptimState st = make_optim_state(params, AdamConfig{});
  adam_step(params, st);
  std::uint64_t changed = 0;
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t j = 0; j < before[i].size(); ++j) changed += params[i]->value[j] != before[i][j];
  CHECK(changed == count_params(m).total_params);
}

TEST_CASE("ablation variants") {
  ModelConfig base = tiny();
  base.n_tf_blocks = 2;
  base.pool_positions = {1};
  Rng r0(3);
  Model full(base, r0);
  const ComplexityReport full_rep = count_params(full);
  struct Variant {
    const char* removed;
    bool freq, time, shuffle;
  };
  for (const Variant v : {Variant{".freq.", false, true, true}, Variant{".time.", true, false, true},
                          Variant{"shuffle", true, true, false}}) {
    INFO(std::string(v.removed));
    ModelConfig cfg = base;
    cfg.freq_branch = v.freq;
    cfg.time_branch = v.time;
    cfg.shuffle = v.shuffle;
    Rng rng(3);
    Model m(cfg, rng);
    const std::uint64_t delta = full_rep.total_params - count_params(m).total_params;
    CHECK(delta == rows_with_prefix(full_rep, v.removed));
    if (v.shuffle) CHECK(delta > 0);

    const Tensor waves = random_uniform({4, cfg.segment_len}, rng);
    const LossResult loss = weighted_cross_entropy(
        m.forward(waves, Mode::train), {Label::spoof, Label::bonafide, Label::spoof, Label::bonafide});
    CHECK(std::isfinite(loss.loss));
    m.zero_grad();
    m.backward(loss.grad);
    OptimState st = make_optim_state(m.parameters(), AdamConfig{});
    CHECK_NOTHROW(adam_step(m.parameters(), st));
  }
}

TEST_CASE("model configuration errors name the field") {
  auto expect = [](ModelConfig c, const std::string& field) {
    Rng rng(0);
    try {
      Model m(c, rng);
      FAIL("accepted an invalid " << field);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  ModelConfig c = tiny();
  c.pool_positions = {2};
  expect(c, "pool_positions");
  c = tiny();
  c.tau = 5;
  expect(c, "tau");
  c = tiny();
  c.segment_len = 20;
  expect(c, "segment_len");
  c = tiny();
  c.frontend_pool = {};
  expect(c, "frontend_pool");
  c = tiny();
  c.freq_branch = c.time_branch = false;
  expect(c, "branch");
  c = tiny();
  c.sinc_kernel = 32;
  expect(c, "sinc_kernel");
  c = tiny();
  c.segment_len = 34;
  expect(c, "segment_len");
}
