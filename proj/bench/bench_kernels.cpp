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


// OpenMP production kernels against the serial reference loops, on the
// shapes that dominate a RawTFNet forward pass.

#include <benchmark/benchmark.h>

#include "rawtfnet/geometry_util.hpp"
#include "rawtfnet/kernels.hpp"

namespace {

using namespace rawtfnet;

// Shape of one TF-Conv stage at tau=16: 48 channels, 23 x 295 map.
constexpr std::size_t kC = 48, kH = 23, kW = 295;

Conv2dGeometry shape_for(int kind) {
  switch (kind) {
    case 0: return pointwise(kC, kC);
    case 1: return depthwise(kC, 3, 1, 1, 1);
    default: {
      Conv2dGeometry g;
      g.in_channels = 1;
      g.out_channels = 16;
      g.kernel_w = 129;
      return g;  // sinc-like wide 1xK filter bank
    }
  }
}

Tensor input_for(int kind, Rng& rng) {
  return kind == 2 ? random_uniform({4, 1, 1, 16000}, rng) : random_uniform({4, kC, kH, kW}, rng);
}

void label(benchmark::State& state, int kind) {
  static const char* names[] = {"pointwise 48->48", "depthwise 3x1", "1x129 filter bank"};
  state.SetLabel(names[kind]);
}

void BM_Conv2dParallel(benchmark::State& state) {
  const int kind = static_cast<int>(state.range(0));
  Rng rng(1);
  const Conv2dGeometry g = shape_for(kind);
  const Tensor x = input_for(kind, rng);
  const Tensor w = random_uniform(g.weight_shape(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d_forward(x, w, Tensor(), g));
  label(state, kind);
}

void BM_Conv2dReference(benchmark::State& state) {
  const int kind = static_cast<int>(state.range(0));
  Rng rng(1);
  const Conv2dGeometry g = shape_for(kind);
  const Tensor x = input_for(kind, rng);
  const Tensor w = random_uniform(g.weight_shape(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d(x, w, Tensor(), g));
  label(state, kind);
}

void BM_Conv2dBackwardInput(benchmark::State& state) {
  const int kind = static_cast<int>(state.range(0));
  Rng rng(1);
  const Conv2dGeometry g = shape_for(kind);
  const Tensor x = input_for(kind, rng);
  const Tensor w = random_uniform(g.weight_shape(), rng);
  const Tensor gy = kernels::conv2d_forward(x, w, Tensor(), g);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d_backward_input(gy, w, g, x.shape()));
  label(state, kind);
}

void BM_MaxPoolParallel(benchmark::State& state) {
  Rng rng(1);
  const Tensor x = random_uniform({4, kC, kH, kW}, rng);
  std::vector<std::size_t> argmax;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::maxpool2d_forward(x, {2, 2, 2, 2}, argmax));
}

void BM_MaxPoolReference(benchmark::State& state) {
  Rng rng(1);
  const Tensor x = random_uniform({4, kC, kH, kW}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(reference::maxpool2d(x, {2, 2, 2, 2}));
}

BENCHMARK(BM_Conv2dParallel)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dReference)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dBackwardInput)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxPoolParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxPoolReference)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
