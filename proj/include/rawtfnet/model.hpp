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
#include <iosfwd>
#include <string>
#include <vector>

#include "rawtfnet/layers.hpp"
#include "rawtfnet/tf_conv.hpp"

namespace rawtfnet {

/// Architecture hyperparameters of RawTFNet-tau.
struct ModelConfig {
  std::size_t tau = 16;
  /// TF-Conv channel width C' = width_mult * tau.
  std::size_t width_mult = 3;
  std::size_t n_tf_blocks = 9;
  std::size_t sinc_filters = 70;
  std::size_t sinc_kernel = 129;
  PoolWindow sinc_pool{3, 3};
  std::size_t resnet_filters = 32;
  std::size_t res2_filters = 64;
  std::size_t n_res2_blocks = 3;
  std::size_t res2_scale = 4;
  std::size_t res2_dilation = 2;
  std::size_t se_reduction = 8;
  /// One window per frontend block (ResNet block, then each SE-Res2Net block).
  std::vector<PoolWindow> frontend_pool{{1, 3}, {1, 3}, {1, 3}, {1, 3}};
  /// 1-based TF block indices followed by a 2x2/2 max-pool.
  std::vector<std::size_t> pool_positions{3, 6};
  bool freq_branch = true;
  bool time_branch = true;
  bool shuffle = true;
  std::size_t shuffle_groups = 2;
  std::size_t sample_rate = 16000;
  std::size_t segment_len = 64000;
  /// Start the classifier at zero so an untrained model scores every input alike.
  bool zero_init_head = true;

  std::size_t tf_width() const { return tau * width_mult; }
  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Stable text identity of every architecture field; stored in checkpoints.
  std::string fingerprint() const;
};

struct ComplexityReport {
  std::vector<LayerCost> rows;
  std::uint64_t total_params = 0;
  std::uint64_t total_macs = 0;
  std::size_t input_length = 0;

  /// Human-readable table with totals.
  void write_table(std::ostream& os) const;
  /// One "layer<TAB>params<TAB>macs" row per layer, then a "total" row.
  void write_tsv(std::ostream& os) const;
};

class Model {
 public:
  Model(const ModelConfig& cfg, Rng& rng);

  /// [N, segment_len] waveforms -> [N, 2] logits (index 1 = bonafide).
  Tensor forward(const Tensor& waves, Mode mode);
  /// Accumulates parameter gradients from dL/dlogits. Requires a prior forward.
  void backward(const Tensor& grad_logits);

  /// Every parameter and BN statistic, in a fixed order.
  ParamList parameters();
  void zero_grad();
  const ModelConfig& config() const { return cfg_; }

  ComplexityReport complexity(std::size_t input_length) const;

  SincConv sinc;
  DwsResBlock resnet;
  std::vector<Res2Block> res2;
  std::vector<TfConvBlock> tf;
  Conv1d head;

 private:
  ModelConfig cfg_;
  MaxPool2d sinc_pool_;
  std::vector<MaxPool2d> tf_pools_;
  std::vector<bool> pool_after_;
  Tensor sinc_out_;
  Shape tf_out_shape_;
  std::size_t n_batch_ = 0;
};

Model build_rawtfnet(const ModelConfig& cfg, Rng& rng);

/// Single waveform [segment_len] -> logits [2].
Tensor forward_utterance(Model& model, const Tensor& wave, Mode mode);
/// bonafide logit minus spoof logit.
double detection_score(const Tensor& logits);

ComplexityReport count_params(const Model& model);
ComplexityReport count_macs(const Model& model, std::size_t input_length);

}  // namespace rawtfnet
