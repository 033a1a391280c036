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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rawtfnet/audio.hpp"
#include "rawtfnet/metrics.hpp"
#include "rawtfnet/model.hpp"

namespace rawtfnet {

struct ClassWeights {
  double spoof = 0.1;
  double bonafide = 0.9;
};

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // dL/dlogits, [B, 2]
};

/// sum_i w_{y_i} * -log softmax(logits_i)[y_i] / sum_i w_{y_i}.
LossResult weighted_cross_entropy(const Tensor& logits, const std::vector<Label>& labels,
                                  const ClassWeights& weights = {});

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Coupled L2: added to the gradient before the moment updates.
  double weight_decay = 1e-4;
};

struct OptimState {
  AdamConfig hp;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;
};

/// Zero moments for every trainable tensor in `params`.
OptimState make_optim_state(const ParamList& params, const AdamConfig& hp);

/// One Adam update of the trainable tensors in `params` from their grads.
/// Non-finite gradients throw NumericError before anything is modified.
void adam_step(const ParamList& params, OptimState& state);

// ---------------------------------------------------------------------------

/// Waveforms of a protocol held in memory, in protocol order.
struct Dataset {
  std::vector<ProtocolEntry> entries;
  std::vector<Waveform> waves;
};

/// Reads every entry. Unreadable files are skipped with a warning on `log`
/// when `skip_unreadable` is set, otherwise the error propagates.
Dataset load_dataset(const std::vector<ProtocolEntry>& entries, bool skip_unreadable,
                     std::ostream* log, std::size_t* skipped = nullptr);

struct TrainOptions {
  std::size_t batch_size = 32;
  ClassWeights class_weights;
  bool augment = true;
  AugmentConfig augment_cfg;
  std::uint64_t seed = 1;
};

struct EpochStats {
  double mean_loss = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
};

/// augment -> fix_length -> forward -> loss -> backward -> adam_step for every
/// batch of batch_order(seed, epoch). NumericError messages name the batch.
EpochStats train_epoch(Model& model, OptimState& optim, const Dataset& data,
                       const TrainOptions& opts, std::size_t epoch);

/// Eval-mode logits for each waveform (head crop or tiling to segment_len),
/// computed in chunks of `batch` utterances. Results do not depend on `batch`.
std::vector<Tensor> eval_logits(Model& model, const std::vector<Waveform>& waves,
                                std::size_t batch = 16);

struct ValidationResult {
  double loss = 0.0;
  /// Empty when the split has a single class.
  std::optional<double> eer;
  /// EER when available, otherwise the loss. Lower is better.
  double metric() const { return eer ? *eer : loss; }
};

ValidationResult validate(Model& model, const Dataset& data, const ClassWeights& weights = {});

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  std::string fingerprint;
  std::size_t epoch = 0;
  double metric = 0.0;
  /// Secondary key for equal metrics (validation loss when the metric is EER).
  double tie_break = 0.0;
  std::vector<std::pair<std::string, Tensor>> tensors;  // parameters and BN statistics
};

Checkpoint snapshot(Model& model, std::size_t epoch, double metric, double tie_break = 0.0);
/// Throws ConfigError if the fingerprint, names or shapes disagree.
void restore(Model& model, const Checkpoint& ckpt);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Indices of the k checkpoints with the lowest metric, best first. Equal
/// metrics are ordered by tie_break, then by earlier epoch.
std::vector<std::size_t> select_top_k(const std::vector<Checkpoint>& ckpts, std::size_t k);

/// Mean of the select_top_k checkpoints. Every tensor is averaged, BN
/// statistics included.
Checkpoint average_checkpoints(const std::vector<Checkpoint>& ckpts, std::size_t k = 5);

// ---------------------------------------------------------------------------
// Scoring

struct ScoreRun {
  std::vector<ScoreRecord> records;  // in protocol order
  std::size_t skipped = 0;
};

/// Scores every readable entry: bonafide logit minus spoof logit on the
/// eval-mode segment. Unreadable files are skipped with a warning on `log`.
ScoreRun score_eval_set(Model& model, const std::vector<ProtocolEntry>& entries,
                        std::ostream* log, std::size_t batch = 16);

}  // namespace rawtfnet
