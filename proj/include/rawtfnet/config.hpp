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
#include "rawtfnet/train.hpp"

namespace rawtfnet {

struct DataConfig {
  std::string train_protocol;
  std::string train_root;
  std::string dev_protocol;
  std::string dev_root;
  std::string eval_protocol;
  std::string eval_root;
  std::string path_template = kDefaultPathTemplate;
};

struct RunConfig {
  ModelConfig model;
  AugmentConfig augment;
  AdamConfig optim;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::size_t top_k = 5;
  bool use_augment = true;
  ClassWeights class_weights;
  DataConfig data;
  /// Required by train; there are no unseeded runs.
  std::optional<std::uint64_t> seed;
  std::string output_dir = "run";
  std::optional<TdcfCosts> tdcf;
  /// 0 leaves the OpenMP default.
  std::size_t threads = 0;
  std::size_t eval_batch = 16;

  /// Checks every section; ConfigError names the offending key.
  void validate() const;
};

/// Every dotted key in canonical order.
std::vector<std::string> config_keys();
std::string config_get(const RunConfig& cfg, const std::string& key);
/// Throws ConfigError for unknown keys or unparsable values.
void config_set(RunConfig& cfg, const std::string& key, const std::string& value);

/// "key = value" lines; '#' starts a comment. Keys not present keep defaults.
RunConfig parse_config(std::istream& is, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});
/// Writes every key; parse_config(write_config(c)) reproduces c.
void write_config(std::ostream& os, const RunConfig& cfg);

/// Reduced configuration used for the synthetic sanity runs: 16 sinc filters
/// of 33 taps, one narrow SE-Res2Net block and C' = tau = 16 on 1 s segments.
RunConfig tiny_run_config();

}  // namespace rawtfnet
