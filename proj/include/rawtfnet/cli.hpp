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
#include <iosfwd>
#include <optional>
#include <string>

#include "rawtfnet/config.hpp"

namespace rawtfnet::cli {

enum ExitCode : int { kOk = 0, kPartial = 1, kUsage = 2, kNumeric = 3 };

/// Trains with per-epoch validation. Writes <output_dir>/config.txt,
/// train.log, checkpoints/epoch_NNN.ckpt, averaged.ckpt and, when an eval
/// protocol is configured, scores.txt from the averaged model.
int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Scores `protocol` with the checkpoint at `model_path`. Exit 1 when any
/// file was skipped.
int cmd_score(const RunConfig& cfg, const std::string& model_path, const std::string& protocol,
              const std::string& audio_root, const std::string& out_file, std::ostream& out,
              std::ostream& err);

/// Prints EER (and min t-DCF when costs are given); optional TSV report.
int cmd_evaluate(const std::string& score_file, const std::string& protocol,
                 const std::optional<TdcfCosts>& costs, const std::string& report_path,
                 std::ostream& out, std::ostream& err);

/// Per-duration-bucket EER table; durations come from the audio files.
int cmd_analyze_durations(const std::string& score_file, const std::string& protocol,
                          const std::string& audio_root, const std::string& path_template,
                          const std::string& tsv_path, std::ostream& out, std::ostream& err);

/// Per-layer table and totals; `tsv_path` receives the machine format.
int cmd_complexity(const RunConfig& cfg, std::size_t input_len, const std::string& tsv_path,
                   std::ostream& out, std::ostream& err);

/// Writes the synthetic corpus plus <dir>/synthetic.cfg, a ready-to-train
/// tiny configuration pointing at it.
int cmd_gen_synthetic(const std::string& dir, const SyntheticConfig& syn, std::ostream& out,
                      std::ostream& err);

/// Full command-line entry point.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Keeps large tensor buffers in the heap between batches (glibc only).
void tune_allocator();

}  // namespace rawtfnet::cli
