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
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rawtfnet/audio.hpp"

namespace rawtfnet {

/// Detection scores split by class; higher means more bonafide.
struct ScoreSet {
  std::vector<double> bonafide;
  std::vector<double> spoof;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

struct TdcfCosts {
  double c0 = 0.0;
  double c1 = 1.0;
  double c2 = 1.0;
  /// Throws ConfigError on negative coefficients or a zero normalizer.
  void validate() const;
};

struct TdcfResult {
  double min_tdcf = 0.0;  // normalized by c0 + min(c1, c2)
  double threshold = 0.0;
};

struct OperatingPoint {
  double threshold = 0.0;
  double far = 0.0;  // spoof scores >= threshold
  double frr = 0.0;  // bonafide scores < threshold
};

/// Thresholds -inf, midpoints between consecutive distinct scores, +inf.
std::vector<double> sweep_thresholds(const ScoreSet& s);

/// One point per sweep threshold, in increasing threshold order.
std::vector<OperatingPoint> det_points(const ScoreSet& s);

/// FAR == FRR crossing, linearly interpolated between adjacent sweep points.
EerResult compute_eer(const ScoreSet& s);

TdcfResult compute_min_tdcf(const ScoreSet& s, const TdcfCosts& costs);

/// One scored utterance.
struct ScoreRecord {
  std::string utt_id;
  double score = 0.0;
  double duration_s = 0.0;
};

/// "utt_id score" lines, score printed with 9 significant digits.
void write_scores(std::ostream& os, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_scores(std::istream& is);
std::vector<ScoreRecord> read_score_file(const std::string& path);

struct LabeledScore {
  double score = 0.0;
  Label label = Label::spoof;
  double duration_s = 0.0;
};

/// Splits labeled scores by class.
ScoreSet to_score_set(const std::vector<LabeledScore>& scores);

struct DurationBucket {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;
  std::size_t n_bonafide = 0;
  std::size_t n_spoof = 0;
  /// Empty when the bucket lacks one of the classes.
  std::optional<double> eer;

  std::string range_label() const;
};

inline const std::vector<double> kDurationEdges{0.0, 2.0, 4.0, 6.0, 8.0,
                                                std::numeric_limits<double>::infinity()};

/// Partitions by duration into right-open buckets [edges[i], edges[i+1]).
std::vector<DurationBucket> duration_bucketed_eer(const std::vector<LabeledScore>& scores,
                                                  const std::vector<double>& edges = kDurationEdges);

/// "bucket<TAB>n<TAB>eer" lines; eer is "undefined" when not computable.
void write_bucket_tsv(std::ostream& os, const std::vector<DurationBucket>& buckets);

}  // namespace rawtfnet
