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


#include "rawtfnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rawtfnet/errors.hpp"

namespace rawtfnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_both_classes(const ScoreSet& s, const char* what) {
  if (s.bonafide.empty() || s.spoof.empty())
    throw DataError(std::string(what) + ": both bonafide and spoof scores are required");
  for (const auto* v : {&s.bonafide, &s.spoof})
    for (double x : *v)
      if (!std::isfinite(x)) throw DataError(std::string(what) + ": non-finite score");
}

}  // namespace

void TdcfCosts::validate() const {
  if (c0 < 0.0 || c1 < 0.0 || c2 < 0.0) throw ConfigError("tdcf costs must be nonnegative");
  if (!(c0 + std::min(c1, c2) > 0.0)) throw ConfigError("tdcf normalizer c0 + min(c1, c2) is zero");
}

std::vector<double> sweep_thresholds(const ScoreSet& s) {
  std::vector<double> all(s.bonafide);
  all.insert(all.end(), s.spoof.begin(), s.spoof.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> t{-kInf};
  for (std::size_t i = 1; i < all.size(); ++i) t.push_back(all[i - 1] + (all[i] - all[i - 1]) / 2.0);
  t.push_back(kInf);
  return t;
}

std::vector<OperatingPoint> det_points(const ScoreSet& s) {
  require_both_classes(s, "det_points");
  std::vector<double> bona(s.bonafide), spoof(s.spoof);
  std::sort(bona.begin(), bona.end());
  std::sort(spoof.begin(), spoof.end());
  const double nb = static_cast<double>(bona.size());
  const double ns = static_cast<double>(spoof.size());
  std::vector<OperatingPoint> pts;
  std::size_t ib = 0, is = 0;  // counts of scores below the threshold
  for (double t : sweep_thresholds(s)) {
    while (ib < bona.size() && bona[ib] < t) ++ib;
    while (is < spoof.size() && spoof[is] < t) ++is;
    pts.push_back({t, static_cast<double>(spoof.size() - is) / ns, static_cast<double>(ib) / nb});
  }
  return pts;
}

EerResult compute_eer(const ScoreSet& s) {
  const auto pts = det_points(s);
  std::size_t k = 0;
  while (pts[k].far - pts[k].frr > 0.0) ++k;  // the last point has far - frr == -1
  const double dk = pts[k].far - pts[k].frr;
  if (dk == 0.0) return {pts[k].far, pts[k].threshold};
  const OperatingPoint& a = pts[k - 1];
  const OperatingPoint& b = pts[k];
  const double da = a.far - a.frr;
  const double alpha = da / (da - dk);
  const double eer = a.frr + alpha * (b.frr - a.frr);
  double threshold;
  if (std::isfinite(a.threshold) && std::isfinite(b.threshold))
    threshold = a.threshold + alpha * (b.threshold - a.threshold);
  else if (std::isfinite(a.threshold))
    threshold = a.threshold;
  else if (std::isfinite(b.threshold))
    threshold = b.threshold;
  else
    threshold = s.bonafide.front();  // a single distinct score value
  return {eer, threshold};
}

TdcfResult compute_min_tdcf(const ScoreSet& s, const TdcfCosts& costs) {
  costs.validate();
  const double norm = costs.c0 + std::min(costs.c1, costs.c2);
  TdcfResult best{kInf, 0.0};
  for (const auto& p : det_points(s)) {
    const double v = (costs.c0 + costs.c1 * p.frr + costs.c2 * p.far) / norm;
    if (v < best.min_tdcf) best = {v, p.threshold};
  }
  return best;
}

void write_scores(std::ostream& os, const std::vector<ScoreRecord>& records) {
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.9g", r.score);
    os << r.utt_id << ' ' << buf << '\n';
  }
}

std::vector<ScoreRecord> read_scores(std::istream& is) {
  std::vector<ScoreRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    ScoreRecord r;
    std::string score, extra;
    if (!(ls >> r.utt_id)) continue;
    if (!(ls >> score) || (ls >> extra))
      throw ParseError("score line " + std::to_string(line_no) + ": expected 'utt_id score'");
    std::size_t used = 0;
    try {
      r.score = std::stod(score, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != score.size() || !std::isfinite(r.score))
      throw ParseError("score line " + std::to_string(line_no) + ": bad score '" + score + "'");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ScoreRecord> read_score_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open score file " + path);
  return read_scores(in);
}

ScoreSet to_score_set(const std::vector<LabeledScore>& scores) {
  ScoreSet s;
  for (const auto& x : scores) (x.label == Label::bonafide ? s.bonafide : s.spoof).push_back(x.score);
  return s;
}

std::string DurationBucket::range_label() const {
  char buf[64];
  if (std::isinf(hi))
    std::snprintf(buf, sizeof buf, "%gs+", lo);
  else
    std::snprintf(buf, sizeof buf, "%g-%gs", lo, hi);
  return buf;
}

std::vector<DurationBucket> duration_bucketed_eer(const std::vector<LabeledScore>& scores,
                                                  const std::vector<double>& edges) {
  if (edges.size() < 2) throw ConfigError("duration edges need at least two values");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw ConfigError("duration edges must be strictly increasing");
  std::vector<DurationBucket> buckets(edges.size() - 1);
  std::vector<std::vector<LabeledScore>> members(buckets.size());
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    buckets[i].lo = edges[i];
    buckets[i].hi = edges[i + 1];
  }
  for (const auto& x : scores) {
    if (!(x.duration_s >= 0.0)) throw DataError("negative or invalid duration");
    const auto it = std::upper_bound(edges.begin(), edges.end(), x.duration_s);
    if (it == edges.begin() || it == edges.end())
      throw DataError("duration " + std::to_string(x.duration_s) + " s outside bucket edges");
    members[static_cast<std::size_t>(it - edges.begin()) - 1].push_back(x);
  }
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    const ScoreSet s = to_score_set(members[i]);
    buckets[i].n = members[i].size();
    buckets[i].n_bonafide = s.bonafide.size();
    buckets[i].n_spoof = s.spoof.size();
    if (!s.bonafide.empty() && !s.spoof.empty()) buckets[i].eer = compute_eer(s).eer;
  }
  return buckets;
}

void write_bucket_tsv(std::ostream& os, const std::vector<DurationBucket>& buckets) {
  char buf[64];
  for (const auto& b : buckets) {
    os << b.range_label() << '\t' << b.n << '\t';
    if (b.eer) {
      std::snprintf(buf, sizeof buf, "%.9g", *b.eer);
      os << buf << '\n';
    } else {
      os << "undefined\n";
    }
  }
}

}  // namespace rawtfnet
