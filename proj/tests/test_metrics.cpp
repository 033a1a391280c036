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


#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "metric_oracle.hpp"
#include "rawtfnet/errors.hpp"
#include "rawtfnet/metrics.hpp"

using namespace rawtfnet;

TEST_CASE("EER hand cases") {
  CHECK(compute_eer({{2, 3}, {0, 1}}).eer == 0.0);
  CHECK(compute_eer({{0, 1}, {2, 3}}).eer == 1.0);
  CHECK(compute_eer({{1, 3}, {0, 2}}).eer == 0.5);
  const EerResult r = compute_eer({{2, 3}, {0, 1}});
  CHECK(r.threshold > 1.0);
  CHECK(r.threshold <= 2.0);
  // One distinct value: every threshold accepts both or rejects both.
  CHECK(compute_eer({{1.0}, {1.0}}).eer == 0.5);
  CHECK_THROWS_AS(compute_eer({{}, {1.0}}), DataError);
  CHECK_THROWS_AS(compute_eer({{1.0}, {}}), DataError);
  CHECK_THROWS_AS(compute_eer({{std::nan("")}, {1.0}}), DataError);
}

TEST_CASE("t-DCF hand cases") {
  CHECK(compute_min_tdcf({{2, 3}, {0, 1}}, {0, 1, 1}).min_tdcf == 0.0);
  CHECK(compute_min_tdcf({{2, 3}, {0, 1}}, {1, 1, 2}).min_tdcf == 0.5);
  // Anti-separated: best is a degenerate threshold, C0 + min(C1, C2) over the normalizer.
  CHECK(compute_min_tdcf({{0, 1}, {2, 3}}, {1, 1, 2}).min_tdcf == 1.0);
  CHECK_THROWS_AS(compute_min_tdcf({{1}, {0}}, {0, 0, 1}), ConfigError);
  CHECK_THROWS_AS(compute_min_tdcf({{1}, {0}}, {-1, 1, 1}), ConfigError);
}

TEST_CASE("EER and t-DCF against brute force") {
  Rng rng(2026);
  std::vector<double> b, s;
  for (int k = 0; k < 300; ++k) {
    oracle::random_scores(rng, b, s, 120, k % 3 == 0);
    const ScoreSet set{b, s};
    const double e = compute_eer(set).eer;
    CHECK(std::abs(e - oracle::eer(b, s)) < 1e-12);

    // Bracketed by the operating points on either side of the crossing.
    double lo = 0.0, hi = 1.0;
    for (const auto& p : oracle::operating_points(b, s)) {
      hi = std::min(hi, std::max(p.far, p.frr));
      lo = std::max(lo, std::min(p.far, p.frr));
    }
    CHECK(e <= hi + 1e-15);
    CHECK(e >= lo - 1e-15);

    const double c0 = rng.uniform(0.0, 1.0), c1 = rng.uniform(0.1, 2.0), c2 = rng.uniform(0.1, 2.0);
    const double t = compute_min_tdcf(set, {c0, c1, c2}).min_tdcf;
    CHECK(std::abs(t - oracle::min_tdcf(b, s, c0, c1, c2)) < 1e-12);
    const double norm = c0 + std::min(c1, c2);
    CHECK(t >= c0 / norm - 1e-15);
    CHECK(t <= 1.0 + 1e-15);
  }

  // 50 + 50 distinct scores: 101 operating points.
  b.clear();
  s.clear();
  for (int i = 0; i < 50; ++i) {
    b.push_back(0.5 + rng.normal());
    s.push_back(rng.normal());
  }
  CHECK(det_points({b, s}).size() == 101);
  CHECK(oracle::operating_points(b, s).size() == 101);
  CHECK(std::abs(compute_min_tdcf({b, s}, {0.2, 1.0, 3.0}).min_tdcf - oracle::min_tdcf(b, s, 0.2, 1.0, 3.0)) < 1e-12);
}

TEST_CASE("metrics depend only on score ranks") {
  Rng rng(7);
  std::vector<double> b, s;
  for (int k = 0; k < 50; ++k) {
    oracle::random_scores(rng, b, s, 60, k % 2 == 0);
    std::vector<double> tb, ts;
    for (double v : b) tb.push_back(std::exp(0.5 * v) + 3.0);
    for (double v : s) ts.push_back(std::exp(0.5 * v) + 3.0);
    CHECK(compute_eer({tb, ts}).eer == doctest::Approx(compute_eer({b, s}).eer).epsilon(1e-12));
    CHECK(compute_min_tdcf({tb, ts}, {0.3, 1, 2}).min_tdcf ==
          doctest::Approx(compute_min_tdcf({b, s}, {0.3, 1, 2}).min_tdcf).epsilon(1e-12));
  }
}

TEST_CASE("duplicated scores add no operating points") {
  Rng rng(8);
  std::vector<double> b, s;
  for (int k = 0; k < 50; ++k) {
    oracle::random_scores(rng, b, s, 40, false);
    const auto before = det_points({b, s});
    std::vector<double> b2 = b;
    b2.push_back(s[rng.below(s.size())]);
    const auto after = det_points({b2, s});
    CHECK(after.size() == before.size());
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i].threshold == before[i].threshold);
  }
}

TEST_CASE("DET points") {
  const auto p = det_points({{1, 4, 5}, {0, 2, 3, 6}});
  REQUIRE(p.size() == 8);
  CHECK(p.front().far == 1.0);
  CHECK(p.front().frr == 0.0);
  CHECK(p.back().far == 0.0);
  CHECK(p.back().frr == 1.0);
  Rng rng(9);
  std::vector<double> b, s;
  for (int k = 0; k < 100; ++k) {
    oracle::random_scores(rng, b, s, 50, k % 2 == 1);
    const auto q = det_points({b, s});
    for (std::size_t i = 1; i < q.size(); ++i) {
      CHECK(q[i].far <= q[i - 1].far);
      CHECK(q[i].frr >= q[i - 1].frr);
      CHECK(q[i].threshold > q[i - 1].threshold);
    }
  }
  const auto t = sweep_thresholds({{1, 1, 3}, {2}});
  CHECK(t == std::vector<double>{-std::numeric_limits<double>::infinity(), 1.5, 2.5,
                                 std::numeric_limits<double>::infinity()});
}

TEST_CASE("duration buckets") {
  std::vector<LabeledScore> recs{{1.0, Label::bonafide, 3.5}, {0.0, Label::spoof, 3.9},
                                 {2.0, Label::bonafide, 4.0}, {2.5, Label::spoof, 5.0},
                                 {0.5, Label::spoof, 9.0},    {0.0, Label::spoof, 0.0}};
  const auto bk = duration_bucketed_eer(recs);
  REQUIRE(bk.size() == 5);
  CHECK(bk[0].n == 1);
  CHECK(!bk[0].eer);
  CHECK(bk[1].n == 2);
  CHECK(bk[1].eer == 0.0);
  CHECK(bk[2].n == 2);
  CHECK(bk[2].eer == 1.0);
  CHECK(bk[3].n == 0);
  CHECK(bk[4].n == 1);
  CHECK(bk[1].range_label() == "2-4s");
  CHECK(bk[4].range_label() == "8s+");

  std::ostringstream os;
  write_bucket_tsv(os, bk);
  CHECK(os.str() == "0-2s\t1\tundefined\n2-4s\t2\t0\n4-6s\t2\t1\n6-8s\t0\tundefined\n8s+\t1\tundefined\n");

  Rng rng(10);
  std::vector<LabeledScore> one;
  for (int i = 0; i < 40; ++i)
    one.push_back({rng.normal() + (i % 2), i % 2 ? Label::bonafide : Label::spoof, rng.uniform(4.0, 6.0)});
  const auto ob = duration_bucketed_eer(one);
  CHECK(ob[2].n == 40);
  CHECK(*ob[2].eer == compute_eer(to_score_set(one)).eer);

  CHECK_THROWS_AS(duration_bucketed_eer({{0.0, Label::spoof, -1.0}}), DataError);
}

TEST_CASE("score files") {
  std::vector<ScoreRecord> recs{{"A", 1.25, 0}, {"B", -3e-7, 0}};
  std::ostringstream os;
  write_scores(os, recs);
  CHECK(os.str() == "A 1.25\nB -3e-07\n");
  std::istringstream is(os.str() + "\n");
  const auto back = read_scores(is);
  REQUIRE(back.size() == 2);
  CHECK(back[0].utt_id == "A");
  CHECK(back[1].score == -3e-7);
  for (const char* bad : {"A\n", "A 1 2\n", "A x\n", "A nan\n"}) {
    std::istringstream b(bad);
    CHECK_THROWS_AS(read_scores(b), ParseError);
  }
}
