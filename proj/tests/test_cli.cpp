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


#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "rawtfnet/cli.hpp"
#include "rawtfnet/errors.hpp"
#include "support.hpp"

using namespace rawtfnet;
using rawtfnet::testing::scratch_dir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "rawtfnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Small model so a full train/score cycle takes well under a second.
const std::vector<std::string> kSmall{"--model.tau",          "4",  "--model.sinc_filters", "4",
                                      "--model.sinc_kernel",  "33", "--model.resnet_filters", "4",
                                      "--model.res2_filters", "8",  "--model.n_tf_blocks",  "2",
                                      "--model.pool_positions", "1", "--model.segment_len", "4000",
                                      "--train.batch_size", "4", "--model.sinc_pool", "1x3"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

fs::path corpus() {
  static const fs::path dir = [] {
    const fs::path d = scratch_dir("cli_corpus");
    const Result r = run({"gen-synthetic", "--out-dir", d.string(), "--n-train", "12", "--n-dev", "6",
                          "--n-eval", "8", "--seed", "3"});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

std::map<std::string, double> tsv_totals(const std::string& text) {
  std::map<std::string, double> rows;
  std::istringstream is(text);
  std::string name;
  double p, m;
  while (is >> name >> p >> m) rows[name] = p;
  return rows;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("cli train") {
  const fs::path data = corpus();
  const std::string cfg = (data / "synthetic.cfg").string();
  REQUIRE(fs::exists(cfg));
  const fs::path a = scratch_dir("cli_train_a"), b = scratch_dir("cli_train_b");
  const auto base = with({"train", "--config", cfg, "--epochs", "2"}, kSmall);

  const Result ra = run(with(base, {"--output_dir", a.string()}));
  INFO(ra.err);
  REQUIRE(ra.code == 0);
  for (const char* f : {"checkpoints/epoch_001.ckpt", "checkpoints/epoch_002.ckpt", "averaged.ckpt",
                        "train.log", "scores.txt", "config.txt"})
    CHECK_MESSAGE(fs::exists(a / f), f);
  CHECK(ra.out.find("eval EER") != std::string::npos);

  const Result rb = run(with(base, {"--output_dir", b.string()}));
  REQUIRE(rb.code == 0);
  auto body = [](const std::string& log) { return log.substr(log.find('\n') + 1); };
  CHECK(body(slurp(a / "train.log")) == body(slurp(b / "train.log")));
  CHECK(slurp(a / "scores.txt") == slurp(b / "scores.txt"));
  CHECK(slurp(a / "averaged.ckpt") == slurp(b / "averaged.ckpt"));
  CHECK(slurp(a / "checkpoints/epoch_002.ckpt") == slurp(b / "checkpoints/epoch_002.ckpt"));

  SUBCASE("lr 0 keeps the initial weights") {
    const fs::path z = scratch_dir("cli_train_lr0");
    const Result rz = run(with(base, {"--output_dir", z.string(), "--lr", "0"}));
    REQUIRE(rz.code == 0);
    const RunConfig rc = load_config((z / "config.txt").string());
    Rng init = Rng::derive(*rc.seed, 1);
    Model fresh(rc.model, init);
    const Checkpoint last = load_checkpoint((z / "checkpoints/epoch_002.ckpt").string());
    const auto params = fresh.parameters();
    REQUIRE(params.size() == last.tensors.size());
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i]->trainable) CHECK_MESSAGE(params[i]->value == last.tensors[i].second, params[i]->name);
  }

  SUBCASE("score") {
    const std::string proto = (data / "eval.txt").string();
    const fs::path out1 = a / "s1.txt", out2 = a / "s2.txt";
    auto score = [&](const fs::path& out, const std::string& root) {
      return run(with({"score", "--config", cfg, "--model", (a / "averaged.ckpt").string(), "--protocol", proto,
                       "--audio-root", root, "--out", out.string()},
                      kSmall));
    };
    REQUIRE(score(out1, (data / "eval").string()).code == 0);
    REQUIRE(score(out2, (data / "eval").string()).code == 0);
    CHECK(slurp(out1) == slurp(out2));
    CHECK(slurp(out1) == slurp(a / "scores.txt"));
    const std::string text = slurp(out1);
    CHECK(std::count(text.begin(), text.end(), '\n') == 8);

    // Corrupt one file in a copy of the eval audio.
    const fs::path broken = scratch_dir("cli_broken");
    for (const auto& e : fs::directory_iterator(data / "eval")) fs::copy_file(e.path(), broken / e.path().filename());
    const fs::path victim = *fs::directory_iterator(broken);
    write(victim, "RIFF");
    const Result rc = score(a / "s3.txt", broken.string());
    CHECK(rc.code == 1);
    const std::string partial = slurp(a / "s3.txt");
    CHECK(std::count(partial.begin(), partial.end(), '\n') == 7);
    CHECK(rc.err.find(victim.stem().string()) != std::string::npos);

    // A checkpoint from a different architecture.
    auto wider = kSmall;
    wider[1] = "6";
    const Result mismatch = run(with({"score", "--config", cfg, "--model", (a / "averaged.ckpt").string(),
                                      "--protocol", proto, "--out", (a / "s4.txt").string()},
                                     wider));
    CHECK(mismatch.code == 2);
    CHECK(mismatch.err.find("fingerprint") != std::string::npos);
  }
}

TEST_CASE("cli train errors") {
  const fs::path data = corpus();
  const std::string cfg = (data / "synthetic.cfg").string();
  const fs::path o = scratch_dir("cli_train_err");
  Result r = run(with({"train", "--config", cfg, "--output_dir", o.string(), "--model.tau", "5"}, {}));
  CHECK(r.code == 2);
  CHECK(r.err.find("tau") != std::string::npos);
  r = run({"train", "--config", cfg, "--seed", "none", "--output_dir", o.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("seed") != std::string::npos);
  r = run({"train", "--config", cfg, "--data.train_protocol", (o / "nope.txt").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("data.train_protocol") != std::string::npos);
  CHECK(run({"train", "--no-such-flag"}).code == 2);
  CHECK(run({}).code == 2);

  // A learning rate this large overflows within a few steps.
  r = run(with({"train", "--config", cfg, "--output_dir", o.string(), "--epochs", "3", "--lr", "1e300"}, kSmall));
  CHECK(r.code == 3);
  CHECK(r.err.find("batch") != std::string::npos);
}

TEST_CASE("cli evaluate") {
  const fs::path d = scratch_dir("cli_eval");
  write(d / "proto.txt", "S A - - bonafide\nS B - - bonafide\nS C - A01 spoof\nS D - A01 spoof\n");
  write(d / "half.txt", "A 1\nB 3\nC 0\nD 2\n");
  write(d / "perfect.txt", "A 2\nB 3\nC 0\nD 1\n");
  write(d / "unknown.txt", "A 2\nZ 3\nY 0\n");
  const std::string proto = (d / "proto.txt").string();

  Result r = run({"evaluate", "--scores", (d / "half.txt").string(), "--protocol", proto});
  CHECK(r.code == 0);
  CHECK(r.out.find("EER 50.000%") != std::string::npos);
  CHECK(r.out.find("t-DCF") == std::string::npos);

  r = run({"evaluate", "--scores", (d / "perfect.txt").string(), "--protocol", proto, "--tdcf.costs", "1,1,2",
           "--report", (d / "report.tsv").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("EER 0.000%") != std::string::npos);
  CHECK(r.out.find("min t-DCF 0.500000") != std::string::npos);
  const std::string rep = slurp(d / "report.tsv");
  CHECK(rep.find("eer\t0\n") != std::string::npos);
  CHECK(rep.find("min_tdcf\t0.5\n") != std::string::npos);

  r = run({"evaluate", "--scores", (d / "unknown.txt").string(), "--protocol", proto});
  CHECK(r.code == 2);
  CHECK(r.err.find("Z") != std::string::npos);
  CHECK(r.err.find("Y") != std::string::npos);
}

TEST_CASE("cli analyze-durations") {
  const fs::path d = scratch_dir("cli_dur");
  std::string proto, scores;
  std::vector<LabeledScore> oracle;
  Rng rng(4);
  const double durations[] = {3.0, 3.0, 0.5, 4.0, 9.5, 6.2, 1.9, 7.99};
  for (int i = 0; i < 8; ++i) {
    const std::string id = "D" + std::to_string(i);
    const Label lab = i % 2 ? Label::bonafide : Label::spoof;
    const auto len = static_cast<std::size_t>(durations[i] * 16000);
    write_wav((d / (id + ".wav")).string(), Waveform{Tensor::full({len}, 0.1), kSampleRate});
    proto += "S " + id + " - - " + label_name(lab) + "\n";
    const double s = rng.normal() + (i % 2);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", s);
    scores += id + " " + buf + "\n";
    oracle.push_back({std::stod(buf), lab, static_cast<double>(len) / 16000.0});
  }
  write(d / "proto.txt", proto);
  write(d / "scores.txt", scores);
  const Result r = run({"analyze-durations", "--scores", (d / "scores.txt").string(), "--protocol",
                        (d / "proto.txt").string(), "--audio-root", d.string(), "--tsv", (d / "b.tsv").string()});
  REQUIRE(r.code == 0);
  std::ostringstream want;
  write_bucket_tsv(want, duration_bucketed_eer(oracle));
  CHECK(slurp(d / "b.tsv") == want.str());
  std::size_t total = 0;
  for (const auto& b : duration_bucketed_eer(oracle)) total += b.n;
  CHECK(total == 8);

  // Every utterance 3 s long: one populated bucket.
  write(d / "three.txt", "S D0 - - spoof\nS D1 - - bonafide\n");
  write(d / "three_scores.txt", "D0 0\nD1 1\n");
  const Result t = run({"analyze-durations", "--scores", (d / "three_scores.txt").string(), "--protocol",
                        (d / "three.txt").string(), "--audio-root", d.string(), "--tsv", (d / "t.tsv").string()});
  REQUIRE(t.code == 0);
  CHECK(slurp(d / "t.tsv") == "0-2s\t0\tundefined\n2-4s\t2\t0\n4-6s\t0\tundefined\n6-8s\t0\tundefined\n8s+\t0\tundefined\n");
}

TEST_CASE("cli complexity") {
  const fs::path d = scratch_dir("cli_cx");
  auto totals = [&](std::vector<std::string> extra) {
    const std::string tsv = (d / "c.tsv").string();
    auto args = with({"complexity", "--input-len", "64000", "--tsv", tsv}, extra);
    const Result r = run(args);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("total") != std::string::npos);
    return tsv_totals(slurp(tsv));
  };
  const auto t16 = totals({"--model.tau", "16"});
  CHECK(t16.at("total") >= 1e4);
  CHECK(t16.at("total") < 1e5);
  const auto t32 = totals({"--model.tau", "32"});
  CHECK(t32.at("total") > t16.at("total"));

  const auto nof = totals({"--model.tau", "16", "--no-freq-branch"});
  double freq = 0.0;
  for (const auto& [name, p] : t16)
    if (name.find(".freq.") != std::string::npos) freq += p;
  CHECK(freq > 0.0);
  CHECK(t16.at("total") - nof.at("total") == freq);
  const auto noshuffle = totals({"--model.tau", "16", "--no-shuffle"});
  CHECK(noshuffle.at("total") == t16.at("total"));

  CHECK(run({"complexity", "--model.tau", "7"}).code == 2);
}

TEST_CASE("cli binary exit codes") {
  const std::string exe = RAWTFNET_CLI_PATH;
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  CHECK(status(exe + " --help") == 0);
  CHECK(status(exe + " complexity --model.tau 16") == 0);
  CHECK(status(exe + " complexity --model.tau 15") == 2);
  CHECK(status(exe + " frobnicate") == 2);
}
