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


#include "rawtfnet/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <omp.h>

#include <CLI11.hpp>

#include "rawtfnet/errors.hpp"

namespace rawtfnet::cli {

namespace fs = std::filesystem;

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

namespace {

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string percent(double fraction) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f%%", 100.0 * fraction);
  return buf;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void require_file(const std::string& key, const std::string& path) {
  if (path.empty()) throw ConfigError(key + ": required");
  if (!fs::is_regular_file(path)) throw ConfigError(key + ": file not found: " + path);
}

void apply_threads(std::size_t threads) {
  if (threads > 0) omp_set_num_threads(static_cast<int>(threads));
}

// Maps library exceptions onto the exit-code contract.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

std::unordered_map<std::string, Label> label_map(const std::vector<ProtocolEntry>& entries) {
  std::unordered_map<std::string, Label> m;
  for (const auto& e : entries) m.emplace(e.utt_id, e.label);
  return m;
}

// Joins scores with protocol labels; returns false after listing unknown ids.
bool join_labels(const std::vector<ScoreRecord>& scores,
                 const std::unordered_map<std::string, Label>& labels,
                 std::vector<LabeledScore>& out, std::ostream& err) {
  std::vector<std::string> unknown;
  for (const auto& r : scores) {
    const auto it = labels.find(r.utt_id);
    if (it == labels.end()) {
      unknown.push_back(r.utt_id);
      continue;
    }
    out.push_back({r.score, it->second, r.duration_s});
  }
  if (unknown.empty()) return true;
  err << "error: " << unknown.size() << " scored utt_id(s) not in protocol:";
  for (const auto& u : unknown) err << ' ' << u;
  err << '\n';
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    cfg.validate();
    if (!cfg.seed) throw ConfigError("seed: required for training (set seed = <n>)");
    if (cfg.epochs < 1) throw ConfigError("train.epochs: must be >= 1");
    require_file("data.train_protocol", cfg.data.train_protocol);
    if (!cfg.data.dev_protocol.empty()) require_file("data.dev_protocol", cfg.data.dev_protocol);
    if (!cfg.data.eval_protocol.empty()) require_file("data.eval_protocol", cfg.data.eval_protocol);
    apply_threads(cfg.threads);
    const std::uint64_t seed = *cfg.seed;

    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir / "checkpoints");
    {
      std::ofstream cf(dir / "config.txt");
      write_config(cf, cfg);
    }
    std::ofstream log(dir / "train.log");
    if (!log) throw DataError("cannot write " + (dir / "train.log").string());
    log << "# rawtfnet train started " << utc_now() << '\n';
    log << "# fingerprint " << cfg.model.fingerprint() << '\n';

    std::size_t skipped = 0, n_skip = 0;
    const Dataset train = load_dataset(
        parse_protocol_file(cfg.data.train_protocol, cfg.data.train_root, cfg.data.path_template),
        true, &err, &n_skip);
    skipped += n_skip;
    if (train.waves.empty()) throw DataError("no readable training audio");
    std::optional<Dataset> dev;
    if (!cfg.data.dev_protocol.empty()) {
      dev = load_dataset(
          parse_protocol_file(cfg.data.dev_protocol, cfg.data.dev_root, cfg.data.path_template),
          true, &err, &n_skip);
      skipped += n_skip;
      if (dev->waves.empty()) dev.reset();
    }

    Rng init_rng = Rng::derive(seed, 1);
    Model model(cfg.model, init_rng);
    OptimState optim = make_optim_state(model.parameters(), cfg.optim);
    TrainOptions opts;
    opts.batch_size = cfg.batch_size;
    opts.class_weights = cfg.class_weights;
    opts.augment = cfg.use_augment;
    opts.augment_cfg = cfg.augment;
    opts.seed = seed;

    const std::string head = "epoch\ttrain_loss\ttrain_acc\tval_loss\tval_eer";
    log << head << '\n';
    out << head << '\n';
    std::vector<Checkpoint> ckpts;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
      const EpochStats st = train_epoch(model, optim, train, opts, e);
      double metric = st.mean_loss, tie_break = 0.0;
      std::string val_loss = "-", val_eer = "undefined";
      if (dev) {
        const ValidationResult v = validate(model, *dev, cfg.class_weights);
        metric = v.metric();
        if (v.eer) tie_break = v.loss;
        val_loss = fmt9(v.loss);
        if (v.eer) val_eer = fmt9(*v.eer);
      }
      const std::string line = std::to_string(e + 1) + '\t' + fmt9(st.mean_loss) + '\t' +
                               fmt9(st.accuracy) + '\t' + val_loss + '\t' + val_eer;
      log << line << std::endl;
      out << line << std::endl;
      ckpts.push_back(snapshot(model, e + 1, metric, tie_break));
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03zu.ckpt", e + 1);
      save_checkpoint((dir / "checkpoints" / name).string(), ckpts.back());
    }

    const auto top = select_top_k(ckpts, cfg.top_k);
    std::string chosen;
    for (std::size_t i : top) chosen += (chosen.empty() ? "" : ",") + std::to_string(ckpts[i].epoch);
    const Checkpoint avg = average_checkpoints(ckpts, cfg.top_k);
    save_checkpoint((dir / "averaged.ckpt").string(), avg);
    log << "averaged\t" << chosen << '\n';
    out << "averaged epochs " << chosen << " -> " << (dir / "averaged.ckpt").string() << '\n';

    if (!cfg.data.eval_protocol.empty()) {
      restore(model, avg);
      const ScoreRun run = score_eval_set(
          model,
          parse_protocol_file(cfg.data.eval_protocol, cfg.data.eval_root, cfg.data.path_template),
          &err, cfg.eval_batch);
      skipped += run.skipped;
      std::ofstream sf(dir / "scores.txt");
      write_scores(sf, run.records);
      if (!sf) throw DataError("cannot write scores.txt");
      const auto labels = label_map(
          parse_protocol_file(cfg.data.eval_protocol, cfg.data.eval_root, cfg.data.path_template));
      std::vector<LabeledScore> joined;
      join_labels(run.records, labels, joined, err);
      const ScoreSet s = to_score_set(joined);
      std::string eer = "undefined";
      if (!s.bonafide.empty() && !s.spoof.empty()) eer = fmt9(compute_eer(s).eer);
      log << "eval_eer\t" << eer << '\n';
      out << "eval EER " << eer << " (" << run.records.size() << " scored)\n";
    }
    if (skipped > 0) {
      err << "skipped " << skipped << " unreadable file(s)\n";
      return kPartial;
    }
    return kOk;
  });
}

int cmd_score(const RunConfig& cfg, const std::string& model_path, const std::string& protocol,
              const std::string& audio_root, const std::string& out_file, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&]() -> int {
    cfg.model.validate();
    require_file("--model", model_path);
    require_file("--protocol", protocol);
    if (out_file.empty()) throw ConfigError("--out: required");
    apply_threads(cfg.threads);
    Rng rng(0);
    Model model(cfg.model, rng);
    restore(model, load_checkpoint(model_path));
    const ScoreRun run = score_eval_set(
        model, parse_protocol_file(protocol, audio_root, cfg.data.path_template), &err,
        cfg.eval_batch);
    std::ofstream sf(out_file);
    write_scores(sf, run.records);
    if (!sf) throw DataError("cannot write " + out_file);
    out << "scored " << run.records.size() << " skipped " << run.skipped << '\n';
    return run.skipped > 0 ? kPartial : kOk;
  });
}

int cmd_evaluate(const std::string& score_file, const std::string& protocol,
                 const std::optional<TdcfCosts>& costs, const std::string& report_path,
                 std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    require_file("--scores", score_file);
    require_file("--protocol", protocol);
    if (costs) costs->validate();
    std::vector<LabeledScore> joined;
    if (!join_labels(read_score_file(score_file), label_map(parse_protocol_file(protocol)), joined,
                     err))
      return kUsage;
    const ScoreSet s = to_score_set(joined);
    const EerResult eer = compute_eer(s);
    out << "bonafide " << s.bonafide.size() << " spoof " << s.spoof.size() << '\n';
    out << "EER " << percent(eer.eer) << " (threshold " << fmt9(eer.threshold) << ")\n";
    std::optional<TdcfResult> tdcf;
    if (costs) {
      tdcf = compute_min_tdcf(s, *costs);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", tdcf->min_tdcf);
      out << "min t-DCF " << buf << " (threshold " << fmt9(tdcf->threshold) << ")\n";
    }
    if (!report_path.empty()) {
      std::ofstream rp(report_path);
      rp << "n_bonafide\t" << s.bonafide.size() << "\nn_spoof\t" << s.spoof.size() << "\neer\t"
         << fmt9(eer.eer) << "\neer_threshold\t" << fmt9(eer.threshold) << '\n';
      if (tdcf) rp << "min_tdcf\t" << fmt9(tdcf->min_tdcf) << '\n';
      if (!rp) throw DataError("cannot write " + report_path);
    }
    return kOk;
  });
}

int cmd_analyze_durations(const std::string& score_file, const std::string& protocol,
                          const std::string& audio_root, const std::string& path_template,
                          const std::string& tsv_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    require_file("--scores", score_file);
    require_file("--protocol", protocol);
    const auto entries = parse_protocol_file(protocol, audio_root, path_template);
    std::unordered_map<std::string, const ProtocolEntry*> by_id;
    for (const auto& e : entries) by_id.emplace(e.utt_id, &e);
    std::vector<ScoreRecord> scores = read_score_file(score_file);
    std::vector<LabeledScore> joined;
    if (!join_labels(scores, label_map(entries), joined, err)) return kUsage;
    for (std::size_t i = 0; i < scores.size(); ++i)
      joined[i].duration_s = read_wav(by_id.at(scores[i].utt_id)->path).duration_s();
    const auto buckets = duration_bucketed_eer(joined);
    out << std::left << std::setw(10) << "range" << std::right << std::setw(8) << "n"
        << std::setw(12) << "EER" << '\n';
    for (const auto& b : buckets)
      out << std::left << std::setw(10) << b.range_label() << std::right << std::setw(8) << b.n
          << std::setw(12) << (b.eer ? percent(*b.eer) : std::string("undefined")) << '\n';
    if (!tsv_path.empty()) {
      std::ofstream ts(tsv_path);
      write_bucket_tsv(ts, buckets);
      if (!ts) throw DataError("cannot write " + tsv_path);
    }
    return kOk;
  });
}

int cmd_complexity(const RunConfig& cfg, std::size_t input_len, const std::string& tsv_path,
                   std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    cfg.model.validate();
    Rng rng(0);
    const Model model(cfg.model, rng);
    const ComplexityReport rep = model.complexity(input_len);
    rep.write_table(out);
    if (!tsv_path.empty()) {
      std::ofstream ts(tsv_path);
      rep.write_tsv(ts);
      if (!ts) throw DataError("cannot write " + tsv_path);
    }
    return kOk;
  });
}

int cmd_gen_synthetic(const std::string& dir, const SyntheticConfig& syn, std::ostream& out,
                      std::ostream& err) {
  return guarded(err, [&]() -> int {
    if (dir.empty()) throw ConfigError("--out-dir: required");
    const std::size_t n = generate_synthetic(dir, syn);
    const fs::path root = fs::absolute(dir);
    RunConfig cfg = tiny_run_config();
    cfg.seed = syn.seed;
    for (const char* split : {"train", "dev", "eval"}) {
      const std::string proto = (root / (std::string(split) + ".txt")).string();
      const std::string audio = (root / split).string();
      config_set(cfg, std::string("data.") + split + "_protocol", proto);
      config_set(cfg, std::string("data.") + split + "_root", audio);
    }
    cfg.output_dir = (root / "run").string();
    std::ofstream cf(root / "synthetic.cfg");
    write_config(cf, cfg);
    if (!cf) throw DataError("cannot write synthetic.cfg");
    out << "wrote " << n << " utterances and " << (root / "synthetic.cfg").string() << '\n';
    return kOk;
  });
}

// ---------------------------------------------------------------------------

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  tune_allocator();
  CLI::App app{"RawTFNet spoofing countermeasure toolkit", "rawtfnet"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "Config file (flat dotted keys)");
  std::map<std::string, std::string> key_values;
  std::map<std::string, CLI::Option*> key_opts;
  for (const auto& key : config_keys())
    key_opts[key] = app.add_option("--" + key, key_values[key])->group("Config keys");

  std::size_t epochs = 0;
  double lr = 0.0;
  bool no_freq = false, no_time = false, no_shuffle = false;
  auto* o_epochs = app.add_option("--epochs", epochs, "Alias for --train.epochs");
  auto* o_lr = app.add_option("--lr", lr, "Alias for --optim.lr");
  app.add_flag("--no-freq-branch", no_freq, "Ablation: drop the frequency branch");
  app.add_flag("--no-time-branch", no_time, "Ablation: drop the time branch");
  app.add_flag("--no-shuffle", no_shuffle, "Ablation: drop the channel shuffle");

  auto* train = app.add_subcommand("train", "Train, validate, checkpoint and average");

  auto* score = app.add_subcommand("score", "Score a protocol with a checkpoint");
  std::string model_path, protocol, audio_root, out_file;
  score->add_option("--model", model_path, "Checkpoint file")->required();
  score->add_option("--protocol", protocol, "Protocol file")->required();
  score->add_option("--audio-root", audio_root, "Directory holding <utt_id>.wav");
  score->add_option("--out", out_file, "Score file to write")->required();

  auto* evaluate = app.add_subcommand("evaluate", "EER and min t-DCF of a score file");
  std::string scores_path, report_path;
  evaluate->add_option("--scores", scores_path, "Score file")->required();
  evaluate->add_option("--protocol", protocol, "Protocol file")->required();
  evaluate->add_option("--report", report_path, "Machine-readable report (TSV)");

  auto* durations = app.add_subcommand("analyze-durations", "EER per utterance-duration bucket");
  std::string tsv_path;
  durations->add_option("--scores", scores_path, "Score file")->required();
  durations->add_option("--protocol", protocol, "Protocol file")->required();
  durations->add_option("--audio-root", audio_root, "Directory holding <utt_id>.wav");
  durations->add_option("--tsv", tsv_path, "bucket<TAB>n<TAB>eer output");

  auto* complexity = app.add_subcommand("complexity", "Parameter and MAC counts per layer");
  std::size_t input_len = 0;
  auto* o_len = complexity->add_option("--input-len", input_len, "Input samples (default segment_len)");
  complexity->add_option("--tsv", tsv_path, "layer<TAB>params<TAB>macs output");

  auto* gen = app.add_subcommand("gen-synthetic", "Write the synthetic two-class corpus");
  std::string out_dir;
  SyntheticConfig syn;
  gen->add_option("--out-dir", out_dir, "Output directory")->required();
  gen->add_option("--n-train", syn.n_train, "Training utterances");
  gen->add_option("--n-dev", syn.n_dev, "Development utterances");
  gen->add_option("--n-eval", syn.n_eval, "Evaluation utterances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kUsage;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto& [key, opt] : key_opts)
      if (opt->count() > 0) config_set(cfg, key, key_values[key]);
    if (o_epochs->count() > 0) cfg.epochs = epochs;
    if (o_lr->count() > 0) cfg.optim.lr = lr;
    if (no_freq) cfg.model.freq_branch = false;
    if (no_time) cfg.model.time_branch = false;
    if (no_shuffle) cfg.model.shuffle = false;
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  }

  if (train->parsed()) return cmd_train(cfg, out, err);
  if (score->parsed())
    return cmd_score(cfg, model_path, protocol, audio_root.empty() ? cfg.data.eval_root : audio_root,
                     out_file, out, err);
  if (evaluate->parsed()) return cmd_evaluate(scores_path, protocol, cfg.tdcf, report_path, out, err);
  if (durations->parsed())
    return cmd_analyze_durations(scores_path, protocol,
                                 audio_root.empty() ? cfg.data.eval_root : audio_root,
                                 cfg.data.path_template, tsv_path, out, err);
  if (complexity->parsed())
    return cmd_complexity(cfg, o_len->count() > 0 ? input_len : cfg.model.segment_len, tsv_path,
                          out, err);
  if (gen->parsed()) {
    if (cfg.seed) syn.seed = *cfg.seed;
    return cmd_gen_synthetic(out_dir, syn, out, err);
  }
  return kUsage;
}

}  // namespace rawtfnet::cli
