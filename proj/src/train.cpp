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


#include "rawtfnet/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "rawtfnet/errors.hpp"

namespace rawtfnet {

LossResult weighted_cross_entropy(const Tensor& logits, const std::vector<Label>& labels,
                                  const ClassWeights& weights) {
  if (logits.rank() != 2 || logits.dim(1) != 2)
    throw DimensionError("weighted_cross_entropy expects [B, 2] logits, got " +
                         shape_str(logits.shape()));
  const std::size_t b = logits.dim(0);
  if (labels.size() != b) throw DimensionError("weighted_cross_entropy: label count mismatch");
  if (b == 0) throw DataError("weighted_cross_entropy: empty batch");
  if (!(weights.spoof > 0.0) || !(weights.bonafide > 0.0))
    throw ConfigError("class weights must be positive");
  if (!logits.all_finite()) throw NumericError("weighted_cross_entropy: non-finite logits");

  auto w_of = [&](Label y) { return y == Label::bonafide ? weights.bonafide : weights.spoof; };
  double total_w = 0.0;
  for (Label y : labels) total_w += w_of(y);

  LossResult out{0.0, Tensor(logits.shape())};
  for (std::size_t i = 0; i < b; ++i) {
    const double z0 = logits[2 * i], z1 = logits[2 * i + 1];
    const double zmax = std::max(z0, z1);
    const double lse = zmax + std::log(std::exp(z0 - zmax) + std::exp(z1 - zmax));
    const std::size_t y = labels[i] == Label::bonafide ? 1 : 0;
    const double w = w_of(labels[i]) / total_w;
    out.loss += w * (lse - logits[2 * i + y]);
    const double p1 = std::exp(z1 - lse);
    const double p0 = std::exp(z0 - lse);
    out.grad[2 * i] = w * (p0 - (y == 0 ? 1.0 : 0.0));
    out.grad[2 * i + 1] = w * (p1 - (y == 1 ? 1.0 : 0.0));
  }
  return out;
}

OptimState make_optim_state(const ParamList& params, const AdamConfig& hp) {
  OptimState st;
  st.hp = hp;
  for (const Param* p : params) {
    if (!p->trainable) continue;
    st.m.emplace_back(p->value.shape());
    st.v.emplace_back(p->value.shape());
  }
  return st;
}

void adam_step(const ParamList& params, OptimState& state) {
  std::size_t j = 0;
  for (const Param* p : params) {
    if (!p->trainable) continue;
    if (j >= state.m.size() || state.m[j].shape() != p->value.shape() ||
        p->grad.shape() != p->value.shape())
      throw DimensionError("adam_step: optimizer state does not match parameter " + p->name);
    if (!p->grad.all_finite()) throw NumericError("adam_step: non-finite gradient in " + p->name);
    ++j;
  }
  if (j != state.m.size()) throw DimensionError("adam_step: parameter count changed");

  const AdamConfig& hp = state.hp;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(hp.beta1, t);
  const double c2 = 1.0 - std::pow(hp.beta2, t);
  j = 0;
  for (Param* p : params) {
    if (!p->trainable) continue;
    auto theta = p->value.data();
    const auto g = p->grad.data();
    auto m = state.m[j].data();
    auto v = state.v[j].data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i] + hp.weight_decay * theta[i];
      m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * gi;
      v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * gi * gi;
      theta[i] -= hp.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + hp.eps);
    }
    if (!p->value.all_finite()) throw NumericError("adam_step: non-finite value in " + p->name);
    ++j;
  }
}

// ---------------------------------------------------------------------------

Dataset load_dataset(const std::vector<ProtocolEntry>& entries, bool skip_unreadable,
                     std::ostream* log, std::size_t* skipped) {
  Dataset d;
  std::size_t n_skipped = 0;
  for (const auto& e : entries) {
    try {
      d.waves.push_back(read_wav(e.path));
      d.entries.push_back(e);
    } catch (const std::exception& ex) {
      if (!skip_unreadable) throw;
      ++n_skipped;
      if (log) *log << "warning: skipping " << e.utt_id << ": " << ex.what() << '\n';
    }
  }
  if (skipped) *skipped = n_skipped;
  return d;
}

namespace {

// Stacks equal-length waveforms into [N, L].
Tensor stack_waves(const std::vector<Waveform>& waves) {
  const std::size_t len = waves.front().length();
  std::vector<double> data;
  data.reserve(waves.size() * len);
  for (const auto& w : waves) {
    const auto s = w.samples.data();
    data.insert(data.end(), s.begin(), s.end());
  }
  return Tensor({waves.size(), len}, std::move(data));
}

}  // namespace

EpochStats train_epoch(Model& model, OptimState& optim, const Dataset& data,
                       const TrainOptions& opts, std::size_t epoch) {
  const std::size_t seg = model.config().segment_len;
  const auto order = batch_order(data.waves.size(), opts.batch_size, opts.seed, epoch);
  const std::uint64_t epoch_seed = Rng::derive(opts.seed, 0x45504f4348ULL + epoch).next_u64();
  const ParamList params = model.parameters();

  EpochStats st;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t b = 0; b < order.size(); ++b) {
    try {
      std::vector<Waveform> segs;
      std::vector<Label> labels;
      for (std::size_t idx : order[b]) {
        Rng rng = Rng::derive(epoch_seed, idx);
        Waveform w = data.waves[idx];
        if (opts.augment) w = rawboost_series(w, opts.augment_cfg, rng);
        segs.push_back(fix_length(w, seg, Mode::train, rng));
        labels.push_back(data.entries[idx].label);
      }
      model.zero_grad();
      const Tensor logits = model.forward(stack_waves(segs), Mode::train);
      const LossResult loss = weighted_cross_entropy(logits, labels, opts.class_weights);
      if (!std::isfinite(loss.loss)) throw NumericError("non-finite loss");
      model.backward(loss.grad);
      adam_step(params, optim);
      loss_sum += loss.loss * static_cast<double>(labels.size());
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred_bona = logits[2 * i + 1] > logits[2 * i];
        correct += pred_bona == (labels[i] == Label::bonafide) ? 1 : 0;
      }
      st.n += labels.size();
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) + ": " +
                         e.what());
    }
  }
  st.mean_loss = loss_sum / static_cast<double>(st.n);
  st.accuracy = static_cast<double>(correct) / static_cast<double>(st.n);
  return st;
}

std::vector<Tensor> eval_logits(Model& model, const std::vector<Waveform>& waves,
                                std::size_t batch) {
  if (batch == 0) throw ConfigError("eval batch must be >= 1");
  const std::size_t seg = model.config().segment_len;
  Rng unused(0);
  std::vector<Tensor> out;
  for (std::size_t b0 = 0; b0 < waves.size(); b0 += batch) {
    std::vector<Waveform> segs;
    for (std::size_t i = b0; i < std::min(waves.size(), b0 + batch); ++i)
      segs.push_back(fix_length(waves[i], seg, Mode::eval, unused));
    const Tensor logits = model.forward(stack_waves(segs), Mode::eval);
    for (std::size_t i = 0; i < segs.size(); ++i)
      out.push_back(Tensor({2}, {logits[2 * i], logits[2 * i + 1]}));
  }
  return out;
}

ValidationResult validate(Model& model, const Dataset& data, const ClassWeights& weights) {
  if (data.waves.empty()) throw DataError("validate: empty dataset");
  const auto logits = eval_logits(model, data.waves);
  std::vector<double> flat;
  std::vector<Label> labels;
  ScoreSet s;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    flat.push_back(logits[i][0]);
    flat.push_back(logits[i][1]);
    labels.push_back(data.entries[i].label);
    (labels.back() == Label::bonafide ? s.bonafide : s.spoof).push_back(detection_score(logits[i]));
  }
  ValidationResult r;
  r.loss = weighted_cross_entropy(Tensor({logits.size(), 2}, std::move(flat)), labels, weights).loss;
  if (!s.bonafide.empty() && !s.spoof.empty()) r.eer = compute_eer(s).eer;
  return r;
}

// ---------------------------------------------------------------------------

Checkpoint snapshot(Model& model, std::size_t epoch, double metric, double tie_break) {
  Checkpoint c;
  c.tie_break = tie_break;
  c.fingerprint = model.config().fingerprint();
  c.epoch = epoch;
  c.metric = metric;
  for (const Param* p : model.parameters()) c.tensors.emplace_back(p->name, p->value);
  return c;
}

void restore(Model& model, const Checkpoint& ckpt) {
  if (ckpt.fingerprint != model.config().fingerprint())
    throw ConfigError("checkpoint fingerprint mismatch: checkpoint has '" + ckpt.fingerprint +
                      "', model has '" + model.config().fingerprint() + "'");
  const ParamList params = model.parameters();
  if (params.size() != ckpt.tensors.size())
    throw ConfigError("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                      " tensors, model has " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, value] = ckpt.tensors[i];
    if (name != params[i]->name || value.shape() != params[i]->value.shape())
      throw ConfigError("checkpoint tensor " + name + " " + shape_str(value.shape()) +
                        " does not match " + params[i]->name + " " +
                        shape_str(params[i]->value.shape()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = ckpt.tensors[i].second;
}

namespace {

constexpr char kMagic[8] = {'R', 'T', 'F', 'N', 'C', 'K', 'P', '1'};
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little endian");

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  if (!std::isfinite(ckpt.metric)) throw NumericError("checkpoint metric is not finite");
  nlohmann::json header;
  header["fingerprint"] = ckpt.fingerprint;
  header["epoch"] = ckpt.epoch;
  header["metric"] = ckpt.metric;
  header["tie_break"] = ckpt.tie_break;
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, value] : ckpt.tensors)
    header["tensors"].push_back({{"name", name}, {"shape", value.shape()}});
  const std::string text = header.dump();
  const std::uint64_t len = text.size();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path);
  os.write(kMagic, sizeof kMagic);
  os.write(reinterpret_cast<const char*>(&len), sizeof len);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, value] : ckpt.tensors) {
    const auto d = value.data();
    os.write(reinterpret_cast<const char*>(d.data()),
             static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  if (!os) throw DataError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  char magic[8];
  std::uint64_t len = 0;
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw FormatError(path + ": not a checkpoint file");
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len) || len > (1u << 30))
    throw ParseError(path + ": truncated checkpoint header");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len)))
    throw ParseError(path + ": truncated checkpoint header");

  Checkpoint c;
  try {
    const auto header = nlohmann::json::parse(text);
    c.fingerprint = header.at("fingerprint").get<std::string>();
    c.epoch = header.at("epoch").get<std::size_t>();
    c.metric = header.at("metric").get<double>();
    c.tie_break = header.value("tie_break", 0.0);
    for (const auto& t : header.at("tensors")) {
      Shape shape = t.at("shape").get<Shape>();
      std::vector<double> data(shape_size(shape));
      if (!in.read(reinterpret_cast<char*>(data.data()),
                   static_cast<std::streamsize>(data.size() * sizeof(double))))
        throw ParseError(path + ": truncated tensor data");
      c.tensors.emplace_back(t.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad checkpoint header: " + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError(path + ": trailing bytes");
  return c;
}

std::vector<std::size_t> select_top_k(const std::vector<Checkpoint>& ckpts, std::size_t k) {
  if (ckpts.empty()) throw StateError("average_checkpoints: no checkpoints");
  if (k == 0) throw ConfigError("average_checkpoints: k must be >= 1");
  std::vector<std::size_t> idx(ckpts.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (ckpts[a].metric != ckpts[b].metric) return ckpts[a].metric < ckpts[b].metric;
    if (ckpts[a].tie_break != ckpts[b].tie_break) return ckpts[a].tie_break < ckpts[b].tie_break;
    return ckpts[a].epoch < ckpts[b].epoch;
  });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

Checkpoint average_checkpoints(const std::vector<Checkpoint>& ckpts, std::size_t k) {
  const std::vector<std::size_t> idx = select_top_k(ckpts, k);

  const Checkpoint& first = ckpts[idx[0]];
  Checkpoint out = first;
  double metric_mean = first.metric, tie_mean = first.tie_break;
  for (std::size_t s = 1; s < idx.size(); ++s) {
    const Checkpoint& c = ckpts[idx[s]];
    if (c.fingerprint != first.fingerprint || c.tensors.size() != first.tensors.size())
      throw ConfigError("average_checkpoints: checkpoints come from different models");
    // Running mean: exact for identical inputs.
    const double inv = 1.0 / static_cast<double>(s + 1);
    metric_mean += (c.metric - metric_mean) * inv;
    tie_mean += (c.tie_break - tie_mean) * inv;
    for (std::size_t t = 0; t < c.tensors.size(); ++t) {
      if (c.tensors[t].first != out.tensors[t].first ||
          c.tensors[t].second.shape() != out.tensors[t].second.shape())
        throw ConfigError("average_checkpoints: tensor layout differs at " + c.tensors[t].first);
      auto acc = out.tensors[t].second.data();
      const auto x = c.tensors[t].second.data();
      for (std::size_t i = 0; i < acc.size(); ++i)
        acc[i] += (x[i] - acc[i]) / static_cast<double>(s + 1);
    }
  }
  out.epoch = first.epoch;
  out.metric = metric_mean;
  out.tie_break = tie_mean;
  return out;
}

// ---------------------------------------------------------------------------

ScoreRun score_eval_set(Model& model, const std::vector<ProtocolEntry>& entries,
                        std::ostream* log, std::size_t batch) {
  ScoreRun run;
  const Dataset d = load_dataset(entries, true, log, &run.skipped);
  const auto logits = eval_logits(model, d.waves, batch);
  for (std::size_t i = 0; i < logits.size(); ++i)
    run.records.push_back({d.entries[i].utt_id, detection_score(logits[i]), d.waves[i].duration_s()});
  return run;
}

}  // namespace rawtfnet
