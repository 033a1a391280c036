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


#include "rawtfnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "rawtfnet/errors.hpp"
#include "rawtfnet/geometry_util.hpp"

namespace rawtfnet {

namespace {

std::string window_str(const PoolWindow& w) {
  return std::to_string(w.h) + "x" + std::to_string(w.w);
}

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw ConfigError("model." + field + ": " + why);
}

}  // namespace

void ModelConfig::validate() const {
  require(tau >= 1, "tau", "must be >= 1");
  require(width_mult >= 1, "width_mult", "must be >= 1");
  require(n_tf_blocks >= 1, "n_tf_blocks", "must be >= 1");
  require(sinc_filters >= 1, "sinc_filters", "must be >= 1");
  require(sinc_kernel % 2 == 1, "sinc_kernel", "must be odd");
  require(sinc_pool.h >= 1 && sinc_pool.w >= 1, "sinc_pool", "windows must be positive");
  require(resnet_filters >= 1, "resnet_filters", "must be >= 1");
  require(res2_filters >= 1, "res2_filters", "must be >= 1");
  require(res2_scale >= 1 && res2_filters % res2_scale == 0, "res2_scale",
          "must divide res2_filters");
  require(res2_dilation >= 1, "res2_dilation", "must be >= 1");
  require(se_reduction >= 1, "se_reduction", "must be >= 1");
  require(frontend_pool.size() == 1 + n_res2_blocks, "frontend_pool",
          "needs one window per frontend block (" + std::to_string(1 + n_res2_blocks) + ")");
  for (const auto& w : frontend_pool)
    require(w.h >= 1 && w.w >= 1, "frontend_pool", "windows must be positive");
  for (auto p : pool_positions)
    require(p >= 1 && p <= n_tf_blocks, "pool_positions",
            "index " + std::to_string(p) + " outside 1.." + std::to_string(n_tf_blocks));
  require(freq_branch || time_branch, "freq_branch", "at least one TF branch must be enabled");
  require(tf_width() % 2 == 0, "tau", "TF width must be even");
  if (shuffle)
    require(shuffle_groups >= 1 && tf_width() % shuffle_groups == 0, "shuffle_groups",
            "must divide the TF width");
  require(sample_rate > 0, "sample_rate", "must be positive");
  require(segment_len >= sinc_kernel, "segment_len", "must be >= sinc_kernel");
}

std::string ModelConfig::fingerprint() const {
  std::ostringstream os;
  os << "tau=" << tau << ";width_mult=" << width_mult << ";n_tf_blocks=" << n_tf_blocks
     << ";sinc_filters=" << sinc_filters << ";sinc_kernel=" << sinc_kernel
     << ";sinc_pool=" << window_str(sinc_pool) << ";resnet_filters=" << resnet_filters
     << ";res2_filters=" << res2_filters << ";n_res2_blocks=" << n_res2_blocks
     << ";res2_scale=" << res2_scale << ";res2_dilation=" << res2_dilation
     << ";se_reduction=" << se_reduction << ";frontend_pool=";
  for (std::size_t i = 0; i < frontend_pool.size(); ++i)
    os << (i ? "," : "") << window_str(frontend_pool[i]);
  os << ";pool_positions=";
  for (std::size_t i = 0; i < pool_positions.size(); ++i)
    os << (i ? "," : "") << pool_positions[i];
  os << ";freq_branch=" << freq_branch << ";time_branch=" << time_branch
     << ";shuffle=" << shuffle << ";shuffle_groups=" << shuffle_groups
     << ";sample_rate=" << sample_rate << ";segment_len=" << segment_len;
  return os.str();
}

void ComplexityReport::write_table(std::ostream& os) const {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  os << std::left << std::setw(static_cast<int>(width)) << "layer" << std::right
     << std::setw(12) << "params" << std::setw(16) << "macs" << '\n';
  for (const auto& r : rows)
    os << std::left << std::setw(static_cast<int>(width)) << r.name << std::right
       << std::setw(12) << r.params << std::setw(16) << r.macs << '\n';
  os << std::left << std::setw(static_cast<int>(width)) << "total" << std::right
     << std::setw(12) << total_params << std::setw(16) << total_macs << '\n';
  os << "input_length " << input_length << " samples: " << std::fixed << std::setprecision(3)
     << static_cast<double>(total_params) / 1e6 << "M params, "
     << static_cast<double>(total_macs) / 1e9 << "G MACs\n";
  os.unsetf(std::ios::fixed);
}

void ComplexityReport::write_tsv(std::ostream& os) const {
  for (const auto& r : rows) os << r.name << '\t' << r.params << '\t' << r.macs << '\n';
  os << "total\t" << total_params << '\t' << total_macs << '\n';
}

// ---------------------------------------------------------------------------

Model::Model(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  sinc = SincConv("sinc", sinc_bank_init(cfg.sinc_filters, cfg.sinc_kernel,
                                         static_cast<double>(cfg.sample_rate), rng));
  if (cfg.sinc_pool.active())
    sinc_pool_ = MaxPool2d("sinc.pool", {cfg.sinc_pool.h, cfg.sinc_pool.w, cfg.sinc_pool.h,
                                         cfg.sinc_pool.w});
  resnet = DwsResBlock("resnet", 1, cfg.resnet_filters, cfg.frontend_pool[0], rng);
  std::size_t channels = cfg.resnet_filters;
  for (std::size_t b = 0; b < cfg.n_res2_blocks; ++b) {
    Res2Config rc;
    rc.filters = cfg.res2_filters;
    rc.scale = cfg.res2_scale;
    rc.dilation = cfg.res2_dilation;
    rc.se_reduction = cfg.se_reduction;
    rc.pool = cfg.frontend_pool[b + 1];
    res2.emplace_back("res2_" + std::to_string(b + 1), channels, rc, rng);
    channels = cfg.res2_filters;
  }
  pool_after_.assign(cfg.n_tf_blocks, false);
  for (auto p : cfg.pool_positions) pool_after_[p - 1] = true;
  for (std::size_t b = 0; b < cfg.n_tf_blocks; ++b) {
    TfConvConfig tc;
    tc.in_channels = channels;
    tc.out_channels = cfg.tf_width();
    tc.enable_freq_branch = cfg.freq_branch;
    tc.enable_time_branch = cfg.time_branch;
    tc.enable_shuffle = cfg.shuffle;
    tc.shuffle_groups = cfg.shuffle_groups;
    tf.emplace_back("tf" + std::to_string(b + 1), tc, rng);
    tf_pools_.emplace_back("tf" + std::to_string(b + 1) + ".pool", PoolGeometry{2, 2, 2, 2});
    channels = cfg.tf_width();
  }
  Conv1dGeometry hg;
  hg.in_channels = channels;
  hg.out_channels = 2;
  head = Conv1d("head", hg, true, rng);
  if (cfg.zero_init_head) head.weight.value.fill(0.0);

  // Surface undersized segments as configuration errors now rather than
  // dimension errors on the first batch.
  try {
    (void)complexity(cfg.segment_len);
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("model.segment_len: too short for this architecture (") +
                      e.what() + ")");
  }
}

Tensor Model::forward(const Tensor& waves, Mode mode) {
  if (waves.rank() != 2 || waves.shape()[1] != cfg_.segment_len)
    throw DimensionError("model expects [N, " + std::to_string(cfg_.segment_len) +
                         "] waveforms, got " + shape_str(waves.shape()));
  const std::size_t N = waves.shape()[0];
  n_batch_ = N;
  sinc_out_ = sinc.forward(waves);
  Tensor x(sinc_out_.shape());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::abs(sinc_out_[i]);
  x = reshape(x, {N, 1, sinc_out_.shape()[1], sinc_out_.shape()[2]});
  if (cfg_.sinc_pool.active()) x = sinc_pool_.forward(x);
  x = resnet.forward(x, mode);
  for (auto& block : res2) x = block.forward(x, mode);
  for (std::size_t b = 0; b < tf.size(); ++b) {
    x = tf[b].forward(x, mode);
    if (pool_after_[b]) x = tf_pools_[b].forward(x);
  }
  tf_out_shape_ = x.shape();
  const Tensor pooled_f = mean_over_axis(x, 2);  // [N, C', 1, T]
  const std::size_t T = x.shape()[3];
  const Tensor per_frame = head.forward(reshape(pooled_f, {N, x.shape()[1], T}));
  Tensor logits = reshape(mean_over_axis(reshape(per_frame, {N, 2, 1, T}), 3), {N, 2});
  debug_check_finite(logits, "model logits");
  return logits;
}

void Model::backward(const Tensor& grad_logits) {
  if (tf_out_shape_.empty()) throw StateError("model: backward before forward");
  if (grad_logits.shape() != Shape{n_batch_, 2})
    throw DimensionError("model: gradient shape " + shape_str(grad_logits.shape()));
  const std::size_t T = tf_out_shape_[3], F = tf_out_shape_[2];
  Tensor g = mean_over_axis_backward(reshape(grad_logits, {n_batch_, 2, 1, 1}), 3, T);
  g = head.backward(reshape(g, {n_batch_, 2, T}));
  g = mean_over_axis_backward(reshape(g, {n_batch_, tf_out_shape_[1], 1, T}), 2, F);
  for (std::size_t b = tf.size(); b-- > 0;) {
    if (pool_after_[b]) g = tf_pools_[b].backward(g);
    g = tf[b].backward(g);
  }
  for (std::size_t b = res2.size(); b-- > 0;) g = res2[b].backward(g);
  g = resnet.backward(g);
  if (cfg_.sinc_pool.active()) g = sinc_pool_.backward(g);
  g = reshape(g, sinc_out_.shape());
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] *= sinc_out_[i] > 0.0 ? 1.0 : (sinc_out_[i] < 0.0 ? -1.0 : 0.0);
  sinc.backward(g, false);
}

ParamList Model::parameters() {
  ParamList out;
  sinc.collect(out);
  resnet.collect(out);
  for (auto& b : res2) b.collect(out);
  for (auto& b : tf) b.collect(out);
  head.collect(out);
  return out;
}

void Model::zero_grad() {
  for (Param* p : parameters()) p->grad.fill(0.0);
}

ComplexityReport Model::complexity(std::size_t input_length) const {
  ComplexityReport report;
  report.input_length = input_length;
  CostRows& rows = report.rows;
  Shape s = sinc.cost({1, input_length}, rows);
  s = {1, 1, s[1], s[2]};
  if (cfg_.sinc_pool.active()) s = sinc_pool_.cost(s, rows);
  s = resnet.cost(s, rows);
  for (const auto& b : res2) s = b.cost(s, rows);
  for (std::size_t b = 0; b < tf.size(); ++b) {
    s = tf[b].cost(s, rows);
    if (pool_after_[b]) s = tf_pools_[b].cost(s, rows);
  }
  head.cost({1, s[1], s[3]}, rows);
  for (const auto& r : rows) {
    report.total_params += r.params;
    report.total_macs += r.macs;
  }
  return report;
}

Model build_rawtfnet(const ModelConfig& cfg, Rng& rng) { return Model(cfg, rng); }

Tensor forward_utterance(Model& model, const Tensor& wave, Mode mode) {
  if (wave.rank() != 1 || wave.size() != model.config().segment_len)
    throw DimensionError("forward_utterance expects [" +
                         std::to_string(model.config().segment_len) + "] samples, got " +
                         shape_str(wave.shape()));
  return reshape(model.forward(reshape(wave, {1, wave.size()}), mode), {2});
}

double detection_score(const Tensor& logits) {
  if (logits.size() != 2) throw DimensionError("detection_score expects 2 logits");
  return logits[1] - logits[0];
}

ComplexityReport count_params(const Model& model) {
  return model.complexity(model.config().segment_len);
}

ComplexityReport count_macs(const Model& model, std::size_t input_length) {
  return model.complexity(input_length);
}

}  // namespace rawtfnet
