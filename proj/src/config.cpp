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


#include "rawtfnet/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>

#include "rawtfnet/errors.hpp"

namespace rawtfnet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError(key + ": cannot parse '" + value + "' as " + want);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size())
    bad_value(key, v, "a nonnegative integer");
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(parse_u64(key, v));
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d)) bad_value(key, v, "a finite number");
  return d;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::string fmt_double(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

PoolWindow parse_window(const std::string& key, const std::string& v) {
  const auto x = v.find('x');
  if (x == std::string::npos) bad_value(key, v, "HxW");
  return {parse_size(key, v.substr(0, x)), parse_size(key, v.substr(x + 1))};
}

std::string fmt_window(const PoolWindow& w) { return std::to_string(w.h) + "x" + std::to_string(w.w); }

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define RTF_SIZE(KEY, MEMBER)                                                               \
  Field {                                                                                   \
    KEY, [](const RunConfig& c) { return std::to_string(c.MEMBER); },                       \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_size(KEY, v); }           \
  }
#define RTF_DOUBLE(KEY, MEMBER)                                                             \
  Field {                                                                                   \
    KEY, [](const RunConfig& c) { return fmt_double(c.MEMBER); },                           \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_double(KEY, v); }         \
  }
#define RTF_BOOL(KEY, MEMBER)                                                               \
  Field {                                                                                   \
    KEY, [](const RunConfig& c) { return fmt_bool(c.MEMBER); },                             \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_bool(KEY, v); }           \
  }
#define RTF_STRING(KEY, MEMBER)                                                             \
  Field {                                                                                   \
    KEY, [](const RunConfig& c) { return c.MEMBER; },                                       \
        [](RunConfig& c, const std::string& v) { c.MEMBER = v; }                            \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      RTF_SIZE("model.tau", model.tau),
      RTF_SIZE("model.width_mult", model.width_mult),
      RTF_SIZE("model.n_tf_blocks", model.n_tf_blocks),
      RTF_SIZE("model.sinc_filters", model.sinc_filters),
      RTF_SIZE("model.sinc_kernel", model.sinc_kernel),
      Field{"model.sinc_pool", [](const RunConfig& c) { return fmt_window(c.model.sinc_pool); },
            [](RunConfig& c, const std::string& v) {
              c.model.sinc_pool = parse_window("model.sinc_pool", v);
            }},
      RTF_SIZE("model.resnet_filters", model.resnet_filters),
      RTF_SIZE("model.res2_filters", model.res2_filters),
      RTF_SIZE("model.n_res2_blocks", model.n_res2_blocks),
      RTF_SIZE("model.res2_scale", model.res2_scale),
      RTF_SIZE("model.res2_dilation", model.res2_dilation),
      RTF_SIZE("model.se_reduction", model.se_reduction),
      Field{"model.frontend_pool",
            [](const RunConfig& c) {
              std::string s;
              for (std::size_t i = 0; i < c.model.frontend_pool.size(); ++i)
                s += (i ? "," : "") + fmt_window(c.model.frontend_pool[i]);
              return s;
            },
            [](RunConfig& c, const std::string& v) {
              c.model.frontend_pool.clear();
              for (const auto& p : split(v, ','))
                c.model.frontend_pool.push_back(parse_window("model.frontend_pool", p));
            }},
      Field{"model.pool_positions",
            [](const RunConfig& c) {
              if (c.model.pool_positions.empty()) return std::string("none");
              std::string s;
              for (std::size_t i = 0; i < c.model.pool_positions.size(); ++i)
                s += (i ? "," : "") + std::to_string(c.model.pool_positions[i]);
              return s;
            },
            [](RunConfig& c, const std::string& v) {
              c.model.pool_positions.clear();
              if (v == "none" || v.empty()) return;
              for (const auto& p : split(v, ','))
                c.model.pool_positions.push_back(parse_size("model.pool_positions", p));
            }},
      RTF_BOOL("model.freq_branch", model.freq_branch),
      RTF_BOOL("model.time_branch", model.time_branch),
      RTF_BOOL("model.shuffle", model.shuffle),
      RTF_SIZE("model.shuffle_groups", model.shuffle_groups),
      RTF_SIZE("model.sample_rate", model.sample_rate),
      RTF_SIZE("model.segment_len", model.segment_len),
      RTF_BOOL("model.zero_init_head", model.zero_init_head),

      RTF_BOOL("augment.convolutive", augment.convolutive),
      RTF_BOOL("augment.impulsive", augment.impulsive),
      RTF_BOOL("augment.stationary", augment.stationary),
      RTF_SIZE("augment.n_bands", augment.n_bands),
      RTF_DOUBLE("augment.min_notch_hz", augment.min_notch_hz),
      RTF_DOUBLE("augment.max_notch_hz", augment.max_notch_hz),
      RTF_SIZE("augment.fir_taps", augment.fir_taps),
      RTF_DOUBLE("augment.min_density", augment.min_density),
      RTF_DOUBLE("augment.max_density", augment.max_density),
      RTF_DOUBLE("augment.impulse_gain", augment.impulse_gain),
      RTF_DOUBLE("augment.min_snr_db", augment.min_snr_db),
      RTF_DOUBLE("augment.max_snr_db", augment.max_snr_db),

      RTF_DOUBLE("optim.lr", optim.lr),
      RTF_DOUBLE("optim.beta1", optim.beta1),
      RTF_DOUBLE("optim.beta2", optim.beta2),
      RTF_DOUBLE("optim.eps", optim.eps),
      RTF_DOUBLE("optim.weight_decay", optim.weight_decay),

      RTF_SIZE("train.epochs", epochs),
      RTF_SIZE("train.batch_size", batch_size),
      RTF_SIZE("train.top_k", top_k),
      RTF_BOOL("train.augment", use_augment),
      RTF_DOUBLE("train.weight_spoof", class_weights.spoof),
      RTF_DOUBLE("train.weight_bonafide", class_weights.bonafide),
      RTF_SIZE("train.eval_batch", eval_batch),

      RTF_STRING("data.train_protocol", data.train_protocol),
      RTF_STRING("data.train_root", data.train_root),
      RTF_STRING("data.dev_protocol", data.dev_protocol),
      RTF_STRING("data.dev_root", data.dev_root),
      RTF_STRING("data.eval_protocol", data.eval_protocol),
      RTF_STRING("data.eval_root", data.eval_root),
      RTF_STRING("data.path_template", data.path_template),

      Field{"seed",
            [](const RunConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string("none"); },
            [](RunConfig& c, const std::string& v) {
              if (v == "none")
                c.seed.reset();
              else
                c.seed = parse_u64("seed", v);
            }},
      RTF_STRING("output_dir", output_dir),
      Field{"tdcf.costs",
            [](const RunConfig& c) {
              if (!c.tdcf) return std::string("none");
              return fmt_double(c.tdcf->c0) + "," + fmt_double(c.tdcf->c1) + "," +
                     fmt_double(c.tdcf->c2);
            },
            [](RunConfig& c, const std::string& v) {
              if (v == "none") {
                c.tdcf.reset();
                return;
              }
              const auto parts = split(v, ',');
              if (parts.size() != 3) bad_value("tdcf.costs", v, "C0,C1,C2");
              c.tdcf = TdcfCosts{parse_double("tdcf.costs", parts[0]),
                                 parse_double("tdcf.costs", parts[1]),
                                 parse_double("tdcf.costs", parts[2])};
            }},
      RTF_SIZE("threads", threads),
  };
  return table;
}

#undef RTF_SIZE
#undef RTF_DOUBLE
#undef RTF_BOOL
#undef RTF_STRING

const Field& field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  augment.validate();
  if (!(optim.lr >= 0.0)) throw ConfigError("optim.lr: must be >= 0");
  if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0)) throw ConfigError("optim.beta1: must be in [0, 1)");
  if (!(optim.beta2 >= 0.0 && optim.beta2 < 1.0)) throw ConfigError("optim.beta2: must be in [0, 1)");
  if (!(optim.eps > 0.0)) throw ConfigError("optim.eps: must be > 0");
  if (!(optim.weight_decay >= 0.0)) throw ConfigError("optim.weight_decay: must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (top_k < 1) throw ConfigError("train.top_k: must be >= 1");
  if (eval_batch < 1) throw ConfigError("train.eval_batch: must be >= 1");
  if (!(class_weights.spoof > 0.0)) throw ConfigError("train.weight_spoof: must be > 0");
  if (!(class_weights.bonafide > 0.0)) throw ConfigError("train.weight_bonafide: must be > 0");
  if (tdcf) {
    try {
      tdcf->validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("tdcf.costs: ") + e.what());
    }
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

std::string config_get(const RunConfig& cfg, const std::string& key) { return field(key).get(cfg); }

void config_set(RunConfig& cfg, const std::string& key, const std::string& value) {
  field(key).set(cfg, trim(value));
}

RunConfig parse_config(std::istream& is, RunConfig base) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    try {
      config_set(base, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in, std::move(base));
}

void write_config(std::ostream& os, const RunConfig& cfg) {
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string s = dot == std::string::npos ? "" : f.key.substr(0, dot);
    if (s != section && !s.empty()) os << '\n';
    section = s;
    os << f.key << " = " << f.get(cfg) << '\n';
  }
}

RunConfig tiny_run_config() {
  RunConfig c;
  c.model.tau = 16;
  c.model.width_mult = 1;
  c.model.sinc_filters = 16;
  c.model.sinc_kernel = 33;
  c.model.resnet_filters = 8;
  c.model.res2_filters = 16;
  c.model.n_res2_blocks = 1;
  c.model.frontend_pool = {{1, 3}, {1, 3}};
  c.model.segment_len = 16000;
  c.epochs = 20;
  c.seed = 1;
  return c;
}

}  // namespace rawtfnet
