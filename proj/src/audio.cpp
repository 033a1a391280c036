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


#include "rawtfnet/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "rawtfnet/errors.hpp"

namespace rawtfnet {

const char* label_name(Label label) { return label == Label::bonafide ? "bonafide" : "spoof"; }

// ---------------------------------------------------------------------------
// WAV

namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void put32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const std::size_t n = bytes.size();
  if (n < 12) throw ParseError(path + ": truncated RIFF header");
  if (std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
      std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE")
    throw FormatError(path + ": container is not RIFF/WAVE");

  bool have_fmt = false;
  std::size_t pos = 12;
  while (true) {
    if (pos + 8 > n) throw ParseError(path + ": truncated before data chunk");
    const std::string id(bytes.begin() + pos, bytes.begin() + pos + 4);
    const std::size_t size = le32(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + size > n) throw ParseError(path + ": truncated fmt chunk");
      const unsigned char* f = &bytes[body];
      if (le16(f) != 1) throw FormatError(path + ": audio_format must be 1 (PCM)");
      if (le16(f + 2) != 1)
        throw FormatError(path + ": channels must be 1, got " + std::to_string(le16(f + 2)));
      if (le32(f + 4) != kSampleRate)
        throw FormatError(path + ": sample_rate must be 16000, got " + std::to_string(le32(f + 4)));
      if (le16(f + 14) != 16)
        throw FormatError(path + ": bits_per_sample must be 16, got " +
                          std::to_string(le16(f + 14)));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(path + ": data chunk before fmt chunk");
      if (body + size > n) throw ParseError(path + ": truncated data chunk");
      if (size % 2 != 0) throw ParseError(path + ": odd data chunk size");
      std::vector<double> samples(size / 2);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(le16(&bytes[body + 2 * i]));
        samples[i] = v / 32768.0;
      }
      const std::size_t len = samples.size();
      if (len == 0) return Waveform{Tensor(), kSampleRate};
      return Waveform{Tensor({len}, std::move(samples)), kSampleRate};
    }
    pos = body + size + (size & 1);
  }
}

void write_wav(const std::string& path, const Waveform& wave) {
  if (wave.sample_rate != kSampleRate)
    throw FormatError("write_wav: sample_rate must be 16000");
  const std::size_t len = wave.length();
  std::string out;
  out.reserve(44 + 2 * len);
  out += "RIFF";
  put32(out, static_cast<std::uint32_t>(36 + 2 * len));
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, kSampleRate);
  put32(out, kSampleRate * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, static_cast<std::uint32_t>(2 * len));
  for (double s : wave.samples.data()) {
    const double q = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0))));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw DataError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Protocols

std::string resolve_audio_path(const std::string& path_template, const std::string& root,
                               const std::string& utt_id) {
  std::string out = path_template;
  for (const auto& [key, value] : {std::pair<std::string, const std::string&>{"{root}", root},
                                   {"{utt_id}", utt_id}}) {
    for (std::size_t p = out.find(key); p != std::string::npos; p = out.find(key, p + value.size()))
      out.replace(p, key.size(), value);
  }
  return out;
}

std::vector<ProtocolEntry> parse_protocol(std::istream& is, const std::string& audio_root,
                                          const std::string& path_template) {
  std::vector<ProtocolEntry> entries;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> cols{std::istream_iterator<std::string>(ls),
                                  std::istream_iterator<std::string>()};
    if (cols.empty()) continue;
    if (cols.size() != 5)
      throw ParseError("protocol line " + std::to_string(line_no) + ": expected 5 columns, got " +
                       std::to_string(cols.size()));
    ProtocolEntry e;
    e.speaker_id = cols[0];
    e.utt_id = cols[1];
    e.aux = cols[2];
    e.system_id = cols[3];
    if (cols[4] == "bonafide")
      e.label = Label::bonafide;
    else if (cols[4] == "spoof")
      e.label = Label::spoof;
    else
      throw ParseError("protocol line " + std::to_string(line_no) + ": unknown key '" + cols[4] +
                       "'");
    if (!seen.insert(e.utt_id).second)
      throw ParseError("protocol line " + std::to_string(line_no) + ": duplicate utt_id '" +
                       e.utt_id + "'");
    e.path = resolve_audio_path(path_template, audio_root, e.utt_id);
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<ProtocolEntry> parse_protocol_file(const std::string& path,
                                               const std::string& audio_root,
                                               const std::string& path_template) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open protocol " + path);
  return parse_protocol(in, audio_root, path_template);
}

void write_protocol(std::ostream& os, const std::vector<ProtocolEntry>& entries) {
  for (const auto& e : entries)
    os << e.speaker_id << ' ' << e.utt_id << ' ' << e.aux << ' ' << e.system_id << ' '
       << label_name(e.label) << '\n';
}

// ---------------------------------------------------------------------------
// Segmenting

Waveform fix_length(const Waveform& wave, std::size_t target, Mode mode, Rng& rng) {
  const std::size_t len = wave.length();
  if (len == 0) throw DataError("fix_length: empty waveform");
  const auto src = wave.samples.data();
  std::vector<double> out(target);
  if (len >= target) {
    const std::size_t offset = mode == Mode::train ? rng.below(len - target + 1) : 0;
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(offset), target, out.begin());
  } else {
    for (std::size_t i = 0; i < target; ++i) out[i] = src[i % len];
  }
  return Waveform{Tensor({target}, std::move(out)), wave.sample_rate};
}

// ---------------------------------------------------------------------------
// Augmentation

void AugmentConfig::validate() const {
  if (n_bands < 1) throw ConfigError("augment.n_bands must be >= 1");
  if (!(min_notch_hz > 0.0) || min_notch_hz > max_notch_hz)
    throw ConfigError("augment.min_notch_hz/max_notch_hz must satisfy 0 < min <= max");
  if (fir_taps < 1 || fir_taps % 2 == 0) throw ConfigError("augment.fir_taps must be odd");
  if (min_density < 0.0 || min_density > max_density)
    throw ConfigError("augment.min_density/max_density must satisfy 0 <= min <= max");
  if (impulse_gain < 0.0) throw ConfigError("augment.impulse_gain must be >= 0");
  if (!(min_snr_db <= max_snr_db) || !std::isfinite(min_snr_db) || !std::isfinite(max_snr_db))
    throw ConfigError("augment.min_snr_db/max_snr_db must be finite with min <= max");
}

namespace {

// Windowed ideal band-pass [f1, f2] (normalized to the sample rate).
void add_bandpass(std::vector<double>& h, double f1, double f2, double scale) {
  const long half = static_cast<long>(h.size() / 2);
  const double n_taps = static_cast<double>(h.size());
  for (long m = -half; m <= half; ++m) {
    const double x = static_cast<double>(m);
    auto lp = [x](double f) {
      return x == 0.0 ? 2.0 * f : std::sin(2.0 * std::numbers::pi * f * x) / (std::numbers::pi * x);
    };
    const double win =
        n_taps > 1 ? 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * (x + half) / (n_taps - 1))
                   : 1.0;
    h[static_cast<std::size_t>(m + half)] += scale * (lp(f2) - lp(f1)) * win;
  }
}

}  // namespace

Tensor notch_fir(const AugmentConfig& cfg, double sample_rate, Rng& rng) {
  const double nyq = sample_rate / 2.0;
  std::vector<std::pair<double, double>> bands;
  for (std::size_t b = 0; b < cfg.n_bands; ++b) {
    const double width = std::min(rng.uniform(cfg.min_notch_hz, cfg.max_notch_hz), nyq);
    const double centre = rng.uniform(width / 2.0, nyq - width / 2.0);
    bands.emplace_back(centre - width / 2.0, centre + width / 2.0);
  }
  // Merge overlapping notches so no band is removed twice.
  std::sort(bands.begin(), bands.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& b : bands) {
    if (!merged.empty() && b.first <= merged.back().second)
      merged.back().second = std::max(merged.back().second, b.second);
    else
      merged.push_back(b);
  }
  std::vector<double> h(cfg.fir_taps, 0.0);
  h[cfg.fir_taps / 2] = 1.0;
  for (const auto& [lo, hi] : merged) add_bandpass(h, lo / sample_rate, hi / sample_rate, -1.0);
  return Tensor({cfg.fir_taps}, std::move(h));
}

Tensor convolve_same(const Tensor& x, const Tensor& h) {
  const long n = static_cast<long>(x.size());
  const long k = static_cast<long>(h.size());
  const long half = k / 2;
  const auto xs = x.data();
  const auto hs = h.data();
  std::vector<double> y(static_cast<std::size_t>(n), 0.0);
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    const long j0 = std::max(0L, i + half - (n - 1));
    const long j1 = std::min(k - 1, i + half);
    for (long j = j0; j <= j1; ++j) acc += hs[static_cast<std::size_t>(j)] * xs[static_cast<std::size_t>(i + half - j)];
    y[static_cast<std::size_t>(i)] = acc;
  }
  return Tensor(x.shape(), std::move(y));
}

Tensor impulsive_noise(const Tensor& x, const AugmentConfig& cfg, Rng& rng) {
  std::vector<double> y = x.vec();
  const std::size_t n = y.size();
  if (n == 0) return x;
  const double density = rng.uniform(cfg.min_density, cfg.max_density);
  const auto count = static_cast<std::size_t>(std::llround(density * static_cast<double>(n) / 1000.0));
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t p = rng.below(n);
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double gain = rng.uniform(0.0, cfg.impulse_gain);
    y[p] += sign * gain * std::abs(x[p]);
  }
  return Tensor(x.shape(), std::move(y));
}

Tensor stationary_noise(const Tensor& x, double snr_db, Rng& rng) {
  const std::size_t n = x.size();
  if (n == 0) return x;
  const double rho = rng.uniform(-0.9, 0.9);
  std::vector<double> noise(n);
  double prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    prev = rho * prev + rng.normal();
    noise[i] = prev;
  }
  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ps += x[i] * x[i];
    pn += noise[i] * noise[i];
  }
  std::vector<double> y = x.vec();
  if (ps == 0.0 || pn == 0.0) return x;
  const double gain = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  for (std::size_t i = 0; i < n; ++i) y[i] += gain * noise[i];
  return Tensor(x.shape(), std::move(y));
}

Waveform rawboost_series(const Waveform& wave, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  if (!cfg.any() || wave.length() == 0) return wave;
  Tensor x = wave.samples;
  if (cfg.convolutive) x = convolve_same(x, notch_fir(cfg, static_cast<double>(wave.sample_rate), rng));
  if (cfg.impulsive) x = impulsive_noise(x, cfg, rng);
  if (cfg.stationary) x = stationary_noise(x, rng.uniform(cfg.min_snr_db, cfg.max_snr_db), rng);
  std::vector<double> y = x.vec();
  for (double& v : y) v = std::clamp(v, -1.0, 1.0);
  return Waveform{Tensor(wave.samples.shape(), std::move(y)), wave.sample_rate};
}

// ---------------------------------------------------------------------------
// Batching

std::vector<std::vector<std::size_t>> batch_order(std::size_t n_entries, std::size_t batch_size,
                                                  std::uint64_t seed, std::size_t epoch) {
  if (n_entries == 0) throw DataError("make_batches: empty entry list");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(n_entries);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::derive(seed, 0x5348554646ULL + epoch);
  for (std::size_t i = n_entries - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < n_entries; b += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n_entries, b + batch_size)));
  return batches;
}

std::vector<Batch> make_batches(const std::vector<ProtocolEntry>& entries, std::size_t batch_size,
                                std::uint64_t seed, std::size_t epoch) {
  std::vector<Batch> out;
  for (const auto& idx : batch_order(entries.size(), batch_size, seed, epoch)) {
    Batch batch;
    for (std::size_t i : idx) {
      BatchItem item;
      item.index = i;
      item.wave = read_wav(entries[i].path);
      item.label = entries[i].label;
      item.utt_id = entries[i].utt_id;
      item.duration_s = item.wave.duration_s();
      batch.push_back(std::move(item));
    }
    out.push_back(std::move(batch));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {
constexpr double kSyntheticRms = 0.1;
}  // namespace

Waveform synth_utterance(Label label, std::size_t length, Rng& rng) {
  const double sr = static_cast<double>(kSampleRate);
  const double two_pi = 2.0 * std::numbers::pi;
  const bool bona = label == Label::bonafide;
  const double lo = bona ? 200.0 : 3000.0;
  const double hi = bona ? 2000.0 : 6000.0;
  std::vector<double> h(65, 0.0);
  add_bandpass(h, lo / sr, hi / sr, 1.0);
  const Tensor noise = convolve_same(random_normal({length}, rng), Tensor({h.size()}, h));
  const double noise_gain = bona ? rng.uniform(0.01, 0.03) : rng.uniform(0.2, 0.35);
  // Harmonic tone stack under a deep slow envelope; spoof has none.
  const double f0 = rng.uniform(150.0, 400.0);
  const double f_mod = rng.uniform(2.0, 8.0);
  const double mod_phase = rng.uniform(0.0, two_pi);
  double phases[3], gains[3];
  for (int k = 0; k < 3; ++k) {
    phases[k] = rng.uniform(0.0, two_pi);
    gains[k] = bona ? rng.uniform(0.1, 0.25) : 0.0;
  }
  std::vector<double> y(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double env = 0.5 * (1.0 + std::sin(two_pi * f_mod * t + mod_phase));
    double v = noise_gain * noise[i];
    for (int k = 0; k < 3; ++k) v += gains[k] * env * std::sin(two_pi * f0 * (k + 1) * t + phases[k]);
    y[i] = v;
  }
  // Equal loudness for every utterance, so level carries no class information.
  double power = 0.0;
  for (double v : y) power += v * v;
  const double rms = std::sqrt(power / static_cast<double>(length));
  for (double& v : y) v = std::clamp(rms > 0.0 ? v * kSyntheticRms / rms : 0.0, -1.0, 1.0);
  return Waveform{Tensor({length}, std::move(y)), kSampleRate};
}

std::size_t generate_synthetic(const std::string& dir, const SyntheticConfig& cfg) {
  namespace fs = std::filesystem;
  struct Split {
    const char* name;
    std::size_t count;
    double min_s, max_s, bona;
  };
  const Split splits[] = {
      {"train", cfg.n_train, cfg.train_min_s, cfg.train_max_s, cfg.train_bonafide_fraction},
      {"dev", cfg.n_dev, cfg.eval_min_s, cfg.eval_max_s, cfg.bonafide_fraction},
      {"eval", cfg.n_eval, cfg.eval_min_s, cfg.eval_max_s, cfg.bonafide_fraction}};
  if (!(cfg.train_min_s > 0.0) || cfg.train_min_s > cfg.train_max_s || !(cfg.eval_min_s > 0.0) ||
      cfg.eval_min_s > cfg.eval_max_s)
    throw ConfigError("synthetic duration ranges must satisfy 0 < min <= max");
  for (double f : {cfg.train_bonafide_fraction, cfg.bonafide_fraction})
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("synthetic bonafide fraction must be in [0, 1]");
  std::size_t written = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const Split& sp = splits[s];
    fs::create_directories(fs::path(dir) / sp.name);
    Rng rng = Rng::derive(cfg.seed, s);
    std::vector<ProtocolEntry> entries;
    const auto n_bona = static_cast<std::size_t>(std::llround(sp.bona * static_cast<double>(sp.count)));
    for (std::size_t i = 0; i < sp.count; ++i) {
      ProtocolEntry e;
      e.label = i < n_bona ? Label::bonafide : Label::spoof;
      char id[64];
      std::snprintf(id, sizeof id, "SYN_%c_%05zu", sp.name[0] - 32, i);
      e.utt_id = id;
      e.speaker_id = "SYN_" + std::to_string(i % 10);
      e.system_id = e.label == Label::bonafide ? "-" : "S01";
      const double dur = rng.uniform(sp.min_s, sp.max_s);
      const auto len = static_cast<std::size_t>(std::llround(dur * static_cast<double>(kSampleRate)));
      Rng utt = Rng::derive(rng.next_u64(), i);
      write_wav((fs::path(dir) / sp.name / (e.utt_id + ".wav")).string(),
                synth_utterance(e.label, std::max<std::size_t>(len, 1), utt));
      entries.push_back(std::move(e));
      ++written;
    }
    // Interleave classes deterministically so protocol order is not label-sorted.
    std::vector<ProtocolEntry> shuffled = entries;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
    std::ofstream os(fs::path(dir) / (std::string(sp.name) + ".txt"));
    write_protocol(os, shuffled);
    if (!os) throw DataError("cannot write protocol in " + dir);
  }
  return written;
}

}  // namespace rawtfnet
