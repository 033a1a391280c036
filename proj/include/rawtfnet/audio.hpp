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
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rawtfnet/layers.hpp"
#include "rawtfnet/tensor.hpp"

namespace rawtfnet {

enum class Label { spoof = 0, bonafide = 1 };

const char* label_name(Label label);

struct ProtocolEntry {
  std::string speaker_id;
  std::string utt_id;
  /// Third protocol column (gender or codec field); kept for round trips.
  std::string aux = "-";
  std::string system_id = "-";
  Label label = Label::spoof;
  std::string path;
};

struct Waveform {
  Tensor samples;  // [length], values in [-1, 1]
  std::size_t sample_rate = 16000;

  std::size_t length() const { return samples.size(); }
  double duration_s() const {
    return sample_rate == 0 ? 0.0 : static_cast<double>(length()) / sample_rate;
  }
};

inline constexpr std::size_t kSampleRate = 16000;

/// RIFF/WAVE, PCM16, mono, 16 kHz. Samples are scaled by 1/32768.
Waveform read_wav(const std::string& path);
/// Writes PCM16 mono; samples are clipped to [-1, 1] and rounded.
void write_wav(const std::string& path, const Waveform& wave);

/// Default path template; "{root}" and "{utt_id}" are substituted.
inline constexpr const char* kDefaultPathTemplate = "{root}/{utt_id}.wav";
std::string resolve_audio_path(const std::string& path_template, const std::string& root,
                               const std::string& utt_id);

/// Whitespace-separated 5-column lines: speaker utt_id aux system key.
/// Blank lines are skipped; errors carry the 1-based line number.
std::vector<ProtocolEntry> parse_protocol(std::istream& is, const std::string& audio_root = "",
                                          const std::string& path_template = kDefaultPathTemplate);
std::vector<ProtocolEntry> parse_protocol_file(const std::string& path,
                                               const std::string& audio_root = "",
                                               const std::string& path_template =
                                                   kDefaultPathTemplate);
void write_protocol(std::ostream& os, const std::vector<ProtocolEntry>& entries);

/// Crop (random offset in train mode, head in eval mode) or tile to `target`.
Waveform fix_length(const Waveform& wave, std::size_t target, Mode mode, Rng& rng);

struct AugmentConfig {
  bool convolutive = true;
  bool impulsive = true;
  bool stationary = true;
  std::size_t n_bands = 5;
  double min_notch_hz = 20.0;
  double max_notch_hz = 1000.0;
  /// FIR length of the notch filter (odd).
  std::size_t fir_taps = 65;
  /// Impulses per 1000 samples.
  double min_density = 0.0;
  double max_density = 10.0;
  /// Impulse amplitude as a multiple of the local sample magnitude.
  double impulse_gain = 2.0;
  double min_snr_db = 10.0;
  double max_snr_db = 40.0;

  bool any() const { return convolutive || impulsive || stationary; }
  void validate() const;
};

/// Convolutive notch filtering, then impulsive noise, then stationary noise;
/// the result is clipped to [-1, 1]. `rng` drives every random draw.
Waveform rawboost_series(const Waveform& wave, const AugmentConfig& cfg, Rng& rng);

// Individual stages, exposed for testing.
Tensor notch_fir(const AugmentConfig& cfg, double sample_rate, Rng& rng);
Tensor convolve_same(const Tensor& x, const Tensor& h);
Tensor impulsive_noise(const Tensor& x, const AugmentConfig& cfg, Rng& rng);
/// Adds AR(1)-colored Gaussian noise at exactly `snr_db` relative to `x`.
Tensor stationary_noise(const Tensor& x, double snr_db, Rng& rng);

// ---------------------------------------------------------------------------
// Batching.

struct BatchItem {
  std::size_t index = 0;  // position in the entry list
  Waveform wave;
  Label label = Label::spoof;
  std::string utt_id;
  double duration_s = 0.0;
};
using Batch = std::vector<BatchItem>;

/// Seeded per-epoch shuffle of entry indices split into batches; the final
/// partial batch is kept. Order depends only on (seed, epoch).
std::vector<std::vector<std::size_t>> batch_order(std::size_t n_entries, std::size_t batch_size,
                                                  std::uint64_t seed, std::size_t epoch);

/// Loads the waveforms for one epoch in batch_order.
std::vector<Batch> make_batches(const std::vector<ProtocolEntry>& entries, std::size_t batch_size,
                                std::uint64_t seed, std::size_t epoch);

// ---------------------------------------------------------------------------
// Synthetic two-class corpus.

struct SyntheticConfig {
  std::size_t n_train = 200;
  std::size_t n_dev = 100;
  std::size_t n_eval = 100;
  /// Train split mirrors the ~1:9 bonafide:spoof ratio the default class
  /// weights assume; dev and eval are balanced.
  double train_bonafide_fraction = 0.1;
  double bonafide_fraction = 0.5;
  double train_min_s = 0.75;
  double train_max_s = 2.5;
  /// Eval/dev durations span the duration buckets.
  double eval_min_s = 0.5;
  double eval_max_s = 10.0;
  std::uint64_t seed = 1;
};

/// One synthetic utterance. Bonafide: three amplitude-modulated harmonics
/// (f0 150-400 Hz) over faint 200-2000 Hz noise. Spoof: stationary noise
/// band-limited to 3000-6000 Hz.
Waveform synth_utterance(Label label, std::size_t length, Rng& rng);

/// Writes train/dev/eval protocols ("train.txt", ...) and WAVs under
/// <dir>/{train,dev,eval}/. Returns the number of files written.
std::size_t generate_synthetic(const std::string& dir, const SyntheticConfig& cfg);

}  // namespace rawtfnet
