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
#include <numbers>

#include "rawtfnet/errors.hpp"
#include "rawtfnet/layers.hpp"

namespace rawtfnet {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

SincBank sinc_bank_init(std::size_t n_filters, std::size_t kernel_len, double sample_rate,
                        Rng& /*rng*/) {
  if (n_filters == 0) throw ConfigError("sinc bank needs at least one filter");
  if (kernel_len % 2 == 0)
    throw ConfigError("sinc kernel_len must be odd, got " + std::to_string(kernel_len));
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
  SincBank bank;
  bank.n_filters = n_filters;
  bank.kernel_len = kernel_len;
  bank.sample_rate = sample_rate;
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  const double step = (mel_hi - mel_lo) / static_cast<double>(n_filters);
  std::vector<double> edges(n_filters + 1);
  for (std::size_t k = 0; k <= n_filters; ++k)
    edges[k] = mel_to_hz(mel_lo + static_cast<double>(k) * step);
  edges.front() = 0.0;
  edges.back() = sample_rate / 2.0;
  for (std::size_t k = 0; k < n_filters; ++k) {
    bank.f_low.push_back(edges[k]);
    bank.f_band.push_back(edges[k + 1] - edges[k]);
  }
  return bank;
}

namespace {

double hamming(std::size_t j, std::size_t len) {
  if (len == 1) return 1.0;
  return 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(j) /
                                static_cast<double>(len - 1));
}

// sin(x)/x with the removable singularity filled.
double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

struct Band {
  double f1, f2;            // normalized by the sample rate
  double df1_dlow;          // d f1 / d low (Hz -> normalized)
  double df2_dlow, df2_dband;
};

Band band_edges(double low, double band, double sample_rate) {
  const double nyquist = sample_rate / 2.0;
  Band b{};
  const double f1 = std::abs(low);
  const double raw_f2 = f1 + std::abs(band);
  const double s_low = low >= 0.0 ? 1.0 : -1.0;
  const double s_band = band >= 0.0 ? 1.0 : -1.0;
  b.f1 = std::min(f1, nyquist) / sample_rate;
  b.df1_dlow = f1 < nyquist ? s_low / sample_rate : 0.0;
  if (raw_f2 < nyquist) {
    b.f2 = raw_f2 / sample_rate;
    b.df2_dlow = s_low / sample_rate;
    b.df2_dband = s_band / sample_rate;
  } else {
    b.f2 = nyquist / sample_rate;
  }
  return b;
}

}  // namespace

SincConv::SincConv(std::string name, const SincBank& bank)
    : low_hz(name + ".low_hz", Tensor({bank.n_filters}, bank.f_low)),
      band_hz(name + ".band_hz", Tensor({bank.n_filters}, bank.f_band)),
      name_(std::move(name)),
      n_filters_(bank.n_filters),
      kernel_len_(bank.kernel_len),
      sample_rate_(bank.sample_rate) {
  if (kernel_len_ % 2 == 0) throw ConfigError(name_ + ": kernel_len must be odd");
  if (bank.f_low.size() != n_filters_ || bank.f_band.size() != n_filters_)
    throw ConfigError(name_ + ": band edge count mismatch");
}

SincBank SincConv::bank() const {
  SincBank b;
  b.n_filters = n_filters_;
  b.kernel_len = kernel_len_;
  b.sample_rate = sample_rate_;
  b.f_low = low_hz.value.vec();
  b.f_band = band_hz.value.vec();
  return b;
}

Conv2dGeometry SincConv::geometry() const {
  Conv2dGeometry g;
  g.in_channels = 1;
  g.out_channels = n_filters_;
  g.kernel_h = 1;
  g.kernel_w = kernel_len_;
  return g;
}

Tensor SincConv::filters() const {
  // h[m] = 2 f2 sinc(2 pi f2 m) - 2 f1 sinc(2 pi f1 m), m centred on the middle tap.
  Tensor h({n_filters_, kernel_len_});
  const double half = static_cast<double>(kernel_len_ - 1) / 2.0;
  for (std::size_t k = 0; k < n_filters_; ++k) {
    const Band b = band_edges(low_hz.value[k], band_hz.value[k], sample_rate_);
    for (std::size_t j = 0; j < kernel_len_; ++j) {
      const double m = static_cast<double>(j) - half;
      const double v = 2.0 * b.f2 * sinc(2.0 * std::numbers::pi * b.f2 * m) -
                       2.0 * b.f1 * sinc(2.0 * std::numbers::pi * b.f1 * m);
      h.at({k, j}) = v * hamming(j, kernel_len_);
    }
  }
  return h;
}

Tensor SincConv::forward(const Tensor& wave) {
  if (wave.rank() != 2)
    throw DimensionError(name_ + ": expects [N, samples], got " + shape_str(wave.shape()));
  const std::size_t N = wave.shape()[0], L = wave.shape()[1];
  if (L < kernel_len_)
    throw DimensionError(name_ + ": waveform of " + std::to_string(L) +
                         " samples is shorter than the " + std::to_string(kernel_len_) +
                         "-tap kernel");
  input4_ = reshape(wave, {N, 1, 1, L});
  cached_ = true;
  const Tensor w = reshape(filters(), {n_filters_, 1, 1, kernel_len_});
  Tensor y = kernels::conv2d_forward(input4_, w, Tensor(), geometry());
  return reshape(y, {N, n_filters_, L - kernel_len_ + 1});
}

Tensor SincConv::backward(const Tensor& grad_out, bool need_input_grad) {
  if (!cached_) throw StateError(name_ + ": backward before forward");
  const std::size_t N = input4_.shape()[0], L = input4_.shape()[3];
  const Tensor g4 = reshape(grad_out, {N, n_filters_, 1, L - kernel_len_ + 1});
  Tensor grad_h({n_filters_, 1, 1, kernel_len_});
  kernels::conv2d_backward_params(input4_, g4, geometry(), grad_h, nullptr);

  // dh[m]/df = 2 cos(2 pi f m) * window[m] for either edge (with opposite signs).
  const double half = static_cast<double>(kernel_len_ - 1) / 2.0;
  for (std::size_t k = 0; k < n_filters_; ++k) {
    const Band b = band_edges(low_hz.value[k], band_hz.value[k], sample_rate_);
    double d_f1 = 0.0, d_f2 = 0.0;
    for (std::size_t j = 0; j < kernel_len_; ++j) {
      const double m = static_cast<double>(j) - half;
      const double gw = grad_h[k * kernel_len_ + j] * hamming(j, kernel_len_);
      d_f2 += gw * 2.0 * std::cos(2.0 * std::numbers::pi * b.f2 * m);
      d_f1 -= gw * 2.0 * std::cos(2.0 * std::numbers::pi * b.f1 * m);
    }
    low_hz.grad[k] += d_f1 * b.df1_dlow + d_f2 * b.df2_dlow;
    band_hz.grad[k] += d_f2 * b.df2_dband;
  }
  if (!need_input_grad) return {};
  const Tensor w = reshape(filters(), {n_filters_, 1, 1, kernel_len_});
  return reshape(kernels::conv2d_backward_input(g4, w, geometry(), input4_.shape()), {N, L});
}

void SincConv::collect(ParamList& out) {
  out.push_back(&low_hz);
  out.push_back(&band_hz);
}

Shape SincConv::cost(const Shape& in, CostRows& rows) const {
  const std::size_t L = in[1];
  if (L < kernel_len_) throw DimensionError(name_ + ": input shorter than kernel");
  const std::size_t t_out = L - kernel_len_ + 1;
  rows.push_back({name_, 2 * n_filters_,
                  static_cast<std::uint64_t>(n_filters_) * kernel_len_ * t_out});
  return {in[0], n_filters_, t_out};
}

Tensor sinc_conv_forward(const SincBank& bank, const Tensor& wave) {
  SincConv layer("sinc", bank);
  if (wave.rank() == 1) {
    Tensor y = layer.forward(reshape(wave, {1, wave.size()}));
    return reshape(y, {y.shape()[1], y.shape()[2]});
  }
  return layer.forward(wave);
}

}  // namespace rawtfnet
