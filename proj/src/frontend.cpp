// src/frontend.cpp

// Copyright 2026 The zrmat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "zrmat/frontend.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <numbers>

#include "zrmat/error.hpp"

namespace zrmat {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Owns one real-to-complex FFTW plan and its buffers.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }

  // Power spectrum |X_k|^2 for k = 0..n/2.
  void power(std::vector<double>& out) {
    fftw_execute(plan_);
    out.resize(n_ / 2 + 1);
    for (int k = 0; k <= n_ / 2; ++k)
      out[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

// Triangular filters laid out on the mel scale; weights[f][k] for FFT bin k.
std::vector<std::vector<double>> mel_filterbank(int num_filters, int fft_size,
                                                int sample_rate, double low,
                                                double high) {
  const double mel_lo = hz_to_mel(low);
  const double mel_hi = hz_to_mel(high);
  std::vector<double> centers(num_filters + 2);
  for (int i = 0; i < num_filters + 2; ++i)
    centers[i] = mel_lo + (mel_hi - mel_lo) * i / (num_filters + 1);
  const int bins = fft_size / 2 + 1;
  std::vector<std::vector<double>> w(num_filters, std::vector<double>(bins, 0.0));
  for (int k = 0; k < bins; ++k) {
    const double mel = hz_to_mel(static_cast<double>(k) * sample_rate / fft_size);
    for (int f = 0; f < num_filters; ++f) {
      const double l = centers[f], c = centers[f + 1], r = centers[f + 2];
      if (mel > l && mel < c)
        w[f][k] = (mel - l) / (c - l);
      else if (mel >= c && mel < r)
        w[f][k] = (r - mel) / (r - c);
    }
  }
  return w;
}

}  // namespace

// ---------------------------------------------------------------------- wav

PcmAudio read_wav(const fs::path& path) {
  const std::string data = read_text_file(path);
  auto u32 = [&](std::size_t at) {
    if (at + 4 > data.size()) throw FormatError(path.string() + ": truncated wav");
    const auto* p = reinterpret_cast<const unsigned char*>(data.data() + at);
    return static_cast<std::uint32_t>(p[0] | (p[1] << 8) | (p[2] << 16)) |
           (static_cast<std::uint32_t>(p[3]) << 24);
  };
  auto u16 = [&](std::size_t at) {
    if (at + 2 > data.size()) throw FormatError(path.string() + ": truncated wav");
    const auto* p = reinterpret_cast<const unsigned char*>(data.data() + at);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  };
  if (data.size() < 12 || data.compare(0, 4, "RIFF") != 0 || data.compare(8, 4, "WAVE") != 0)
    throw FormatError(path.string() + ": not a RIFF/WAVE file");
  PcmAudio audio;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= data.size()) {
    const std::string id = data.substr(pos, 4);
    const std::uint32_t size = u32(pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (u16(body) != 1) throw FormatError(path.string() + ": only PCM wav is supported");
      if (u16(body + 2) != 1) throw FormatError(path.string() + ": only mono wav is supported");
      audio.sample_rate = static_cast<int>(u32(body + 4));
      if (u16(body + 14) != 16) throw FormatError(path.string() + ": only 16-bit wav is supported");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(path.string() + ": data chunk before fmt chunk");
      const std::size_t n = std::min<std::size_t>(size, data.size() - body) / 2;
      audio.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        audio.samples[i] = static_cast<std::int16_t>(u16(body + 2 * i));
      return audio;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError(path.string() + ": no data chunk");
}

void write_wav(const PcmAudio& audio, const fs::path& path) {
  std::string out;
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
  };
  auto put16 = [&](std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
  };
  const auto bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  out += "RIFF";
  put32(36 + bytes);
  out += "WAVEfmt ";
  put32(16);
  put16(1);
  put16(1);
  put32(static_cast<std::uint32_t>(audio.sample_rate));
  put32(static_cast<std::uint32_t>(audio.sample_rate * 2));
  put16(2);
  put16(16);
  out += "data";
  put32(bytes);
  for (auto s : audio.samples) put16(static_cast<std::uint16_t>(s));
  write_text_file(path, out);
}

// --------------------------------------------------------------------- mfcc

int mfcc_num_frames(std::size_t num_samples, int sample_rate, const MfccOptions& opts) {
  const int window = static_cast<int>(std::lround(opts.window_ms * sample_rate / 1000.0));
  const int shift = static_cast<int>(std::lround(opts.shift_ms * sample_rate / 1000.0));
  if (static_cast<long>(num_samples) < window) return 0;
  return static_cast<int>((num_samples - window) / shift) + 1;
}

FeatureMatrix mfcc_static(std::span<const std::int16_t> pcm, int sample_rate,
                          const MfccOptions& opts) {
  if (sample_rate < 8000)
    throw ValidationError("sample rate must be >= 8000 Hz, got " + std::to_string(sample_rate));
  const int window = static_cast<int>(std::lround(opts.window_ms * sample_rate / 1000.0));
  const int shift = static_cast<int>(std::lround(opts.shift_ms * sample_rate / 1000.0));
  const int frames = mfcc_num_frames(pcm.size(), sample_rate, opts);
  if (frames < 1)
    throw ValidationError("audio shorter than one analysis window (" +
                          std::to_string(pcm.size()) + " < " + std::to_string(window) +
                          " samples)");
  const int fft_size = next_pow2(window);
  const double high = opts.high_freq > 0 ? opts.high_freq : sample_rate / 2.0;
  const auto fbank = mel_filterbank(opts.num_filters, fft_size, sample_rate, opts.low_freq, high);

  std::vector<double> hamming(window);
  for (int n = 0; n < window; ++n)
    hamming[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (window - 1));

  RealFft fft(fft_size);
  std::vector<double> power;
  std::vector<double> log_fb(opts.num_filters);
  FeatureMatrix out(frames, opts.num_ceps + 1);
  const double dct_scale = std::sqrt(2.0 / opts.num_filters);

  for (int t = 0; t < frames; ++t) {
    const std::int16_t* x = pcm.data() + static_cast<std::size_t>(t) * shift;
    double energy = 0.0;
    for (int n = 0; n < window; ++n) energy += static_cast<double>(x[n]) * x[n];

    double* buf = fft.input();
    buf[0] = x[0] * (1.0 - opts.preemphasis) * hamming[0];
    for (int n = 1; n < window; ++n)
      buf[n] = (x[n] - opts.preemphasis * x[n - 1]) * hamming[n];
    std::fill(buf + window, buf + fft_size, 0.0);
    fft.power(power);

    for (int f = 0; f < opts.num_filters; ++f) {
      double e = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) e += fbank[f][k] * power[k];
      log_fb[f] = std::log(std::max(e, opts.energy_floor));
    }
    for (int i = 1; i <= opts.num_ceps; ++i) {
      double c = 0.0;
      for (int j = 0; j < opts.num_filters; ++j)
        c += log_fb[j] * std::cos(std::numbers::pi * i * (j + 0.5) / opts.num_filters);
      out(t, i - 1) = static_cast<float>(dct_scale * c);
    }
    out(t, opts.num_ceps) = static_cast<float>(std::log(std::max(energy, opts.energy_floor)));
  }
  return out;
}

FeatureMatrix deltas(const FeatureMatrix& x, int window) {
  const int T = static_cast<int>(x.rows());
  double denom = 0.0;
  for (int k = 1; k <= window; ++k) denom += 2.0 * k * k;
  FeatureMatrix d(T, x.cols());
  for (int t = 0; t < T; ++t) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      double acc = 0.0;
      for (int k = 1; k <= window; ++k) {
        const int fwd = std::min(t + k, T - 1);
        const int back = std::max(t - k, 0);
        acc += k * (static_cast<double>(x(fwd, c)) - x(back, c));
      }
      d(t, c) = static_cast<float>(acc / denom);
    }
  }
  return d;
}

FeatureSequence mfcc39(std::span<const std::int16_t> pcm, int sample_rate,
                       const MfccOptions& opts) {
  FeatureMatrix base = mfcc_static(pcm, sample_rate, opts);
  FeatureMatrix d1 = deltas(base, opts.delta_window);
  FeatureMatrix d2 = deltas(d1, opts.delta_window);
  FeatureSequence seq;
  seq.frame_period_ms = static_cast<std::uint32_t>(std::lround(opts.shift_ms));
  seq.frames.resize(base.rows(), base.cols() * 3);
  seq.frames << base, d1, d2;
  return seq;
}

// --------------------------------------------------------------------- cmvn

FeatureSequence cmvn(const FeatureSequence& seq) {
  FeatureSequence out = seq;
  const int T = seq.num_frames();
  for (int c = 0; c < seq.dim(); ++c) {
    double mean = 0.0;
    for (int t = 0; t < T; ++t) mean += seq.frames(t, c);
    mean /= T;
    double var = 0.0;
    for (int t = 0; t < T; ++t) {
      const double d = seq.frames(t, c) - mean;
      var += d * d;
    }
    var = std::max(var / T, 1e-8);
    const double inv = 1.0 / std::sqrt(var);
    for (int t = 0; t < T; ++t)
      out.frames(t, c) = static_cast<float>((seq.frames(t, c) - mean) * inv);
  }
  return out;
}

// -------------------------------------------------------------------- stack

StackedInput stack(const FeatureSequence& seq, int context, std::span<const float> aux) {
  if (context < 0) throw ValidationError("context must be >= 0");
  const int T = seq.num_frames();
  const int d = seq.dim();
  StackedInput out;
  out.utterance_id = seq.utterance_id;
  out.frame_period_ms = seq.frame_period_ms;
  out.context = context;
  out.base_dim = d;
  out.aux_dim = static_cast<int>(aux.size());
  out.frames.resize(T, stacked_width(d, context, out.aux_dim));
  for (int t = 0; t < T; ++t) {
    int col = 0;
    for (int k = -context; k <= context; ++k, col += d) {
      const int src = std::clamp(t + k, 0, T - 1);
      out.frames.row(t).segment(col, d) = seq.frames.row(src);
    }
    for (int a = 0; a < out.aux_dim; ++a) out.frames(t, col + a) = aux[a];
  }
  return out;
}

std::vector<StackedInput> stack_corpus(const Corpus& corpus, int context,
                                       const std::map<std::string, std::vector<float>>& aux) {
  std::vector<StackedInput> out;
  out.reserve(corpus.size());
  int aux_dim = -1;
  for (const auto& seq : corpus) {
    std::span<const float> a;
    if (!aux.empty()) {
      auto it = aux.find(seq.utterance_id);
      if (it == aux.end())
        throw ValidationError("no auxiliary vector for utterance '" + seq.utterance_id + "'");
      a = it->second;
      if (aux_dim >= 0 && static_cast<int>(a.size()) != aux_dim)
        throw ValidationError("auxiliary dimension mismatch at '" + seq.utterance_id + "': " +
                              std::to_string(a.size()) + " vs " + std::to_string(aux_dim));
      aux_dim = static_cast<int>(a.size());
    }
    out.push_back(stack(seq, context, a));
  }
  return out;
}

FeatureSequence concat_features(const FeatureSequence& a, const FeatureSequence& b) {
  if (b.frames.size() == 0) return a;
  if (a.frames.size() == 0) return b;
  if (a.num_frames() != b.num_frames())
    throw ValidationError("cannot concatenate '" + a.utterance_id + "': frame counts " +
                          std::to_string(a.num_frames()) + " vs " +
                          std::to_string(b.num_frames()));
  if (a.frame_period_ms != b.frame_period_ms)
    throw ValidationError("cannot concatenate '" + a.utterance_id + "': frame periods differ");
  FeatureSequence out;
  out.utterance_id = a.utterance_id;
  out.frame_period_ms = a.frame_period_ms;
  out.frames.resize(a.num_frames(), a.dim() + b.dim());
  out.frames << a.frames, b.frames;
  return out;
}

StackedInput concat_stacks(const StackedInput& a, const StackedInput& b) {
  if (b.frames.size() == 0) return a;
  if (a.frames.size() == 0) return b;
  if (a.frames.rows() != b.frames.rows())
    throw ValidationError("cannot concatenate stacks of '" + a.utterance_id +
                          "': frame counts differ");
  StackedInput out = a;
  out.base_dim = a.base_dim + b.base_dim;
  out.aux_dim = a.aux_dim + b.aux_dim;
  out.frames.resize(a.frames.rows(), a.frames.cols() + b.frames.cols());
  out.frames << a.frames, b.frames;
  return out;
}

}  // namespace zrmat
