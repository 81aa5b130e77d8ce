// Copyright 2026 The melfix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "melfix/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "melfix/error.hpp"

namespace melfix {
namespace {

// FFTW's planner is not thread-safe; execution on a private plan is.
std::mutex& PlannerMutex() {
  static std::mutex mu;
  return mu;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard<std::mutex> lock(PlannerMutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard<std::mutex> lock(PlannerMutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void Execute() { fftw_execute(plan_); }
  double Magnitude(int bin) const { return std::hypot(out_[bin][0], out_[bin][1]); }

 private:
  int n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

bool IsPowerOfTwo(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Mirror index without repeating the edge sample, folded repeatedly so that
// padding longer than the signal is still defined.
std::size_t ReflectIndex(long long i, std::size_t len) {
  if (len == 1) return 0;
  const long long period = 2 * (static_cast<long long>(len) - 1);
  long long m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<long long>(len)) m = period - m;
  return static_cast<std::size_t>(m);
}

}  // namespace

FeatureProfile ProfileByName(std::string_view name) {
  FeatureProfile p;
  p.name = std::string(name);
  if (name == "paper48k") {
    p.stft = {2400, 600, 4096, true};
    p.mel = {80, 0.0, 24000.0, 48000, -100.0};
  } else if (name == "desk16k") {
    p.stft = {800, 200, 1024, true};
    p.mel = {80, 0.0, 8000.0, 16000, -100.0};
  } else {
    Fail(ErrorCode::kInvalidArgument, "unknown profile '" + std::string(name) +
                                          "' (expected paper48k or desk16k)");
  }
  return p;
}

void Validate(const StftConfig& cfg) {
  Require(cfg.hop_length > 0 && cfg.hop_length <= cfg.win_length &&
              cfg.win_length <= cfg.n_fft,
          ErrorCode::kInvalidArgument,
          "stft config requires 0 < hop_length <= win_length <= n_fft");
  Require(IsPowerOfTwo(cfg.n_fft), ErrorCode::kInvalidArgument,
          "n_fft must be a power of two");
}

void Validate(const MelConfig& cfg) {
  Require(cfg.n_mels >= 1, ErrorCode::kInvalidArgument, "n_mels must be >= 1");
  Require(cfg.sample_rate > 0, ErrorCode::kInvalidArgument, "sample_rate must be positive");
  Require(cfg.f_min >= 0.0 && cfg.f_min < cfg.f_max &&
              cfg.f_max <= cfg.sample_rate / 2.0,
          ErrorCode::kInvalidArgument, "mel config requires 0 <= f_min < f_max <= sr/2");
}

std::vector<double> HannWindow(int n) {
  Require(n >= 1, ErrorCode::kInvalidArgument, "window length must be >= 1");
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    w[static_cast<std::size_t>(k)] =
        0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * k / n));
  }
  return w;
}

std::size_t FrameCount(std::size_t length, int hop_length) {
  return 1 + length / static_cast<std::size_t>(hop_length);
}

Matrix StftMagnitude(const AudioBuffer& audio, const StftConfig& cfg) {
  Validate(cfg);
  Require(!audio.samples.empty(), ErrorCode::kEmptyAudio, "audio has no samples");

  const std::size_t len = audio.samples.size();
  const int n_fft = cfg.n_fft;
  const int bins = n_fft / 2 + 1;
  const std::size_t frames =
      cfg.center ? FrameCount(len, cfg.hop_length)
                 : (len < static_cast<std::size_t>(n_fft)
                        ? 0
                        : 1 + (len - n_fft) / static_cast<std::size_t>(cfg.hop_length));
  Require(frames >= 1, ErrorCode::kEmptyAudio, "audio shorter than one frame");

  std::vector<double> window(static_cast<std::size_t>(n_fft), 0.0);
  {
    const auto hann = HannWindow(cfg.win_length);
    const int offset = (n_fft - cfg.win_length) / 2;
    std::copy(hann.begin(), hann.end(), window.begin() + offset);
  }

  Matrix mag(static_cast<std::size_t>(bins), frames);
  RealFft fft(n_fft);
  const long long pad = cfg.center ? n_fft / 2 : 0;
  for (std::size_t t = 0; t < frames; ++t) {
    double* buf = fft.input();
    const long long start = static_cast<long long>(t) * cfg.hop_length - pad;
    for (int i = 0; i < n_fft; ++i) {
      const std::size_t idx = ReflectIndex(start + i, len);
      buf[i] = window[static_cast<std::size_t>(i)] * audio.samples[idx];
    }
    fft.Execute();
    for (int k = 0; k < bins; ++k) mag(static_cast<std::size_t>(k), t) = fft.Magnitude(k);
  }
  return mag;
}

double HzToMel(double hz) {
  Require(hz >= 0.0, ErrorCode::kInvalidArgument, "frequency must be non-negative");
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double MelToHz(double mel) {
  Require(mel >= 0.0, ErrorCode::kInvalidArgument, "mel value must be non-negative");
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

Matrix MelFilterbank(const MelConfig& cfg, int n_fft) {
  Validate(cfg);
  Require(n_fft >= 2, ErrorCode::kInvalidArgument, "n_fft must be >= 2");
  const int bins = n_fft / 2 + 1;
  const int n_mels = cfg.n_mels;

  const double mel_lo = HzToMel(cfg.f_min);
  const double mel_hi = HzToMel(cfg.f_max);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (n_mels + 1));
  }

  Matrix fb(static_cast<std::size_t>(n_mels), static_cast<std::size_t>(bins));
  for (int m = 0; m < n_mels; ++m) {
    const double left = edges[static_cast<std::size_t>(m)];
    const double center = edges[static_cast<std::size_t>(m) + 1];
    const double right = edges[static_cast<std::size_t>(m) + 2];
    bool any = false;
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / n_fft;
      const double up = (f - left) / (center - left);
      const double down = (right - f) / (right - center);
      const double w = std::max(0.0, std::min(up, down));
      fb(static_cast<std::size_t>(m), static_cast<std::size_t>(k)) = w;
      any = any || w > 0.0;
    }
    Require(any, ErrorCode::kDegenerateFilter,
            "mel filter " + std::to_string(m) + " covers no FFT bin; reduce n_mels or "
            "increase n_fft");
  }
  return fb;
}

MelSpectrogram ComputeMelSpectrogram(const AudioBuffer& audio, const StftConfig& stft,
                                     const MelConfig& mel, std::string source_id) {
  Validate(stft);
  Validate(mel);
  Require(audio.sample_rate == mel.sample_rate, ErrorCode::kSampleRateMismatch,
          "audio sample rate " + std::to_string(audio.sample_rate) +
              " Hz does not match mel config " + std::to_string(mel.sample_rate) + " Hz");
  for (double s : audio.samples) {
    Require(std::isfinite(s), ErrorCode::kNonFinite, "audio contains non-finite samples");
  }

  const Matrix mag = StftMagnitude(audio, stft);
  const Matrix fb = MelFilterbank(mel, stft.n_fft);

  MelSpectrogram out;
  out.stft = stft;
  out.mel = mel;
  out.source_id = std::move(source_id);
  out.values = Matrix(fb.rows(), mag.cols());
  for (std::size_t m = 0; m < fb.rows(); ++m) {
    const auto weights = fb.row(m);
    for (std::size_t t = 0; t < mag.cols(); ++t) {
      double acc = 0.0;
      for (std::size_t k = 0; k < weights.size(); ++k) acc += weights[k] * mag(k, t);
      const double db = 20.0 * std::log10(std::max(1e-5, acc));
      out.values(m, t) = std::max(mel.floor_db, db);
    }
  }
  return out;
}

}  // namespace melfix
