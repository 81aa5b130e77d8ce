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

// Audio loading and log-mel feature extraction.
//
// Pipeline: centered, reflect-padded framing -> periodic Hann window -> FFT
// magnitude -> HTK triangular mel filterbank -> 20*log10 with a 1e-5 floor.

#ifndef MELFIX_DSP_HPP_
#define MELFIX_DSP_HPP_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "melfix/matrix.hpp"

namespace melfix {

struct AudioBuffer {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  int sample_rate = 0;
};

// Reads a RIFF/WAVE file holding 16-bit PCM mono audio.
AudioBuffer ReadWav(const std::filesystem::path& path);
// Writes 16-bit PCM mono; samples are clipped to [-1, 1) before scaling.
void WriteWav(const AudioBuffer& audio, const std::filesystem::path& path);

struct StftConfig {
  int win_length = 800;
  int hop_length = 200;
  int n_fft = 1024;
  bool center = true;
};

struct MelConfig {
  int n_mels = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  int sample_rate = 16000;
  double floor_db = -100.0;
};

struct FeatureProfile {
  std::string name;
  StftConfig stft;
  MelConfig mel;
};

// "paper48k": 48 kHz, 12.5 ms hop (600), 50 ms window (2400), n_fft 4096.
// "desk16k": 16 kHz, hop 200, window 800, n_fft 1024.
FeatureProfile ProfileByName(std::string_view name);

struct MelSpectrogram {
  Matrix values;  // n_mels x frames, dB
  StftConfig stft;
  MelConfig mel;
  std::string source_id;

  std::size_t n_mels() const { return values.rows(); }
  std::size_t frames() const { return values.cols(); }
};

void Validate(const StftConfig& cfg);
void Validate(const MelConfig& cfg);

// Periodic Hann: w[k] = 0.5 * (1 - cos(2*pi*k/n)).
std::vector<double> HannWindow(int n);

// Number of frames produced by centered framing: 1 + len / hop.
std::size_t FrameCount(std::size_t length, int hop_length);

// Magnitude spectrogram of shape (n_fft/2 + 1) x frames. The window is
// zero-padded symmetrically to n_fft.
Matrix StftMagnitude(const AudioBuffer& audio, const StftConfig& cfg);

double HzToMel(double hz);
double MelToHz(double mel);

// n_mels x (n_fft/2 + 1) triangular filters, centers uniformly spaced on the
// mel axis between f_min and f_max.
Matrix MelFilterbank(const MelConfig& cfg, int n_fft);

MelSpectrogram ComputeMelSpectrogram(const AudioBuffer& audio,
                                     const StftConfig& stft,
                                     const MelConfig& mel,
                                     std::string source_id = {});

}  // namespace melfix

#endif  // MELFIX_DSP_HPP_
