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


#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace melfix::testing {

std::vector<double> NaiveDftMag(const std::vector<double>& frame) {
  const std::size_t n = frame.size();
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    long double re = 0, im = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const long double ang = -2.0L * std::numbers::pi_v<long double> *
                              static_cast<long double>((k * t) % n) / n;
      re += frame[t] * std::cos(ang);
      im += frame[t] * std::sin(ang);
    }
    out[k] = static_cast<double>(std::sqrt(re * re + im * im));
  }
  return out;
}

Matrix OracleStft(const std::vector<double>& x, const StftConfig& cfg) {
  const long pad = cfg.n_fft / 2;
  const long n = static_cast<long>(x.size());
  std::vector<double> padded;
  for (long i = -pad; i < n + pad; ++i) {
    long j = i;
    while (j < 0 || j >= n) {
      if (j < 0) j = -j;
      if (j >= n) j = 2 * (n - 1) - j;
    }
    padded.push_back(x[static_cast<std::size_t>(j)]);
  }
  const std::size_t frames = 1 + x.size() / cfg.hop_length;
  Matrix out(cfg.n_fft / 2 + 1, frames);
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<double> frame(cfg.n_fft, 0.0);
    const int off = (cfg.n_fft - cfg.win_length) / 2;
    for (int i = 0; i < cfg.win_length; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.win_length);
      frame[off + i] = w * padded[t * cfg.hop_length + off + i];
    }
    const auto mag = NaiveDftMag(frame);
    for (std::size_t k = 0; k < mag.size(); ++k) out(k, t) = mag[k];
  }
  return out;
}

Matrix OracleFilterbank(const MelConfig& cfg, int n_fft) {
  auto to_mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  auto to_hz = [](double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); };
  const double lo = to_mel(cfg.f_min), hi = to_mel(cfg.f_max);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = to_hz(lo + (hi - lo) * static_cast<double>(i) / (cfg.n_mels + 1));
  }
  Matrix fb(static_cast<std::size_t>(cfg.n_mels), static_cast<std::size_t>(n_fft / 2 + 1));
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double l = edges[m], c = edges[m + 1], r = edges[m + 2];
    for (int k = 0; k <= n_fft / 2; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / n_fft;
      fb(m, k) = std::max(0.0, std::min((f - l) / (c - l), (r - f) / (r - c)));
    }
  }
  return fb;
}

double RelativeError(const Matrix& got, const Matrix& want) {
  double err = 0, ref = 0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    err = std::max(err, std::abs(got.data()[i] - want.data()[i]));
    ref = std::max(ref, std::abs(want.data()[i]));
  }
  return err / ref;
}

}  // namespace melfix::testing
