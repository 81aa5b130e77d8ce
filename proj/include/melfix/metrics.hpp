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


#ifndef MELFIX_METRICS_HPP_
#define MELFIX_METRICS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "melfix/dsp.hpp"
#include "melfix/png.hpp"

namespace melfix {

// Population variance over time of every mel bin.
std::vector<double> GlobalVariance(const MelSpectrogram& mel);

// sqrt(mean over all cells of (a - b)^2), in dB.
double LogSpectralDistance(const MelSpectrogram& a, const MelSpectrogram& b);

// mean(|a - b|) over all cells, in dB.
double MeanAbsDifference(const MelSpectrogram& a, const MelSpectrogram& b);

// Mean over bins of GV(a) / GV(ref); bins whose reference variance is below
// 1e-12 are skipped. Returns 1 if every bin is skipped.
double GvRatioMean(const MelSpectrogram& a, const MelSpectrogram& ref);

using Rgb = std::array<uint8_t, 3>;

// 256-entry perceptually ordered map (dark violet -> yellow).
const std::array<Rgb, 256>& ColorLut();
// Rec. 709 weights on the 8-bit channels.
double Luminance(const Rgb& c);

inline constexpr int kTriptychMargin = 4;

// One pixel per cell, row 0 = highest mel bin, values clipped to
// [min_db, max_db] before the lookup.
RgbImage RenderMel(const MelSpectrogram& mel, double min_db = -100.0, double max_db = 0.0);
// Original on top, synthesized in the middle, enhanced at the bottom, with
// kTriptychMargin white rows between panels.
RgbImage RenderTriptych(const MelSpectrogram& original, const MelSpectrogram& synthesized,
                        const MelSpectrogram& enhanced, double min_db = -100.0,
                        double max_db = 0.0);

void PlotMel(const MelSpectrogram& mel, const std::filesystem::path& path);
void PlotTriptych(const MelSpectrogram& original, const MelSpectrogram& synthesized,
                  const MelSpectrogram& enhanced, const std::filesystem::path& path);

struct EvalRow {
  std::string id;
  double lsd = 0.0;
  double gv_ratio_mean = 0.0;
};

// CSV with header id,lsd,gv_ratio_mean.
std::string FormatEvalReport(const std::vector<EvalRow>& rows);

}  // namespace melfix

#endif  // MELFIX_METRICS_HPP_
