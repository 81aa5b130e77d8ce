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


#include "melfix/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "kv.hpp"
#include "melfix/error.hpp"

namespace melfix {

namespace {

void RequireSameShape(const MelSpectrogram& a, const MelSpectrogram& b) {
  Require(a.n_mels() == b.n_mels() && a.frames() == b.frames(), ErrorCode::kShapeMismatch,
          "mel shapes differ: " + std::to_string(a.n_mels()) + "x" + std::to_string(a.frames()) +
              " vs " + std::to_string(b.n_mels()) + "x" + std::to_string(b.frames()));
}

}  // namespace

std::vector<double> GlobalVariance(const MelSpectrogram& mel) {
  Require(mel.frames() >= 1, ErrorCode::kInvalidArgument, "global variance needs T >= 1");
  std::vector<double> gv(mel.n_mels());
  const double t = static_cast<double>(mel.frames());
  for (std::size_t r = 0; r < mel.n_mels(); ++r) {
    const auto row = mel.values.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= t;
    double acc = 0.0;
    for (double v : row) acc += (v - mean) * (v - mean);
    gv[r] = acc / t;
  }
  return gv;
}

double LogSpectralDistance(const MelSpectrogram& a, const MelSpectrogram& b) {
  RequireSameShape(a, b);
  Require(a.values.size() > 0, ErrorCode::kInvalidArgument, "empty mel");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values.data()[i] - b.values.data()[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.values.size()));
}

double MeanAbsDifference(const MelSpectrogram& a, const MelSpectrogram& b) {
  RequireSameShape(a, b);
  Require(a.values.size() > 0, ErrorCode::kInvalidArgument, "empty mel");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    acc += std::abs(a.values.data()[i] - b.values.data()[i]);
  }
  return acc / static_cast<double>(a.values.size());
}

double GvRatioMean(const MelSpectrogram& a, const MelSpectrogram& ref) {
  RequireSameShape(a, ref);
  const auto ga = GlobalVariance(a);
  const auto gr = GlobalVariance(ref);
  double acc = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < ga.size(); ++i) {
    if (gr[i] < 1e-12) continue;
    acc += ga[i] / gr[i];
    ++used;
  }
  return used == 0 ? 1.0 : acc / used;
}

const std::array<Rgb, 256>& ColorLut() {
  static const std::array<Rgb, 256> lut = [] {
    constexpr double kAnchors[9][3] = {
        {68, 1, 84},    {71, 45, 123},  {59, 82, 139}, {44, 114, 142}, {33, 145, 140},
        {40, 174, 128}, {94, 201, 98},  {173, 220, 48}, {253, 231, 37}};
    std::array<Rgb, 256> out{};
    for (int i = 0; i < 256; ++i) {
      const double pos = i / 255.0 * 8.0;
      const int k = std::min(7, static_cast<int>(pos));
      const double f = pos - k;
      for (int ch = 0; ch < 3; ++ch) {
        const double v = kAnchors[k][ch] + f * (kAnchors[k + 1][ch] - kAnchors[k][ch]);
        out[static_cast<std::size_t>(i)][static_cast<std::size_t>(ch)] =
            static_cast<uint8_t>(std::lround(v));
      }
    }
    return out;
  }();
  return lut;
}

double Luminance(const Rgb& c) { return 0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2]; }

namespace {

void Paint(RgbImage& img, int top, const MelSpectrogram& mel, double min_db, double max_db) {
  const auto& lut = ColorLut();
  const int rows = static_cast<int>(mel.n_mels());
  for (int r = 0; r < rows; ++r) {
    const auto src = mel.values.row(static_cast<std::size_t>(rows - 1 - r));
    for (std::size_t t = 0; t < mel.frames(); ++t) {
      const double u = std::clamp((src[t] - min_db) / (max_db - min_db), 0.0, 1.0);
      const Rgb& c = lut[static_cast<std::size_t>(std::lround(u * 255.0))];
      uint8_t* px = &img.rgb[((static_cast<std::size_t>(top + r)) * img.width + t) * 3];
      px[0] = c[0];
      px[1] = c[1];
      px[2] = c[2];
    }
  }
}

void CheckRenderable(const MelSpectrogram& mel, double min_db, double max_db) {
  Require(mel.n_mels() > 0 && mel.frames() > 0, ErrorCode::kInvalidArgument, "empty mel");
  Require(min_db < max_db, ErrorCode::kInvalidArgument, "min_db must be below max_db");
  for (double v : mel.values.data()) {
    Require(!std::isnan(v), ErrorCode::kNonFinite, "mel contains NaN");
  }
}

}  // namespace

RgbImage RenderMel(const MelSpectrogram& mel, double min_db, double max_db) {
  CheckRenderable(mel, min_db, max_db);
  RgbImage img;
  img.width = static_cast<int>(mel.frames());
  img.height = static_cast<int>(mel.n_mels());
  img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0);
  Paint(img, 0, mel, min_db, max_db);
  return img;
}

RgbImage RenderTriptych(const MelSpectrogram& original, const MelSpectrogram& synthesized,
                        const MelSpectrogram& enhanced, double min_db, double max_db) {
  RequireSameShape(original, synthesized);
  RequireSameShape(original, enhanced);
  const MelSpectrogram* panels[3] = {&original, &synthesized, &enhanced};
  for (const auto* p : panels) CheckRenderable(*p, min_db, max_db);
  const int h = static_cast<int>(original.n_mels());
  RgbImage img;
  img.width = static_cast<int>(original.frames());
  img.height = 3 * h + 2 * kTriptychMargin;
  img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 255);
  for (int i = 0; i < 3; ++i) Paint(img, i * (h + kTriptychMargin), *panels[i], min_db, max_db);
  return img;
}

void PlotMel(const MelSpectrogram& mel, const std::filesystem::path& path) {
  WritePngRgb(RenderMel(mel), path);
}

void PlotTriptych(const MelSpectrogram& original, const MelSpectrogram& synthesized,
                  const MelSpectrogram& enhanced, const std::filesystem::path& path) {
  WritePngRgb(RenderTriptych(original, synthesized, enhanced), path);
}

std::string FormatEvalReport(const std::vector<EvalRow>& rows) {
  std::string out = "id,lsd,gv_ratio_mean\n";
  for (const auto& r : rows) {
    out += r.id + "," + kv::FormatDouble(r.lsd) + "," + kv::FormatDouble(r.gv_ratio_mean) + "\n";
  }
  return out;
}

}  // namespace melfix
