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

// Invertible mel <-> 16-bit grayscale image conversion.

#ifndef MELFIX_CODEC_HPP_
#define MELFIX_CODEC_HPP_

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "melfix/dsp.hpp"
#include "melfix/matrix.hpp"

namespace melfix {

inline constexpr double kDefaultMinDb = -100.0;
inline constexpr double kDefaultMaxDb = 0.0;
inline constexpr int kDefaultPadMultiple = 16;

struct NormMeta {
  double min_db = kDefaultMinDb;
  double max_db = kDefaultMaxDb;
  int orig_frames = 0;
  int n_mels = 0;
  int sample_rate = 0;
  int hop_length = 0;

  friend bool operator==(const NormMeta&, const NormMeta&) = default;
};

// Row-major, row 0 is the top of the picture (highest mel bin).
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<uint16_t> pixels;

  uint16_t at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
  uint16_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

struct EncodedMel {
  GrayImage image;
  NormMeta meta;
};

// clip((v - min_db) / (max_db - min_db), 0, 1) per cell.
std::pair<Matrix, NormMeta> Normalize(const MelSpectrogram& mel, double min_db, double max_db);

// round(u * 65535), ties away from zero.
uint16_t Quantize16(double unit);
double Dequantize16(uint16_t pixel);

EncodedMel MelToImage(const MelSpectrogram& mel, double min_db = kDefaultMinDb,
                      double max_db = kDefaultMaxDb,
                      int pad_multiple = kDefaultPadMultiple);
MelSpectrogram ImageToMel(const GrayImage& image, const NormMeta& meta);

// Sidecar path for an image: "<stem>.meta" next to it.
std::filesystem::path SidecarPath(const std::filesystem::path& image_path);
void WriteSidecar(const NormMeta& meta, const std::filesystem::path& path);
NormMeta ReadSidecar(const std::filesystem::path& path);

// Writes the PNG and its sidecar; reads them back.
void WriteEncoded(const EncodedMel& encoded, const std::filesystem::path& png_path);
EncodedMel ReadEncoded(const std::filesystem::path& png_path);

}  // namespace melfix

#endif  // MELFIX_CODEC_HPP_
