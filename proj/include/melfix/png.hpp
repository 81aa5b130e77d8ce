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

#ifndef MELFIX_PNG_HPP_
#define MELFIX_PNG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "melfix/codec.hpp"

namespace melfix {

// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// A decoded, unfiltered, non-interlaced PNG. Samples wider than 8 bits are
// kept big-endian as they appear in the stream.
struct PngRaster {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::vector<uint8_t> rows;  // height * stride bytes
  std::size_t stride = 0;
};

std::string EncodePngGray16(const GrayImage& image);
std::string EncodePngRgb8(const RgbImage& image);
PngRaster DecodePng(const std::string& bytes);

// Single-channel 16-bit grayscale only; anything else is rejected with
// UnsupportedColorType or UnsupportedDepth.
GrayImage DecodePngGray16(const std::string& bytes);
RgbImage DecodePngRgb8(const std::string& bytes);

void WritePng(const GrayImage& image, const std::filesystem::path& path);
GrayImage ReadPng(const std::filesystem::path& path);
void WritePngRgb(const RgbImage& image, const std::filesystem::path& path);
RgbImage ReadPngRgb(const std::filesystem::path& path);

std::string ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace melfix

#endif  // MELFIX_PNG_HPP_
