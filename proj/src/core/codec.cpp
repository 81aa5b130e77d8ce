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

#include "melfix/codec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "melfix/error.hpp"
#include "melfix/png.hpp"

namespace melfix {

std::pair<Matrix, NormMeta> Normalize(const MelSpectrogram& mel, double min_db,
                                      double max_db) {
  Require(min_db < max_db, ErrorCode::kInvalidArgument, "normalization requires min_db < max_db");
  Matrix unit(mel.n_mels(), mel.frames());
  const double range = max_db - min_db;
  const auto& src = mel.values.data();
  auto& dst = unit.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    Require(std::isfinite(src[i]), ErrorCode::kNonFinite, "mel contains a non-finite cell");
    dst[i] = std::clamp((src[i] - min_db) / range, 0.0, 1.0);
  }
  NormMeta meta;
  meta.min_db = min_db;
  meta.max_db = max_db;
  meta.orig_frames = static_cast<int>(mel.frames());
  meta.n_mels = static_cast<int>(mel.n_mels());
  meta.sample_rate = mel.mel.sample_rate;
  meta.hop_length = mel.stft.hop_length;
  return {std::move(unit), meta};
}

uint16_t Quantize16(double unit) {
  Require(unit >= 0.0 && unit <= 1.0, ErrorCode::kInvalidArgument,
          "quantize16 expects a value in [0, 1]");
  return static_cast<uint16_t>(std::round(unit * 65535.0));
}

double Dequantize16(uint16_t pixel) { return static_cast<double>(pixel) / 65535.0; }

EncodedMel MelToImage(const MelSpectrogram& mel, double min_db, double max_db,
                      int pad_multiple) {
  Require(pad_multiple > 0, ErrorCode::kInvalidArgument, "pad_multiple must be positive");
  Require(mel.frames() >= 1 && mel.n_mels() >= 1, ErrorCode::kInvalidArgument,
          "mel spectrogram is empty");
  auto [unit, meta] = Normalize(mel, min_db, max_db);

  const int frames = static_cast<int>(mel.frames());
  const int height = static_cast<int>(mel.n_mels());
  EncodedMel out;
  out.meta = meta;
  out.image.width = (frames + pad_multiple - 1) / pad_multiple * pad_multiple;
  out.image.height = height;
  out.image.pixels.assign(static_cast<std::size_t>(out.image.width) * height, 0);
  for (int bin = 0; bin < height; ++bin) {
    const int row = height - 1 - bin;
    for (int t = 0; t < frames; ++t) {
      out.image.at(row, t) = Quantize16(unit(static_cast<std::size_t>(bin),
                                             static_cast<std::size_t>(t)));
    }
  }
  return out;
}

MelSpectrogram ImageToMel(const GrayImage& image, const NormMeta& meta) {
  Require(meta.min_db < meta.max_db, ErrorCode::kInvalidArgument, "meta requires min_db < max_db");
  Require(meta.orig_frames >= 1, ErrorCode::kInvalidArgument, "meta.orig_frames must be >= 1");
  Require(meta.orig_frames <= image.width, ErrorCode::kShapeMismatch,
          "meta.orig_frames (" + std::to_string(meta.orig_frames) +
              ") exceeds image width (" + std::to_string(image.width) + ")");
  Require(meta.n_mels == 0 || meta.n_mels == image.height, ErrorCode::kShapeMismatch,
          "meta.n_mels does not match image height");
  Require(image.pixels.size() == static_cast<std::size_t>(image.width) * image.height,
          ErrorCode::kShapeMismatch, "pixel count does not match image dimensions");

  MelSpectrogram mel;
  const int height = image.height;
  mel.values = Matrix(static_cast<std::size_t>(height), static_cast<std::size_t>(meta.orig_frames));
  const double range = meta.max_db - meta.min_db;
  for (int bin = 0; bin < height; ++bin) {
    const int row = height - 1 - bin;
    for (int t = 0; t < meta.orig_frames; ++t) {
      mel.values(static_cast<std::size_t>(bin), static_cast<std::size_t>(t)) =
          meta.min_db + Dequantize16(image.at(row, t)) * range;
    }
  }
  mel.mel.n_mels = height;
  if (meta.sample_rate > 0) {
    mel.mel.sample_rate = meta.sample_rate;
    mel.mel.f_max = meta.sample_rate / 2.0;
  }
  if (meta.hop_length > 0) mel.stft.hop_length = meta.hop_length;
  mel.mel.floor_db = meta.min_db;
  return mel;
}

std::filesystem::path SidecarPath(const std::filesystem::path& image_path) {
  auto p = image_path;
  p.replace_extension(".meta");
  return p;
}

void WriteSidecar(const NormMeta& meta, const std::filesystem::path& path) {
  std::ostringstream os;
  os.precision(17);
  os << "min_db=" << meta.min_db << "\n"
     << "max_db=" << meta.max_db << "\n"
     << "orig_frames=" << meta.orig_frames << "\n"
     << "n_mels=" << meta.n_mels << "\n"
     << "sample_rate=" << meta.sample_rate << "\n"
     << "hop_length=" << meta.hop_length << "\n";
  WriteFileBytes(path, os.str());
}

NormMeta ReadSidecar(const std::filesystem::path& path) {
  std::istringstream is(ReadFileBytes(path));
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    Require(eq != std::string::npos, ErrorCode::kMalformedFile,
            "sidecar line without '=': " + line + " (" + path.string() + ")");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    Require(it != kv.end(), ErrorCode::kMalformedFile,
            "sidecar missing key '" + key + "' (" + path.string() + ")");
    return it->second;
  };
  auto as_double = [&](const std::string& key) {
    try {
      return std::stod(get(key));
    } catch (const std::logic_error&) {
      Fail(ErrorCode::kMalformedFile, "sidecar value for '" + key + "' is not a number");
    }
  };
  auto as_int = [&](const std::string& key) {
    const std::string& s = get(key);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    Require(ec == std::errc() && ptr == s.data() + s.size(), ErrorCode::kMalformedFile,
            "sidecar value for '" + key + "' is not an integer");
    return v;
  };
  NormMeta meta;
  meta.min_db = as_double("min_db");
  meta.max_db = as_double("max_db");
  meta.orig_frames = as_int("orig_frames");
  meta.n_mels = as_int("n_mels");
  meta.sample_rate = as_int("sample_rate");
  meta.hop_length = as_int("hop_length");
  Require(meta.min_db < meta.max_db && meta.orig_frames >= 1, ErrorCode::kMalformedFile,
          "sidecar violates min_db < max_db or orig_frames >= 1 (" + path.string() + ")");
  return meta;
}

void WriteEncoded(const EncodedMel& encoded, const std::filesystem::path& png_path) {
  WritePng(encoded.image, png_path);
  WriteSidecar(encoded.meta, SidecarPath(png_path));
}

EncodedMel ReadEncoded(const std::filesystem::path& png_path) {
  EncodedMel out;
  out.image = ReadPng(png_path);
  out.meta = ReadSidecar(SidecarPath(png_path));
  Require(out.meta.orig_frames <= out.image.width &&
              (out.meta.n_mels == 0 || out.meta.n_mels == out.image.height),
          ErrorCode::kShapeMismatch,
          "sidecar does not match image dimensions (" + png_path.string() + ")");
  return out;
}

}  // namespace melfix
