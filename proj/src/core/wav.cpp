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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>

#include "melfix/dsp.hpp"
#include "melfix/error.hpp"

namespace melfix {
namespace {

uint16_t ReadLe16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }
uint32_t ReadLe32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void PutLe16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
void PutLe32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

AudioBuffer ReadWav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorCode::kFileNotFound,
          "cannot open wav file: " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());

  const std::string where = " (" + path.string() + ")";
  Require(bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
              std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
          ErrorCode::kMalformedFile, "not a RIFF/WAVE file" + where);

  struct Format {
    uint16_t tag;
    uint16_t channels;
    uint32_t rate;
    uint16_t bits;
  };
  std::optional<Format> fmt;
  std::optional<std::pair<std::size_t, std::size_t>> data;  // offset, size

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* hdr = bytes.data() + pos;
    const uint32_t size = ReadLe32(hdr + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      Require(size >= 16 && body + 16 <= bytes.size(), ErrorCode::kMalformedFile,
              "short fmt chunk" + where);
      Format f{ReadLe16(bytes.data() + body), ReadLe16(bytes.data() + body + 2),
               ReadLe32(bytes.data() + body + 4), ReadLe16(bytes.data() + body + 14)};
      if (f.tag == kFormatExtensible && size >= 40 && body + 40 <= bytes.size()) {
        // The sub-format GUID starts with the plain format tag.
        f.tag = ReadLe16(bytes.data() + body + 24);
      }
      fmt = f;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      Require(body + size <= bytes.size(), ErrorCode::kTruncatedData,
              "data chunk declares " + std::to_string(size) + " bytes but only " +
                  std::to_string(bytes.size() - body) + " remain" + where);
      data = std::make_pair(body, static_cast<std::size_t>(size));
      break;
    }
    pos = body + size + (size & 1u);
  }

  Require(fmt.has_value(), ErrorCode::kMalformedFile, "missing fmt chunk" + where);
  Require(fmt->tag == kFormatPcm && fmt->bits == 16, ErrorCode::kNonPcmEncoding,
          "only 16-bit PCM is supported (format tag " + std::to_string(fmt->tag) +
              ", " + std::to_string(fmt->bits) + " bits)" + where);
  Require(fmt->channels == 1, ErrorCode::kChannelCount,
          "expected mono audio, got " + std::to_string(fmt->channels) + " channels" +
              where);
  Require(fmt->rate > 0, ErrorCode::kMalformedFile, "zero sample rate" + where);
  Require(data.has_value(), ErrorCode::kTruncatedData, "missing data chunk" + where);
  Require(data->second % 2 == 0, ErrorCode::kTruncatedData,
          "data chunk ends mid-sample" + where);
  Require(data->second > 0, ErrorCode::kEmptyAudio, "no samples" + where);

  AudioBuffer audio;
  audio.sample_rate = static_cast<int>(fmt->rate);
  const std::size_t n = data->second / 2;
  audio.samples.resize(n);
  const uint8_t* p = bytes.data() + data->first;
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<int16_t>(ReadLe16(p + 2 * i));
    audio.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return audio;
}

void WriteWav(const AudioBuffer& audio, const std::filesystem::path& path) {
  Require(audio.sample_rate > 0, ErrorCode::kInvalidArgument, "sample rate must be positive");
  const auto n = static_cast<uint32_t>(audio.samples.size());
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  PutLe32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  PutLe32(out, 16);
  PutLe16(out, kFormatPcm);
  PutLe16(out, 1);
  PutLe32(out, static_cast<uint32_t>(audio.sample_rate));
  PutLe32(out, static_cast<uint32_t>(audio.sample_rate) * 2);
  PutLe16(out, 2);
  PutLe16(out, 16);
  out += "data";
  PutLe32(out, 2 * n);
  for (double s : audio.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    PutLe16(out, static_cast<uint16_t>(v));
  }
  std::ofstream file(path, std::ios::binary);
  Require(static_cast<bool>(file), ErrorCode::kIoError, "cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  Require(static_cast<bool>(file), ErrorCode::kIoError, "short write to " + path.string());
}

}  // namespace melfix
