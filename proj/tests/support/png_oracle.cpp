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


#include "png_oracle.hpp"

#include <zlib.h>

#include <cstdlib>
#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace melfix::testing {

namespace {

const unsigned char kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void Be32(std::string& s, uint32_t v) {
  for (int i = 3; i >= 0; --i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t Be32(const unsigned char* p) {
  return (uint32_t{p[0]} << 24) | (uint32_t{p[1]} << 16) | (uint32_t{p[2]} << 8) | p[3];
}

void Chunk(std::string& out, const char* type, const std::string& body) {
  Be32(out, static_cast<uint32_t>(body.size()));
  std::string tb = std::string(type, 4) + body;
  out += tb;
  Be32(out, static_cast<uint32_t>(
                crc32(0, reinterpret_cast<const Bytef*>(tb.data()), static_cast<uInt>(tb.size()))));
}

int Channels(int color_type) {
  switch (color_type) {
    case 0: return 1;
    case 2: return 3;
    case 4: return 2;
    case 6: return 4;
    default: return 1;
  }
}

std::size_t Stride(const RawPng& p) {
  return (static_cast<std::size_t>(Channels(p.color_type)) * p.bit_depth * p.width + 7) / 8;
}

std::size_t Bpp(const RawPng& p) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(Channels(p.color_type)) * p.bit_depth / 8);
}

int Paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

int Predict(int filter, int a, int b, int c) {
  switch (filter) {
    case 0: return 0;
    case 1: return a;
    case 2: return b;
    case 3: return (a + b) / 2;
    case 4: return Paeth(a, b, c);
  }
  throw std::runtime_error("bad filter");
}

}  // namespace

std::string OracleEncode(const RawPng& png, int filter) {
  const std::size_t stride = Stride(png);
  const std::size_t bpp = Bpp(png);
  std::string raw;
  for (int y = 0; y < png.height; ++y) {
    raw.push_back(static_cast<char>(filter));
    const uint8_t* cur = png.rows.data() + y * stride;
    const uint8_t* prev = y > 0 ? cur - stride : nullptr;
    for (std::size_t x = 0; x < stride; ++x) {
      const int a = x >= bpp ? cur[x - bpp] : 0;
      const int b = prev ? prev[x] : 0;
      const int c = prev && x >= bpp ? prev[x - bpp] : 0;
      raw.push_back(static_cast<char>((cur[x] - Predict(filter, a, b, c)) & 0xff));
    }
  }
  uLongf n = compressBound(static_cast<uLong>(raw.size()));
  std::string z(n, '\0');
  compress2(reinterpret_cast<Bytef*>(z.data()), &n, reinterpret_cast<const Bytef*>(raw.data()),
            static_cast<uLong>(raw.size()), 9);
  z.resize(n);
  std::string ihdr;
  Be32(ihdr, static_cast<uint32_t>(png.width));
  Be32(ihdr, static_cast<uint32_t>(png.height));
  ihdr += static_cast<char>(png.bit_depth);
  ihdr += static_cast<char>(png.color_type);
  ihdr += std::string(3, '\0');
  std::string out(reinterpret_cast<const char*>(kSig), 8);
  Chunk(out, "IHDR", ihdr);
  // Split the data over two IDAT chunks to exercise concatenation.
  const std::size_t half = z.size() / 2;
  Chunk(out, "IDAT", z.substr(0, half));
  Chunk(out, "IDAT", z.substr(half));
  Chunk(out, "IEND", "");
  return out;
}

RawPng OracleDecode(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8 || std::memcmp(p, kSig, 8) != 0) throw std::runtime_error("signature");
  RawPng png;
  std::string idat;
  for (std::size_t pos = 8; pos + 12 <= bytes.size();) {
    const uint32_t len = Be32(p + pos);
    const std::string type(bytes.data() + pos + 4, 4);
    const unsigned char* body = p + pos + 8;
    if (crc32(0, p + pos + 4, len + 4) != Be32(body + len)) throw std::runtime_error("crc");
    if (type == "IHDR") {
      png.width = static_cast<int>(Be32(body));
      png.height = static_cast<int>(Be32(body + 4));
      png.bit_depth = body[8];
      png.color_type = body[9];
      if (body[12] != 0) throw std::runtime_error("interlaced");
    } else if (type == "IDAT") {
      idat.append(reinterpret_cast<const char*>(body), len);
    } else if (type == "IEND") {
      break;
    }
    pos += 12 + len;
  }
  const std::size_t stride = Stride(png);
  const std::size_t bpp = Bpp(png);
  uLongf n = (stride + 1) * static_cast<std::size_t>(png.height);
  std::string raw(n, '\0');
  if (uncompress(reinterpret_cast<Bytef*>(raw.data()), &n,
                 reinterpret_cast<const Bytef*>(idat.data()), static_cast<uLong>(idat.size())) !=
          Z_OK ||
      n != raw.size()) {
    throw std::runtime_error("inflate");
  }
  png.rows.assign(stride * static_cast<std::size_t>(png.height), 0);
  for (int y = 0; y < png.height; ++y) {
    const int filter = static_cast<uint8_t>(raw[y * (stride + 1)]);
    const auto* src = reinterpret_cast<const uint8_t*>(raw.data()) + y * (stride + 1) + 1;
    uint8_t* cur = png.rows.data() + y * stride;
    const uint8_t* prev = y > 0 ? cur - stride : nullptr;
    for (std::size_t x = 0; x < stride; ++x) {
      const int a = x >= bpp ? cur[x - bpp] : 0;
      const int b = prev ? prev[x] : 0;
      const int c = prev && x >= bpp ? prev[x - bpp] : 0;
      cur[x] = static_cast<uint8_t>(src[x] + Predict(filter, a, b, c));
    }
  }
  return png;
}

}  // namespace melfix::testing
