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


// Minimal PNG reader/writer written directly against the file format, used
// as an independent check on the library codec.

#ifndef MELFIX_TESTS_SUPPORT_PNG_ORACLE_HPP_
#define MELFIX_TESTS_SUPPORT_PNG_ORACLE_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace melfix::testing {

struct RawPng {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::vector<uint8_t> rows;  // unfiltered scanlines, no filter bytes
};

// Encodes `png.rows`, applying `filter` (0..4) to every scanline.
std::string OracleEncode(const RawPng& png, int filter = 0);
// Decodes non-interlaced PNGs with any filter types.
RawPng OracleDecode(const std::string& bytes);

}  // namespace melfix::testing

#endif  // MELFIX_TESTS_SUPPORT_PNG_ORACLE_HPP_
