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


#ifndef MELFIX_SRC_CORE_KV_HPP_
#define MELFIX_SRC_CORE_KV_HPP_

#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "melfix/error.hpp"

namespace melfix::kv {

inline std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

// "key=value" per line; blank lines and lines starting with '#' are skipped.
inline std::vector<std::pair<std::string, std::string>> Parse(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t nl = text.find('\n');
    std::string_view line = Trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    Require(eq != std::string_view::npos, ErrorCode::kMalformedFile,
            "line " + std::to_string(line_no) + ": expected key=value");
    out.emplace_back(std::string(Trim(line.substr(0, eq))), std::string(Trim(line.substr(eq + 1))));
  }
  return out;
}

inline double ToDouble(const std::string& key, const std::string& value) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  Require(ec == std::errc() && ptr == value.data() + value.size(), ErrorCode::kInvalidArgument,
          "bad number for " + key + ": '" + value + "'");
  return v;
}

inline long long ToInt(const std::string& key, const std::string& value) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  Require(ec == std::errc() && ptr == value.data() + value.size(), ErrorCode::kInvalidArgument,
          "bad integer for " + key + ": '" + value + "'");
  return v;
}

inline bool ToBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  Fail(ErrorCode::kInvalidArgument, "bad boolean for " + key + ": '" + value + "'");
}

// Shortest text that parses back to the same double.
inline std::string FormatDouble(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace melfix::kv

#endif  // MELFIX_SRC_CORE_KV_HPP_
