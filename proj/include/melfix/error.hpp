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

#ifndef MELFIX_ERROR_HPP_
#define MELFIX_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace melfix {

// Every failure raised by the core carries one of these codes. The numeric
// values are part of the C ABI (see melfix.h) and must not be reordered.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kIoError = 2,
  kFileNotFound = 3,
  kEmptyAudio = 4,
  kNonPcmEncoding = 5,
  kChannelCount = 6,
  kTruncatedData = 7,
  kMalformedFile = 8,
  kDegenerateFilter = 9,
  kNonFinite = 10,
  kShapeMismatch = 11,
  kUnsupportedDepth = 12,
  kUnsupportedColorType = 13,
  kBadMagic = 14,
  kUnsupportedVersion = 15,
  kUnmatchedPair = 16,
  kNonFiniteGradient = 17,
  kNonFiniteLoss = 18,
  kSampleRateMismatch = 19,
  kUnknownKey = 20,
  kEmptySource = 21,
  kInternal = 99,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void Require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) Fail(code, message);
}

}  // namespace melfix

#endif  // MELFIX_ERROR_HPP_
