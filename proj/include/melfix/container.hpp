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

// Named-tensor binary container used for checkpoints and mel feature files.
//
//   "MELGANCK"  u32 version  u32 record_count
//   per record: u32 name_len, name bytes, u8 dtype, u32 ndim, u64 dims[ndim],
//               u64 byte_len, raw little-endian payload
//
// dtype: 0 = f32, 1 = f64, 2 = i64, 3 = utf-8 text (ndim 1, dims = {bytes}).

#ifndef MELFIX_CONTAINER_HPP_
#define MELFIX_CONTAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "melfix/dsp.hpp"
#include "melfix/matrix.hpp"
#include "melfix/tensor.hpp"

namespace melfix {

inline constexpr char kContainerMagic[8] = {'M', 'E', 'L', 'G', 'A', 'N', 'C', 'K'};
inline constexpr uint32_t kContainerVersion = 1;

enum class DType : uint8_t { kF32 = 0, kF64 = 1, kI64 = 2, kText = 3 };

struct Record {
  std::string name;
  DType dtype = DType::kF64;
  std::vector<uint64_t> dims;
  std::string payload;

  friend bool operator==(const Record&, const Record&) = default;
};

class Container {
 public:
  void Add(Record record);

  template <class T>
  void AddTensor(const std::string& name, const Tensor<T>& t);
  void AddMatrix(const std::string& name, const Matrix& m);
  void AddInts(const std::string& name, const std::vector<int64_t>& values);
  void AddText(const std::string& name, std::string_view text);

  bool Contains(const std::string& name) const;
  const Record& Get(const std::string& name) const;

  template <class T>
  Tensor<T> GetTensor(const std::string& name) const;
  Matrix GetMatrix(const std::string& name) const;
  std::vector<int64_t> GetInts(const std::string& name) const;
  std::string GetText(const std::string& name) const;

  const std::vector<Record>& records() const { return records_; }

  friend bool operator==(const Container&, const Container&) = default;

 private:
  std::vector<Record> records_;
};

std::string Serialize(const Container& c);
// Throws BadMagic, UnsupportedVersion, or TruncatedData.
Container Deserialize(const std::string& bytes);

void WriteContainer(const Container& c, const std::filesystem::path& path);
Container ReadContainer(const std::filesystem::path& path);

// Mel feature files: record "mel" (f64, [n_mels, frames]) plus a text
// record "config" holding the STFT/mel settings and source id.
void SaveMelFeatures(const MelSpectrogram& mel, const std::filesystem::path& path);
MelSpectrogram LoadMelFeatures(const std::filesystem::path& path);

}  // namespace melfix

#endif  // MELFIX_CONTAINER_HPP_
