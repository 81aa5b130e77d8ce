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


#include "melfix/container.hpp"

#include <bit>
#include <cstring>
#include <type_traits>

#include "kv.hpp"
#include "melfix/error.hpp"
#include "melfix/png.hpp"

static_assert(std::endian::native == std::endian::little,
              "container payloads are written in host order");

namespace melfix {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "Ok";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kFileNotFound: return "FileNotFound";
    case ErrorCode::kEmptyAudio: return "EmptyAudio";
    case ErrorCode::kNonPcmEncoding: return "NonPcmEncoding";
    case ErrorCode::kChannelCount: return "ChannelCount";
    case ErrorCode::kTruncatedData: return "TruncatedData";
    case ErrorCode::kMalformedFile: return "MalformedFile";
    case ErrorCode::kDegenerateFilter: return "DegenerateFilter";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kUnsupportedDepth: return "UnsupportedDepth";
    case ErrorCode::kUnsupportedColorType: return "UnsupportedColorType";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kUnmatchedPair: return "UnmatchedPair";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kSampleRateMismatch: return "SampleRateMismatch";
    case ErrorCode::kUnknownKey: return "UnknownKey";
    case ErrorCode::kEmptySource: return "EmptySource";
    case ErrorCode::kInternal: return "Internal";
  }
  return "Unknown";
}

namespace {

template <class T>
constexpr DType DTypeOf() {
  if constexpr (std::is_same_v<T, float>) return DType::kF32;
  else if constexpr (std::is_same_v<T, double>) return DType::kF64;
  else return DType::kI64;
}

template <class T>
std::string Bytes(const T* data, std::size_t n) {
  return std::string(reinterpret_cast<const char*>(data), n * sizeof(T));
}

template <class T>
std::vector<T> FromBytes(const Record& r) {
  Require(r.payload.size() % sizeof(T) == 0, ErrorCode::kMalformedFile,
          "record " + r.name + ": payload size not a multiple of element size");
  std::vector<T> out(r.payload.size() / sizeof(T));
  if (!out.empty()) std::memcpy(out.data(), r.payload.data(), r.payload.size());
  return out;
}

std::size_t ElementSize(DType t) {
  switch (t) {
    case DType::kF32: return 4;
    case DType::kF64: return 8;
    case DType::kI64: return 8;
    case DType::kText: return 1;
  }
  Fail(ErrorCode::kMalformedFile, "unknown dtype tag " + std::to_string(static_cast<int>(t)));
}

void Expect(const Record& r, DType t) {
  Require(r.dtype == t, ErrorCode::kMalformedFile,
          "record " + r.name + ": unexpected dtype " + std::to_string(static_cast<int>(r.dtype)));
}

template <class T>
void Put(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T Get() {
    T v;
    std::memcpy(&v, Take(sizeof v), sizeof v);
    return v;
  }
  const char* Take(uint64_t n) {
    Require(n <= bytes_.size() - pos_, ErrorCode::kTruncatedData,
            "container truncated at byte " + std::to_string(pos_));
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Container::Add(Record record) {
  Require(!Contains(record.name), ErrorCode::kInvalidArgument,
          "duplicate record name " + record.name);
  uint64_t count = 1;
  for (uint64_t d : record.dims) count *= d;
  Require(count * ElementSize(record.dtype) == record.payload.size(), ErrorCode::kShapeMismatch,
          "record " + record.name + ": payload does not match shape");
  records_.push_back(std::move(record));
}

template <class T>
void Container::AddTensor(const std::string& name, const Tensor<T>& t) {
  const Shape& s = t.shape();
  Add({name, DTypeOf<T>(),
       {static_cast<uint64_t>(s.n), static_cast<uint64_t>(s.c), static_cast<uint64_t>(s.h),
        static_cast<uint64_t>(s.w)},
       Bytes(t.data(), t.size())});
}

void Container::AddMatrix(const std::string& name, const Matrix& m) {
  Add({name, DType::kF64, {m.rows(), m.cols()}, Bytes(m.data().data(), m.size())});
}

void Container::AddInts(const std::string& name, const std::vector<int64_t>& values) {
  Add({name, DType::kI64, {values.size()}, Bytes(values.data(), values.size())});
}

void Container::AddText(const std::string& name, std::string_view text) {
  Add({name, DType::kText, {text.size()}, std::string(text)});
}

bool Container::Contains(const std::string& name) const {
  for (const auto& r : records_) {
    if (r.name == name) return true;
  }
  return false;
}

const Record& Container::Get(const std::string& name) const {
  for (const auto& r : records_) {
    if (r.name == name) return r;
  }
  Fail(ErrorCode::kMalformedFile, "missing record " + name);
}

template <class T>
Tensor<T> Container::GetTensor(const std::string& name) const {
  const Record& r = Get(name);
  Expect(r, DTypeOf<T>());
  Require(r.dims.size() == 4, ErrorCode::kMalformedFile, "record " + name + ": expected 4 dims");
  Shape s{static_cast<int>(r.dims[0]), static_cast<int>(r.dims[1]), static_cast<int>(r.dims[2]),
          static_cast<int>(r.dims[3])};
  return Tensor<T>(s, FromBytes<T>(r));
}

Matrix Container::GetMatrix(const std::string& name) const {
  const Record& r = Get(name);
  Expect(r, DType::kF64);
  Require(r.dims.size() == 2, ErrorCode::kMalformedFile, "record " + name + ": expected 2 dims");
  Matrix m(r.dims[0], r.dims[1]);
  m.data() = FromBytes<double>(r);
  return m;
}

std::vector<int64_t> Container::GetInts(const std::string& name) const {
  const Record& r = Get(name);
  Expect(r, DType::kI64);
  return FromBytes<int64_t>(r);
}

std::string Container::GetText(const std::string& name) const {
  const Record& r = Get(name);
  Expect(r, DType::kText);
  return r.payload;
}

template void Container::AddTensor(const std::string&, const Tensor<float>&);
template void Container::AddTensor(const std::string&, const Tensor<double>&);
template Tensor<float> Container::GetTensor(const std::string&) const;
template Tensor<double> Container::GetTensor(const std::string&) const;

std::string Serialize(const Container& c) {
  std::string out(kContainerMagic, sizeof kContainerMagic);
  Put<uint32_t>(out, kContainerVersion);
  Put<uint32_t>(out, static_cast<uint32_t>(c.records().size()));
  for (const Record& r : c.records()) {
    Put<uint32_t>(out, static_cast<uint32_t>(r.name.size()));
    out += r.name;
    Put<uint8_t>(out, static_cast<uint8_t>(r.dtype));
    Put<uint32_t>(out, static_cast<uint32_t>(r.dims.size()));
    for (uint64_t d : r.dims) Put<uint64_t>(out, d);
    Put<uint64_t>(out, r.payload.size());
    out += r.payload;
  }
  return out;
}

Container Deserialize(const std::string& bytes) {
  Require(bytes.size() >= sizeof kContainerMagic &&
              std::memcmp(bytes.data(), kContainerMagic, sizeof kContainerMagic) == 0,
          ErrorCode::kBadMagic, "not a MELGANCK container");
  Reader in(bytes);
  in.Take(sizeof kContainerMagic);
  const auto version = in.Get<uint32_t>();
  Require(version == kContainerVersion, ErrorCode::kUnsupportedVersion,
          "container version " + std::to_string(version) + " (supported: " +
              std::to_string(kContainerVersion) + ")");
  const auto count = in.Get<uint32_t>();
  Container c;
  for (uint32_t i = 0; i < count; ++i) {
    Record r;
    const auto name_len = in.Get<uint32_t>();
    r.name.assign(in.Take(name_len), name_len);
    const auto tag = in.Get<uint8_t>();
    Require(tag <= 3, ErrorCode::kMalformedFile, "record " + r.name + ": unknown dtype tag");
    r.dtype = static_cast<DType>(tag);
    const auto ndim = in.Get<uint32_t>();
    Require(ndim <= 8, ErrorCode::kMalformedFile, "record " + r.name + ": too many dims");
    for (uint32_t d = 0; d < ndim; ++d) r.dims.push_back(in.Get<uint64_t>());
    const auto len = in.Get<uint64_t>();
    r.payload.assign(in.Take(len), len);
    c.Add(std::move(r));
  }
  Require(in.done(), ErrorCode::kMalformedFile, "trailing bytes after last record");
  return c;
}

void WriteContainer(const Container& c, const std::filesystem::path& path) {
  WriteFileBytes(path, Serialize(c));
}

Container ReadContainer(const std::filesystem::path& path) {
  try {
    return Deserialize(ReadFileBytes(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kFileNotFound || e.code() == ErrorCode::kIoError) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void SaveMelFeatures(const MelSpectrogram& mel, const std::filesystem::path& path) {
  std::string cfg;
  auto line = [&](const char* k, const std::string& v) { cfg += std::string(k) + "=" + v + "\n"; };
  line("win_length", std::to_string(mel.stft.win_length));
  line("hop_length", std::to_string(mel.stft.hop_length));
  line("n_fft", std::to_string(mel.stft.n_fft));
  line("center", mel.stft.center ? "true" : "false");
  line("n_mels", std::to_string(mel.mel.n_mels));
  line("f_min", kv::FormatDouble(mel.mel.f_min));
  line("f_max", kv::FormatDouble(mel.mel.f_max));
  line("sample_rate", std::to_string(mel.mel.sample_rate));
  line("floor_db", kv::FormatDouble(mel.mel.floor_db));
  line("source_id", mel.source_id);
  Container c;
  c.AddMatrix("mel", mel.values);
  c.AddText("config", cfg);
  WriteContainer(c, path);
}

MelSpectrogram LoadMelFeatures(const std::filesystem::path& path) {
  const Container c = ReadContainer(path);
  MelSpectrogram mel;
  mel.values = c.GetMatrix("mel");
  for (const auto& [k, v] : kv::Parse(c.GetText("config"))) {
    if (k == "win_length") mel.stft.win_length = static_cast<int>(kv::ToInt(k, v));
    else if (k == "hop_length") mel.stft.hop_length = static_cast<int>(kv::ToInt(k, v));
    else if (k == "n_fft") mel.stft.n_fft = static_cast<int>(kv::ToInt(k, v));
    else if (k == "center") mel.stft.center = kv::ToBool(k, v);
    else if (k == "n_mels") mel.mel.n_mels = static_cast<int>(kv::ToInt(k, v));
    else if (k == "f_min") mel.mel.f_min = kv::ToDouble(k, v);
    else if (k == "f_max") mel.mel.f_max = kv::ToDouble(k, v);
    else if (k == "sample_rate") mel.mel.sample_rate = static_cast<int>(kv::ToInt(k, v));
    else if (k == "floor_db") mel.mel.floor_db = kv::ToDouble(k, v);
    else if (k == "source_id") mel.source_id = v;
    else Fail(ErrorCode::kUnknownKey, path.string() + ": unknown config key " + k);
  }
  Require(mel.values.rows() == static_cast<std::size_t>(mel.mel.n_mels), ErrorCode::kShapeMismatch,
          path.string() + ": mel rows disagree with n_mels");
  return mel;
}

}  // namespace melfix
