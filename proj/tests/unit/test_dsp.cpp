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


#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include "corpus.hpp"
#include "oracles.hpp"
#include "test_util.hpp"
#include "doctest.h"
#include "melfix/dsp.hpp"
#include "melfix/error.hpp"

using namespace melfix;
using melfix::testing::CodeOf;
using melfix::testing::OracleFilterbank;
using melfix::testing::OracleStft;

namespace {

// Hand-built RIFF header so the reader is checked against the format, not
// against our own writer.
std::string WavBytes(const std::vector<int16_t>& pcm, int rate, int channels = 1, int format = 1,
                     int bits = 16, int64_t data_len_override = -1) {
  auto u32 = [](std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  auto u16 = [](std::string& s, uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>(v >> 8));
  };
  std::string data(reinterpret_cast<const char*>(pcm.data()), pcm.size() * 2);
  std::string fmt;
  u16(fmt, static_cast<uint16_t>(format));
  u16(fmt, static_cast<uint16_t>(channels));
  u32(fmt, static_cast<uint32_t>(rate));
  u32(fmt, static_cast<uint32_t>(rate * channels * bits / 8));
  u16(fmt, static_cast<uint16_t>(channels * bits / 8));
  u16(fmt, static_cast<uint16_t>(bits));
  std::string body = "WAVE";
  body += "fmt ";
  u32(body, static_cast<uint32_t>(fmt.size()));
  body += fmt;
  body += "data";
  u32(body, static_cast<uint32_t>(data_len_override >= 0 ? data_len_override : data.size()));
  body += data;
  std::string out = "RIFF";
  u32(out, static_cast<uint32_t>(body.size()));
  return out + body;
}

std::filesystem::path WriteBytes(const std::string& name, const std::string& bytes) {
  static const auto dir = testing::ScratchDir("dsp");
  const auto path = dir / name;
  std::ofstream(path, std::ios::binary) << bytes;
  return path;
}

}  // namespace

TEST_SUITE("dsp") {

TEST_CASE("read_wav scales 16-bit PCM by 1/32768") {
  const auto path = WriteBytes("scale.wav", WavBytes({0, 16384, -32768}, 16000));
  const AudioBuffer a = ReadWav(path);
  REQUIRE(a.samples.size() == 3);
  CHECK(a.samples[0] == 0.0);
  CHECK(a.samples[1] == 0.5);
  CHECK(a.samples[2] == -1.0);
  CHECK(a.sample_rate == 16000);
}

TEST_CASE("read_wav reports the header sample rate") {
  CHECK(ReadWav(WriteBytes("r48.wav", WavBytes({1, 2}, 48000))).sample_rate == 48000);
}

TEST_CASE("read_wav errors") {
  CHECK(CodeOf([] { ReadWav("/nonexistent/x.wav"); }) == ErrorCode::kFileNotFound);
  CHECK(CodeOf([] { ReadWav(WriteBytes("empty.wav", WavBytes({}, 16000))); }) ==
        ErrorCode::kEmptyAudio);
  CHECK(CodeOf([] { ReadWav(WriteBytes("float.wav", WavBytes({1, 2}, 16000, 1, 3, 32))); }) ==
        ErrorCode::kNonPcmEncoding);
  CHECK(CodeOf([] { ReadWav(WriteBytes("8bit.wav", WavBytes({1, 2}, 16000, 1, 1, 8))); }) ==
        ErrorCode::kNonPcmEncoding);
  CHECK(CodeOf([] { ReadWav(WriteBytes("stereo.wav", WavBytes({1, 2, 3, 4}, 16000, 2))); }) ==
        ErrorCode::kChannelCount);
  CHECK(CodeOf([] {
          ReadWav(WriteBytes("trunc.wav", WavBytes({1, 2, 3}, 16000, 1, 1, 16, 600)));
        }) == ErrorCode::kTruncatedData);
  CHECK(CodeOf([] { ReadWav(WriteBytes("junk.wav", "not a wav file at all")); }) ==
        ErrorCode::kMalformedFile);
}

TEST_CASE("write_wav then read_wav restores quantized samples") {
  AudioBuffer a{{0.0, 0.25, -0.5, 0.999}, 22050};
  const auto path = testing::ScratchDir("wavrt") / "a.wav";
  WriteWav(a, path);
  const AudioBuffer b = ReadWav(path);
  CHECK(b.sample_rate == 22050);
  REQUIRE(b.samples.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(b.samples[i] - a.samples[i]) <= 1.0 / 32768);
}

TEST_CASE("hann_window closed forms") {
  const auto w4 = HannWindow(4);
  REQUIRE(w4.size() == 4);
  CHECK(w4[0] == doctest::Approx(0.0));
  CHECK(w4[1] == doctest::Approx(0.5));
  CHECK(w4[2] == doctest::Approx(1.0));
  CHECK(w4[3] == doctest::Approx(0.5));
  CHECK(HannWindow(1) == std::vector<double>{0.0});
  for (int n : {4, 10, 800, 2400}) {
    double s = 0;
    for (double v : HannWindow(n)) s += v;
    CHECK(s == doctest::Approx(n / 2.0).epsilon(1e-12));
  }
  CHECK(CodeOf([] { HannWindow(0); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("stft framing rule and zero signal") {
  AudioBuffer z{std::vector<double>(4800, 0.0), 48000};
  const Matrix m = StftMagnitude(z, {2400, 600, 4096, true});
  CHECK(m.cols() == 9);
  CHECK(m.rows() == 2049);
  for (double v : m.data()) CHECK(v == 0.0);
  for (std::size_t len : {1u, 199u, 200u, 201u, 16000u}) {
    CHECK(FrameCount(len, 200) == 1 + len / 200);
  }
}

TEST_CASE("stft of a constant signal has DC = sum(window)") {
  AudioBuffer ones{std::vector<double>(4000, 1.0), 16000};
  const Matrix m = StftMagnitude(ones, {800, 200, 1024, true});
  for (std::size_t t = 0; t < m.cols(); ++t) CHECK(m(0, t) == doctest::Approx(400.0).epsilon(1e-12));
}

TEST_CASE("stft matches the naive DFT oracle") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  const StftConfig cfg{60, 16, 64, true};
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x(97 + trial * 31);
    for (double& v : x) v = u(rng);
    const Matrix got = StftMagnitude({x, 16000}, cfg);
    const Matrix want = OracleStft(x, cfg);
    REQUIRE(got.rows() == want.rows());
    REQUIRE(got.cols() == want.cols());
    double max_err = 0, max_ref = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      max_err = std::max(max_err, std::abs(got.data()[i] - want.data()[i]));
      max_ref = std::max(max_ref, std::abs(want.data()[i]));
    }
    CHECK(max_err / max_ref < 1e-10);
  }
}

TEST_CASE("stft rejects bad configs and empty audio") {
  AudioBuffer a{std::vector<double>(100, 0.1), 16000};
  CHECK(CodeOf([&] { StftMagnitude(a, {800, 900, 1024, true}); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([&] { StftMagnitude(a, {800, 200, 1000, true}); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([&] { StftMagnitude(a, {2048, 200, 1024, true}); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { StftMagnitude({{}, 16000}, {800, 200, 1024, true}); }) ==
        ErrorCode::kEmptyAudio);
}

TEST_CASE("hz/mel conversions") {
  CHECK(HzToMel(0) == 0.0);
  CHECK(HzToMel(700) == doctest::Approx(781.17).epsilon(1e-5));
  CHECK(HzToMel(700) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-14));
  for (double f : {100.0, 1000.0, 8000.0}) {
    CHECK(std::abs(MelToHz(HzToMel(f)) - f) / f < 1e-9);
  }
  double prev = -1;
  for (double f = 0; f <= 24000; f += 37.5) {
    const double m = HzToMel(f);
    CHECK(m > prev);
    prev = m;
  }
  CHECK(CodeOf([] { HzToMel(-1); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { MelToHz(-1); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("mel filterbank tiny case equals hand-evaluated triangles") {
  const Matrix fb = MelFilterbank({2, 0.0, 4000.0, 8000, -100.0}, 8);
  REQUIRE(fb.rows() == 2);
  REQUIRE(fb.cols() == 5);
  const double want[2][5] = {{0, 0.6759170156775076, 0, 0, 0},
                             {0, 0.3240829843224924, 0.9055223143747371, 0.4527611571873685, 0}};
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 5; ++c) CHECK(std::abs(fb(r, c) - want[r][c]) < 1e-12);
  }
}

TEST_CASE("mel filterbank structure for both profiles") {
  for (const char* name : {"desk16k", "paper48k"}) {
    const FeatureProfile p = ProfileByName(name);
    const Matrix fb = MelFilterbank(p.mel, p.stft.n_fft);
    CHECK(fb.rows() == 80);
    int prev_peak = -1;
    for (std::size_t r = 0; r < fb.rows(); ++r) {
      const auto row = fb.row(r);
      std::size_t peak = 0;
      for (std::size_t k = 0; k < row.size(); ++k) {
        CHECK(row[k] >= 0.0);
        if (row[k] > row[peak]) peak = k;
      }
      for (std::size_t k = 1; k <= peak; ++k) CHECK(row[k] >= row[k - 1]);
      for (std::size_t k = peak + 1; k < row.size(); ++k) CHECK(row[k] <= row[k - 1]);
      CHECK(static_cast<int>(peak) > prev_peak);
      prev_peak = static_cast<int>(peak);
    }
    // Every bin strictly between the first and last centers is covered.
    const double sr = p.mel.sample_rate;
    const double m_hi = HzToMel(p.mel.f_max);
    const double c_first = MelToHz(m_hi / 81.0);
    const double c_last = MelToHz(m_hi * 80.0 / 81.0);
    for (std::size_t k = 0; k < fb.cols(); ++k) {
      const double f = k * sr / p.stft.n_fft;
      if (f <= c_first || f >= c_last) continue;
      double col = 0;
      for (std::size_t r = 0; r < fb.rows(); ++r) col += fb(r, k);
      CHECK(col > 0.0);
    }
  }
}

TEST_CASE("mel filterbank rejects filters narrower than a bin") {
  CHECK(CodeOf([] { MelFilterbank({80, 0.0, 4000.0, 8000, -100.0}, 64); }) ==
        ErrorCode::kDegenerateFilter);
}

TEST_CASE("profiles") {
  const auto paper = ProfileByName("paper48k");
  CHECK(paper.stft.hop_length == 600);  // 12.5 ms at 48 kHz
  CHECK(paper.stft.win_length == 2400);
  CHECK(paper.stft.n_fft == 4096);
  CHECK(paper.mel.sample_rate == 48000);
  CHECK(paper.mel.n_mels == 80);
  const auto desk = ProfileByName("desk16k");
  CHECK(desk.stft.hop_length == 200);
  CHECK(desk.mel.f_max == 8000.0);
  CHECK(CodeOf([] { ProfileByName("bogus"); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("mel spectrogram of silence sits on the floor") {
  const auto p = ProfileByName("desk16k");
  const MelSpectrogram m = ComputeMelSpectrogram({std::vector<double>(3200, 0.0), 16000}, p.stft, p.mel);
  CHECK(m.n_mels() == 80);
  CHECK(m.frames() == 17);
  for (double v : m.values.data()) CHECK(v == doctest::Approx(-100.0).epsilon(1e-12));
}

TEST_CASE("mel spectrogram equals the composed oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  StftConfig stft{100, 25, 128, true};
  MelConfig mel{12, 0.0, 4000.0, 8000, -100.0};
  std::vector<double> x(4000);  // 0.5 s at 8 kHz
  for (double& v : x) v = u(rng);
  const MelSpectrogram got = ComputeMelSpectrogram({x, 8000}, stft, mel);
  const Matrix mag = OracleStft(x, stft);
  const Matrix fb = MelFilterbank(mel, stft.n_fft);
  double max_dev = 0;
  for (std::size_t r = 0; r < fb.rows(); ++r) {
    for (std::size_t t = 0; t < mag.cols(); ++t) {
      double e = 0;
      for (std::size_t k = 0; k < fb.cols(); ++k) e += fb(r, k) * mag(k, t);
      const double db = std::max(-100.0, 20.0 * std::log10(std::max(1e-5, e)));
      max_dev = std::max(max_dev, std::abs(db - got.values(r, t)));
    }
  }
  CHECK(max_dev <= 1e-9);
}

TEST_CASE("mel spectrogram invariants on the corpus") {
  const auto p = ProfileByName("desk16k");
  for (const auto& u : testing::SyntheticCorpus()) {
    const MelSpectrogram m = ComputeMelSpectrogram(u.audio, p.stft, p.mel);
    CHECK(m.frames() == 1 + u.audio.samples.size() / 200);
    for (double v : m.values.data()) {
      CHECK(std::isfinite(v));
      CHECK(v >= -100.0);
    }
  }
}

TEST_CASE("mel spectrogram rejects a sample-rate mismatch") {
  const auto p = ProfileByName("paper48k");
  CHECK(CodeOf([&] {
          ComputeMelSpectrogram({std::vector<double>(1000, 0.1), 16000}, p.stft, p.mel);
        }) == ErrorCode::kSampleRateMismatch);
  const auto d = ProfileByName("desk16k");
  CHECK(CodeOf([&] {
          ComputeMelSpectrogram({{0.1, NAN, 0.2}, 16000}, d.stft, d.mel);
        }) == ErrorCode::kNonFinite);
}

}  // TEST_SUITE
