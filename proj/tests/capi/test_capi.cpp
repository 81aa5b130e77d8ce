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


// Exercises the shared library through its C header only.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "melfix/melfix.h"

namespace fs = std::filesystem;

namespace {

fs::path Scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("melfix_capi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void Put(std::ofstream& out, uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

// Mono 16-bit PCM: a two-tone chirp with a little amplitude movement.
void WriteChirp(const fs::path& path, int sr, double seconds, double f0) {
  const auto n = static_cast<uint32_t>(sr * seconds);
  std::ofstream out(path, std::ios::binary);
  out.write("RIFF", 4);
  Put(out, 36 + 2 * n, 4);
  out.write("WAVEfmt ", 8);
  Put(out, 16, 4);
  Put(out, 1, 2);
  Put(out, 1, 2);
  Put(out, static_cast<uint32_t>(sr), 4);
  Put(out, static_cast<uint32_t>(sr * 2), 4);
  Put(out, 2, 2);
  Put(out, 16, 2);
  out.write("data", 4);
  Put(out, 2 * n, 4);
  double phase = 0;
  for (uint32_t i = 0; i < n; ++i) {
    const double t = double(i) / sr;
    phase += 2 * M_PI * (f0 + 300 * t) / sr;
    const double env = 0.5 + 0.4 * std::sin(2 * M_PI * 3 * t);
    const double v = env * (0.6 * std::sin(phase) + 0.3 * std::sin(2.7 * phase));
    Put(out, static_cast<uint16_t>(static_cast<int16_t>(std::lround(v * 20000))), 2);
  }
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strlen(melfix_version()) > 0);
  CHECK(std::string(melfix_status_name(MELFIX_OK)) == "Ok");
  CHECK(std::string(melfix_status_name(MELFIX_BAD_MAGIC)) == "BadMagic");
}

TEST_CASE("null arguments are rejected with a message") {
  melfix_mel* mel = nullptr;
  CHECK(melfix_mel_from_wav(nullptr, "desk16k", &mel) == MELFIX_INVALID_ARGUMENT);
  CHECK(std::strlen(melfix_last_error()) > 0);
  CHECK(mel == nullptr);
  melfix_mel_free(nullptr);
  melfix_image_free(nullptr);
  melfix_checkpoint_free(nullptr);
}

TEST_CASE("wav to mel to image and back") {
  const auto dir = Scratch("roundtrip");
  WriteChirp(dir / "a.wav", 16000, 0.5, 220);
  melfix_mel* mel = nullptr;
  REQUIRE(melfix_mel_from_wav((dir / "a.wav").c_str(), "desk16k", &mel) == MELFIX_OK);
  int n_mels = 0, frames = 0;
  REQUIRE(melfix_mel_shape(mel, &n_mels, &frames) == MELFIX_OK);
  CHECK(n_mels == 80);
  CHECK(frames == 1 + 8000 / 200);

  std::vector<double> values(static_cast<size_t>(n_mels * frames));
  CHECK(melfix_mel_copy_values(mel, values.data(), values.size() - 1) == MELFIX_SHAPE_MISMATCH);
  REQUIRE(melfix_mel_copy_values(mel, values.data(), values.size()) == MELFIX_OK);

  melfix_image* img = nullptr;
  REQUIRE(melfix_image_from_mel(mel, -100, 0, 16, &img) == MELFIX_OK);
  int h = 0, w = 0, orig = 0;
  REQUIRE(melfix_image_shape(img, &h, &w, &orig) == MELFIX_OK);
  CHECK(h == 80);
  CHECK(w == 48);
  CHECK(orig == frames);
  REQUIRE(melfix_image_write(img, (dir / "a.png").c_str()) == MELFIX_OK);
  CHECK(fs::exists(dir / "a.meta"));

  melfix_image* back = nullptr;
  REQUIRE(melfix_image_read((dir / "a.png").c_str(), &back) == MELFIX_OK);
  melfix_mel* decoded = nullptr;
  REQUIRE(melfix_image_to_mel(back, &decoded) == MELFIX_OK);
  std::vector<double> again(values.size());
  REQUIRE(melfix_mel_copy_values(decoded, again.data(), again.size()) == MELFIX_OK);
  double worst = 0;
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i] > -100 && values[i] < 0) worst = std::max(worst, std::abs(values[i] - again[i]));
  }
  CHECK(worst <= 100.0 / 65535 / 2 + 1e-9);

  double lsd = -1;
  CHECK(melfix_lsd(mel, mel, &lsd) == MELFIX_OK);
  CHECK(lsd == 0.0);
  std::vector<double> gv(static_cast<size_t>(n_mels));
  CHECK(melfix_global_variance(mel, gv.data(), gv.size()) == MELFIX_OK);

  melfix_mel* smooth = nullptr;
  REQUIRE(melfix_mel_oversmooth(mel, 3.0, &smooth) == MELFIX_OK);
  double ratio = 0;
  CHECK(melfix_gv_ratio_mean(smooth, mel, &ratio) == MELFIX_OK);
  CHECK(ratio < 1.0);
  CHECK(melfix_plot_triptych(mel, smooth, mel, (dir / "t.png").c_str()) == MELFIX_OK);
  CHECK(fs::file_size(dir / "t.png") > 0);

  REQUIRE(melfix_mel_save(mel, (dir / "a.mel").c_str()) == MELFIX_OK);
  melfix_mel* loaded = nullptr;
  REQUIRE(melfix_mel_load((dir / "a.mel").c_str(), &loaded) == MELFIX_OK);
  CHECK(melfix_lsd(mel, loaded, &lsd) == MELFIX_OK);
  CHECK(lsd == 0.0);

  for (auto* m : {mel, decoded, smooth, loaded}) melfix_mel_free(m);
  melfix_image_free(img);
  melfix_image_free(back);
}

TEST_CASE("error codes cross the boundary") {
  const auto dir = Scratch("errors");
  WriteChirp(dir / "a.wav", 16000, 0.2, 300);
  melfix_mel* mel = nullptr;
  CHECK(melfix_mel_from_wav((dir / "a.wav").c_str(), "paper48k", &mel) == MELFIX_SAMPLE_RATE_MISMATCH);
  CHECK(melfix_mel_from_wav((dir / "none.wav").c_str(), "desk16k", &mel) == MELFIX_FILE_NOT_FOUND);
  CHECK(melfix_mel_from_wav((dir / "a.wav").c_str(), "nope", &mel) == MELFIX_INVALID_ARGUMENT);
  std::ofstream(dir / "bad.ckpt") << "NOTACKPT";
  melfix_checkpoint* ck = nullptr;
  CHECK(melfix_checkpoint_load((dir / "bad.ckpt").c_str(), &ck) == MELFIX_BAD_MAGIC);
  CHECK(std::string(melfix_last_error()).find("bad.ckpt") != std::string::npos);
  melfix_train_config* cfg = nullptr;
  CHECK(melfix_train_config_parse("bogus=1", &cfg) == MELFIX_UNKNOWN_KEY);
  CHECK(cfg == nullptr);
  melfix_dataset* ds = nullptr;
  CHECK(melfix_dataset_degrade(Scratch("empty").c_str(), 2.0, "desk16k", &ds) == MELFIX_EMPTY_SOURCE);
}

TEST_CASE("config text goes through a caller buffer") {
  melfix_train_config* cfg = nullptr;
  REQUIRE(melfix_train_config_default(&cfg) == MELFIX_OK);
  REQUIRE(melfix_train_config_set(cfg, "steps", "7") == MELFIX_OK);
  CHECK(melfix_train_config_set(cfg, "crop", "48x48") == MELFIX_INVALID_ARGUMENT);
  size_t needed = 0;
  char tiny[4];
  CHECK(melfix_train_config_format(cfg, tiny, sizeof tiny, &needed) == MELFIX_INVALID_ARGUMENT);
  REQUIRE(needed > sizeof tiny);
  std::vector<char> buf(needed);
  REQUIRE(melfix_train_config_format(cfg, buf.data(), buf.size(), &needed) == MELFIX_OK);
  CHECK(std::string(buf.data()).find("steps=7\n") != std::string::npos);
  melfix_train_config* again = nullptr;
  REQUIRE(melfix_train_config_parse(buf.data(), &again) == MELFIX_OK);
  melfix_train_config_free(again);
  melfix_train_config_free(cfg);
}

namespace {
struct Seen {
  int steps = 0;
  double first_d = 0;
};
void OnStep(int64_t step, double d, double, double, void* user) {
  auto* s = static_cast<Seen*>(user);
  if (step == 0) s->first_d = d;
  ++s->steps;
}
void OnCheck(const char*, double, double, void* user) { ++*static_cast<int*>(user); }
}  // namespace

TEST_CASE("train, save, load and enhance") {
  const auto dir = Scratch("train");
  WriteChirp(dir / "a.wav", 16000, 0.5, 180);
  WriteChirp(dir / "b.wav", 16000, 0.5, 260);
  melfix_dataset* ds = nullptr;
  REQUIRE(melfix_dataset_degrade(dir.c_str(), 2.0, "desk16k", &ds) == MELFIX_OK);
  size_t n = 0;
  CHECK(melfix_dataset_size(ds, &n) == MELFIX_OK);
  CHECK(n == 2);
  melfix_train_config* cfg = nullptr;
  REQUIRE(melfix_train_config_parse("steps=3\nbatch_size=1\ncrop=32x32\nbase_channels=4\n"
                                    "disc_base_channels=4\n",
                                    &cfg) == MELFIX_OK);
  Seen seen;
  melfix_checkpoint* ck = nullptr;
  REQUIRE(melfix_train(ds, cfg, (dir / "loss.csv").c_str(), OnStep, &seen, &ck) == MELFIX_OK);
  CHECK(seen.steps == 3);
  CHECK(seen.first_d == doctest::Approx(6 * std::log(2.0)).epsilon(1e-6));
  CHECK(fs::exists(dir / "loss.csv"));
  int64_t step = 0;
  CHECK(melfix_checkpoint_step(ck, &step) == MELFIX_OK);
  CHECK(step == 3);
  REQUIRE(melfix_checkpoint_save(ck, (dir / "m.ckpt").c_str()) == MELFIX_OK);
  melfix_checkpoint* loaded = nullptr;
  REQUIRE(melfix_checkpoint_load((dir / "m.ckpt").c_str(), &loaded) == MELFIX_OK);

  melfix_mel* mel = nullptr;
  REQUIRE(melfix_mel_from_wav((dir / "a.wav").c_str(), "desk16k", &mel) == MELFIX_OK);
  melfix_image* img = nullptr;
  REQUIRE(melfix_image_from_mel(mel, -100, 0, 16, &img) == MELFIX_OK);
  melfix_image* out = nullptr;
  REQUIRE(melfix_enhance(loaded, img, &out) == MELFIX_OK);
  int h = 0, w = 0, orig = 0, h2 = 0, w2 = 0, orig2 = 0;
  melfix_image_shape(img, &h, &w, &orig);
  melfix_image_shape(out, &h2, &w2, &orig2);
  CHECK(h == h2);
  CHECK(w == w2);
  CHECK(orig == orig2);

  melfix_image_free(out);
  melfix_image_free(img);
  melfix_mel_free(mel);
  melfix_checkpoint_free(loaded);
  melfix_checkpoint_free(ck);
  melfix_train_config_free(cfg);
  melfix_dataset_free(ds);
}

TEST_CASE("gradcheck reports every op") {
  int calls = 0;
  double worst = 1;
  CHECK(melfix_gradcheck(OnCheck, &calls, &worst) == MELFIX_OK);
  CHECK(calls >= 17);
  CHECK(worst < 1e-4);
}
