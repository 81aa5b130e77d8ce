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


#include "melfix/melfix.h"

#include <cstring>
#include <filesystem>
#include <new>
#include <string>
#include <utility>

#include "melfix/codec.hpp"
#include "melfix/container.hpp"
#include "melfix/dsp.hpp"
#include "melfix/error.hpp"
#include "melfix/metrics.hpp"
#include "melfix/optim.hpp"
#include "melfix/training.hpp"

struct melfix_mel {
  melfix::MelSpectrogram value;
};
struct melfix_image {
  melfix::EncodedMel value;
};
struct melfix_train_config {
  melfix::TrainConfig value;
};
struct melfix_dataset {
  melfix::PairDataset value;
};
struct melfix_checkpoint {
  melfix::Checkpoint value;
};

namespace {

using melfix::ErrorCode;

thread_local std::string g_last_error;

int Status(ErrorCode code, std::string message) {
  g_last_error = std::move(message);
  return static_cast<int>(code);
}

template <class F>
int Guard(F&& body) {
  try {
    body();
    g_last_error.clear();
    return MELFIX_OK;
  } catch (const melfix::Error& e) {
    return Status(e.code(), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return Status(ErrorCode::kIoError, e.what());
  } catch (const std::bad_alloc&) {
    return Status(ErrorCode::kInternal, "out of memory");
  } catch (const std::exception& e) {
    return Status(ErrorCode::kInternal, e.what());
  } catch (...) {
    return Status(ErrorCode::kInternal, "unknown failure");
  }
}

template <class... P>
void NotNull(P... ptrs) {
  melfix::Require(((ptrs != nullptr) && ...), ErrorCode::kInvalidArgument,
                  "null pointer argument");
}

template <class H, class V>
void Emit(H** out, V&& value) {
  *out = new H{std::forward<V>(value)};
}

}  // namespace

extern "C" {

const char* melfix_version(void) { return "1.0.0"; }

const char* melfix_last_error(void) { return g_last_error.c_str(); }

const char* melfix_status_name(int status) {
  return melfix::ErrorCodeName(static_cast<ErrorCode>(status)).data();
}

int melfix_mel_from_wav(const char* wav_path, const char* profile, melfix_mel** out) {
  return Guard([&] {
    NotNull(wav_path, profile, out);
    const auto prof = melfix::ProfileByName(profile);
    const std::filesystem::path path(wav_path);
    Emit(out, melfix::ComputeMelSpectrogram(melfix::ReadWav(path), prof.stft, prof.mel,
                                            path.stem().string()));
  });
}

int melfix_mel_create(int n_mels, int frames, const double* values, const char* profile,
                      melfix_mel** out) {
  return Guard([&] {
    NotNull(values, profile, out);
    melfix::Require(n_mels > 0 && frames > 0, ErrorCode::kInvalidArgument,
                    "n_mels and frames must be positive");
    const auto prof = melfix::ProfileByName(profile);
    melfix::MelSpectrogram mel;
    mel.stft = prof.stft;
    mel.mel = prof.mel;
    mel.mel.n_mels = n_mels;
    mel.values = melfix::Matrix(static_cast<std::size_t>(n_mels), static_cast<std::size_t>(frames));
    std::memcpy(mel.values.data().data(), values, mel.values.size() * sizeof(double));
    Emit(out, std::move(mel));
  });
}

void melfix_mel_free(melfix_mel* mel) { delete mel; }

int melfix_mel_shape(const melfix_mel* mel, int* n_mels, int* frames) {
  return Guard([&] {
    NotNull(mel, n_mels, frames);
    *n_mels = static_cast<int>(mel->value.n_mels());
    *frames = static_cast<int>(mel->value.frames());
  });
}

int melfix_mel_copy_values(const melfix_mel* mel, double* out, size_t count) {
  return Guard([&] {
    NotNull(mel, out);
    melfix::Require(count == mel->value.values.size(), ErrorCode::kShapeMismatch,
                    "buffer size does not match n_mels * frames");
    std::memcpy(out, mel->value.values.data().data(), count * sizeof(double));
  });
}

int melfix_mel_oversmooth(const melfix_mel* mel, double sigma_t, melfix_mel** out) {
  return Guard([&] {
    NotNull(mel, out);
    Emit(out, melfix::Oversmooth(mel->value, sigma_t));
  });
}

int melfix_mel_save(const melfix_mel* mel, const char* path) {
  return Guard([&] {
    NotNull(mel, path);
    melfix::SaveMelFeatures(mel->value, path);
  });
}

int melfix_mel_load(const char* path, melfix_mel** out) {
  return Guard([&] {
    NotNull(path, out);
    Emit(out, melfix::LoadMelFeatures(path));
  });
}

int melfix_image_from_mel(const melfix_mel* mel, double min_db, double max_db, int pad_multiple,
                          melfix_image** out) {
  return Guard([&] {
    NotNull(mel, out);
    Emit(out, melfix::MelToImage(mel->value, min_db, max_db, pad_multiple));
  });
}

int melfix_image_to_mel(const melfix_image* image, melfix_mel** out) {
  return Guard([&] {
    NotNull(image, out);
    Emit(out, melfix::ImageToMel(image->value.image, image->value.meta));
  });
}

int melfix_image_write(const melfix_image* image, const char* png_path) {
  return Guard([&] {
    NotNull(image, png_path);
    melfix::WriteEncoded(image->value, png_path);
  });
}

int melfix_image_read(const char* png_path, melfix_image** out) {
  return Guard([&] {
    NotNull(png_path, out);
    Emit(out, melfix::ReadEncoded(png_path));
  });
}

int melfix_image_shape(const melfix_image* image, int* height, int* width, int* orig_frames) {
  return Guard([&] {
    NotNull(image, height, width, orig_frames);
    *height = image->value.image.height;
    *width = image->value.image.width;
    *orig_frames = image->value.meta.orig_frames;
  });
}

int melfix_image_copy_pixels(const melfix_image* image, uint16_t* out, size_t count) {
  return Guard([&] {
    NotNull(image, out);
    const auto& px = image->value.image.pixels;
    melfix::Require(count == px.size(), ErrorCode::kShapeMismatch,
                    "buffer size does not match height * width");
    std::memcpy(out, px.data(), count * sizeof(uint16_t));
  });
}

int melfix_image_degrade(const melfix_image* image, double sigma_t, melfix_image** out) {
  return Guard([&] {
    NotNull(image, out);
    Emit(out, melfix::DegradeEncoded(image->value, sigma_t));
  });
}

void melfix_image_free(melfix_image* image) { delete image; }

int melfix_global_variance(const melfix_mel* mel, double* out, size_t count) {
  return Guard([&] {
    NotNull(mel, out);
    const auto gv = melfix::GlobalVariance(mel->value);
    melfix::Require(count == gv.size(), ErrorCode::kShapeMismatch,
                    "buffer size does not match n_mels");
    std::memcpy(out, gv.data(), count * sizeof(double));
  });
}

int melfix_lsd(const melfix_mel* a, const melfix_mel* b, double* out) {
  return Guard([&] {
    NotNull(a, b, out);
    *out = melfix::LogSpectralDistance(a->value, b->value);
  });
}

int melfix_mean_abs_db(const melfix_mel* a, const melfix_mel* b, double* out) {
  return Guard([&] {
    NotNull(a, b, out);
    *out = melfix::MeanAbsDifference(a->value, b->value);
  });
}

int melfix_gv_ratio_mean(const melfix_mel* a, const melfix_mel* ref, double* out) {
  return Guard([&] {
    NotNull(a, ref, out);
    *out = melfix::GvRatioMean(a->value, ref->value);
  });
}

int melfix_plot_mel(const melfix_mel* mel, const char* png_path) {
  return Guard([&] {
    NotNull(mel, png_path);
    melfix::PlotMel(mel->value, png_path);
  });
}

int melfix_plot_triptych(const melfix_mel* original, const melfix_mel* synthesized,
                         const melfix_mel* enhanced, const char* png_path) {
  return Guard([&] {
    NotNull(original, synthesized, enhanced, png_path);
    melfix::PlotTriptych(original->value, synthesized->value, enhanced->value, png_path);
  });
}

int melfix_train_config_default(melfix_train_config** out) {
  return Guard([&] {
    NotNull(out);
    Emit(out, melfix::TrainConfig{});
  });
}

int melfix_train_config_parse(const char* text, melfix_train_config** out) {
  return Guard([&] {
    NotNull(text, out);
    Emit(out, melfix::ParseTrainConfig(text));
  });
}

int melfix_train_config_load(const char* path, melfix_train_config** out) {
  return Guard([&] {
    NotNull(path, out);
    Emit(out, melfix::LoadTrainConfig(path));
  });
}

int melfix_train_config_set(melfix_train_config* cfg, const char* key, const char* value) {
  return Guard([&] {
    NotNull(cfg, key, value);
    melfix::TrainConfig next = cfg->value;
    melfix::ApplyOverride(next, key, value);
    melfix::Validate(next);
    cfg->value = next;
  });
}

int melfix_train_config_format(const melfix_train_config* cfg, char* buf, size_t cap,
                               size_t* needed) {
  return Guard([&] {
    NotNull(cfg, needed);
    const std::string text = melfix::FormatTrainConfig(cfg->value);
    *needed = text.size() + 1;
    melfix::Require(buf != nullptr && cap >= *needed, ErrorCode::kInvalidArgument,
                    "buffer too small for config text");
    std::memcpy(buf, text.c_str(), *needed);
  });
}

void melfix_train_config_free(melfix_train_config* cfg) { delete cfg; }

int melfix_dataset_from_manifest(const char* manifest_path, melfix_dataset** out) {
  return Guard([&] {
    NotNull(manifest_path, out);
    Emit(out, melfix::LoadManifest(manifest_path));
  });
}

int melfix_dataset_degrade(const char* source_dir, double sigma_t, const char* profile,
                           melfix_dataset** out) {
  return Guard([&] {
    NotNull(source_dir, profile, out);
    Emit(out, melfix::MakePairsDegrade(source_dir, sigma_t, profile));
  });
}

int melfix_dataset_size(const melfix_dataset* ds, size_t* out) {
  return Guard([&] {
    NotNull(ds, out);
    *out = ds->value.pairs.size();
  });
}

void melfix_dataset_free(melfix_dataset* ds) { delete ds; }

int melfix_pack_manifest(const char* natural_dir, const char* input_dir,
                         const char* manifest_path, size_t* pairs) {
  return Guard([&] {
    NotNull(natural_dir, input_dir, manifest_path);
    namespace fs = std::filesystem;
    const fs::path manifest(manifest_path);
    fs::path base = manifest.parent_path();
    if (base.empty()) base = ".";
    std::vector<melfix::ManifestEntry> entries;
    for (const auto& [x, y] : melfix::MatchPngPairs(natural_dir, input_dir)) {
      melfix::ReadSidecar(melfix::SidecarPath(x));
      melfix::ReadSidecar(melfix::SidecarPath(y));
      entries.emplace_back(fs::relative(x, base), fs::relative(y, base));
    }
    melfix::WriteManifest(entries, manifest);
    if (pairs) *pairs = entries.size();
  });
}

int melfix_train(const melfix_dataset* ds, const melfix_train_config* cfg,
                 const char* loss_log_path, melfix_progress_fn progress, void* user,
                 melfix_checkpoint** out) {
  return Guard([&] {
    NotNull(ds, cfg, out);
    melfix::TrainProgress cb;
    if (progress) {
      cb = [&](const melfix::LossRecord& r) {
        progress(r.step, r.loss_d, r.loss_g_adv, r.loss_g_l1, user);
      };
    }
    melfix::TrainResult result = melfix::Train(ds->value, cfg->value, cb);
    if (loss_log_path) melfix::WriteLossLog(result.log, loss_log_path);
    Emit(out, std::move(result.checkpoint));
  });
}

int melfix_checkpoint_init(const melfix_train_config* cfg, melfix_checkpoint** out) {
  return Guard([&] {
    NotNull(cfg, out);
    Emit(out, melfix::InitCheckpoint(cfg->value));
  });
}

int melfix_checkpoint_save(const melfix_checkpoint* ckpt, const char* path) {
  return Guard([&] {
    NotNull(ckpt, path);
    melfix::SaveCheckpoint(ckpt->value, path);
  });
}

int melfix_checkpoint_load(const char* path, melfix_checkpoint** out) {
  return Guard([&] {
    NotNull(path, out);
    Emit(out, melfix::LoadCheckpoint(path));
  });
}

int melfix_checkpoint_step(const melfix_checkpoint* ckpt, int64_t* out) {
  return Guard([&] {
    NotNull(ckpt, out);
    *out = ckpt->value.step;
  });
}

void melfix_checkpoint_free(melfix_checkpoint* ckpt) { delete ckpt; }

int melfix_enhance(melfix_checkpoint* ckpt, const melfix_image* input, melfix_image** out) {
  return Guard([&] {
    NotNull(ckpt, input, out);
    Emit(out, melfix::Enhance(ckpt->value, input->value));
  });
}

int melfix_gradcheck(melfix_gradcheck_fn report, void* user, double* worst) {
  return Guard([&] {
    double max_err = 0.0;
    for (const auto& r : melfix::RunStandardGradChecks()) {
      if (report) report(r.op.c_str(), r.max_rel_error, r.tolerance, user);
      max_err = std::max(max_err, r.max_rel_error);
    }
    if (worst) *worst = max_err;
  });
}

}  // extern "C"
