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


/* C interface to libmelfix.
 *
 * Every fallible call returns a melfix_status; on failure the thread's last
 * error message is available from melfix_last_error(). Handles are opaque
 * and owned by the caller, who releases them with the matching *_free
 * function (NULL is accepted). Paths are UTF-8. */

#ifndef MELFIX_MELFIX_H_
#define MELFIX_MELFIX_H_

#include <stddef.h>
#include <stdint.h>

#if defined(MELFIX_BUILDING_LIBRARY)
#define MELFIX_API __attribute__((visibility("default")))
#else
#define MELFIX_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum melfix_status {
  MELFIX_OK = 0,
  MELFIX_INVALID_ARGUMENT = 1,
  MELFIX_IO_ERROR = 2,
  MELFIX_FILE_NOT_FOUND = 3,
  MELFIX_EMPTY_AUDIO = 4,
  MELFIX_NON_PCM_ENCODING = 5,
  MELFIX_CHANNEL_COUNT = 6,
  MELFIX_TRUNCATED_DATA = 7,
  MELFIX_MALFORMED_FILE = 8,
  MELFIX_DEGENERATE_FILTER = 9,
  MELFIX_NON_FINITE = 10,
  MELFIX_SHAPE_MISMATCH = 11,
  MELFIX_UNSUPPORTED_DEPTH = 12,
  MELFIX_UNSUPPORTED_COLOR_TYPE = 13,
  MELFIX_BAD_MAGIC = 14,
  MELFIX_UNSUPPORTED_VERSION = 15,
  MELFIX_UNMATCHED_PAIR = 16,
  MELFIX_NON_FINITE_GRADIENT = 17,
  MELFIX_NON_FINITE_LOSS = 18,
  MELFIX_SAMPLE_RATE_MISMATCH = 19,
  MELFIX_UNKNOWN_KEY = 20,
  MELFIX_EMPTY_SOURCE = 21,
  MELFIX_INTERNAL = 99
} melfix_status;

typedef struct melfix_mel melfix_mel;
typedef struct melfix_image melfix_image;
typedef struct melfix_train_config melfix_train_config;
typedef struct melfix_dataset melfix_dataset;
typedef struct melfix_checkpoint melfix_checkpoint;

MELFIX_API const char* melfix_version(void);
/* Message of the last failed call on this thread ("" if none). */
MELFIX_API const char* melfix_last_error(void);
/* Symbolic name such as "BadMagic". */
MELFIX_API const char* melfix_status_name(int status);

/* --- Mel spectrograms (rows = mel bins, columns = frames, dB) --- */

/* profile: "desk16k" or "paper48k". */
MELFIX_API int melfix_mel_from_wav(const char* wav_path, const char* profile, melfix_mel** out);
/* Row-major n_mels x frames values, settings taken from `profile`. */
MELFIX_API int melfix_mel_create(int n_mels, int frames, const double* values,
                                 const char* profile, melfix_mel** out);
MELFIX_API void melfix_mel_free(melfix_mel* mel);
MELFIX_API int melfix_mel_shape(const melfix_mel* mel, int* n_mels, int* frames);
/* count must equal n_mels * frames. */
MELFIX_API int melfix_mel_copy_values(const melfix_mel* mel, double* out, size_t count);
MELFIX_API int melfix_mel_oversmooth(const melfix_mel* mel, double sigma_t, melfix_mel** out);
MELFIX_API int melfix_mel_save(const melfix_mel* mel, const char* path);
MELFIX_API int melfix_mel_load(const char* path, melfix_mel** out);

/* --- 16-bit grayscale images with normalization sidecar --- */

MELFIX_API int melfix_image_from_mel(const melfix_mel* mel, double min_db, double max_db,
                                     int pad_multiple, melfix_image** out);
MELFIX_API int melfix_image_to_mel(const melfix_image* image, melfix_mel** out);
/* Writes the PNG and <stem>.meta next to it. */
MELFIX_API int melfix_image_write(const melfix_image* image, const char* png_path);
MELFIX_API int melfix_image_read(const char* png_path, melfix_image** out);
MELFIX_API int melfix_image_shape(const melfix_image* image, int* height, int* width,
                                  int* orig_frames);
MELFIX_API int melfix_image_copy_pixels(const melfix_image* image, uint16_t* out, size_t count);
/* Time-axis blur of the decoded mel, re-encoded at the same size. */
MELFIX_API int melfix_image_degrade(const melfix_image* image, double sigma_t,
                                    melfix_image** out);
MELFIX_API void melfix_image_free(melfix_image* image);

/* --- Metrics and figures --- */

MELFIX_API int melfix_global_variance(const melfix_mel* mel, double* out, size_t count);
MELFIX_API int melfix_lsd(const melfix_mel* a, const melfix_mel* b, double* out);
MELFIX_API int melfix_mean_abs_db(const melfix_mel* a, const melfix_mel* b, double* out);
MELFIX_API int melfix_gv_ratio_mean(const melfix_mel* a, const melfix_mel* ref, double* out);
MELFIX_API int melfix_plot_mel(const melfix_mel* mel, const char* png_path);
/* Panels top to bottom: original, synthesized, enhanced. */
MELFIX_API int melfix_plot_triptych(const melfix_mel* original, const melfix_mel* synthesized,
                                    const melfix_mel* enhanced, const char* png_path);

/* --- Training configuration --- */

MELFIX_API int melfix_train_config_default(melfix_train_config** out);
MELFIX_API int melfix_train_config_parse(const char* text, melfix_train_config** out);
MELFIX_API int melfix_train_config_load(const char* path, melfix_train_config** out);
MELFIX_API int melfix_train_config_set(melfix_train_config* cfg, const char* key,
                                       const char* value);
/* Copies the canonical key=value text (NUL-terminated) if it fits in `cap`;
 * *needed receives the size including the terminator. */
MELFIX_API int melfix_train_config_format(const melfix_train_config* cfg, char* buf, size_t cap,
                                          size_t* needed);
MELFIX_API void melfix_train_config_free(melfix_train_config* cfg);

/* --- Pair datasets --- */

MELFIX_API int melfix_dataset_from_manifest(const char* manifest_path, melfix_dataset** out);
/* (oversmooth(y), y) pairs from *.wav (via profile) or *.png + sidecar. */
MELFIX_API int melfix_dataset_degrade(const char* source_dir, double sigma_t,
                                      const char* profile, melfix_dataset** out);
MELFIX_API int melfix_dataset_size(const melfix_dataset* ds, size_t* out);
MELFIX_API void melfix_dataset_free(melfix_dataset* ds);
/* Matches <name>.png files 1:1 and writes a manifest with paths relative to
 * its directory. */
MELFIX_API int melfix_pack_manifest(const char* natural_dir, const char* input_dir,
                                    const char* manifest_path, size_t* pairs);

/* --- Training and inference --- */

typedef void (*melfix_progress_fn)(int64_t step, double loss_d, double loss_g_adv,
                                   double loss_g_l1, void* user);

/* loss_log_path and progress may be NULL. */
MELFIX_API int melfix_train(const melfix_dataset* ds, const melfix_train_config* cfg,
                            const char* loss_log_path, melfix_progress_fn progress, void* user,
                            melfix_checkpoint** out);
MELFIX_API int melfix_checkpoint_init(const melfix_train_config* cfg, melfix_checkpoint** out);
MELFIX_API int melfix_checkpoint_save(const melfix_checkpoint* ckpt, const char* path);
MELFIX_API int melfix_checkpoint_load(const char* path, melfix_checkpoint** out);
MELFIX_API int melfix_checkpoint_step(const melfix_checkpoint* ckpt, int64_t* out);
MELFIX_API void melfix_checkpoint_free(melfix_checkpoint* ckpt);
MELFIX_API int melfix_enhance(melfix_checkpoint* ckpt, const melfix_image* input,
                              melfix_image** out);

/* --- Diagnostics --- */

typedef void (*melfix_gradcheck_fn)(const char* op, double max_rel_error, double tolerance,
                                    void* user);

/* Runs the built-in finite-difference checks; *worst receives the largest
 * relative error seen. */
MELFIX_API int melfix_gradcheck(melfix_gradcheck_fn report, void* user, double* worst);

#ifdef __cplusplus
}
#endif

#endif /* MELFIX_MELFIX_H_ */
