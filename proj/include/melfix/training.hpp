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


#ifndef MELFIX_TRAINING_HPP_
#define MELFIX_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "melfix/codec.hpp"
#include "melfix/container.hpp"
#include "melfix/dsp.hpp"
#include "melfix/models.hpp"
#include "melfix/optim.hpp"

namespace melfix {

// Gaussian blur along time only: radius ceil(3 * sigma_t) frames, reflect
// padding, weights normalized to sum 1. sigma_t = 0 returns the input.
MelSpectrogram Oversmooth(const MelSpectrogram& mel, double sigma_t);

struct TrainingPair {
  EncodedMel x;  // degraded / synthesized input
  EncodedMel y;  // natural target
  std::string id;
};

struct PairDataset {
  std::vector<TrainingPair> pairs;
};

// Non-empty, unique ids, equal image shapes within each pair.
void Validate(const PairDataset& ds);

// Oversmooths the decoded mel and re-encodes it at the same range and width.
EncodedMel DegradeEncoded(const EncodedMel& natural, double sigma_t);

// Builds (oversmooth(y), y) from every *.wav (through `profile`) or every
// *.png with a sidecar in `source`, in filename order.
PairDataset MakePairsDegrade(const std::filesystem::path& source, double sigma_t,
                             std::string_view profile = "desk16k");
// Pairs <stem>.png in `natural_dir` with <stem>.png in `synth_dir`.
PairDataset MakePairsPaired(const std::filesystem::path& natural_dir,
                            const std::filesystem::path& synth_dir);

// Matches <name>.png files of two directories 1:1 as (synth, natural)
// entries, sorted by name. Throws UnmatchedPair or EmptySource.
std::vector<std::pair<std::filesystem::path, std::filesystem::path>> MatchPngPairs(
    const std::filesystem::path& natural_dir, const std::filesystem::path& synth_dir);

// Manifest: one "x_path<TAB>y_path" line per pair. Relative paths resolve
// against the manifest's directory.
using ManifestEntry = std::pair<std::filesystem::path, std::filesystem::path>;
std::vector<ManifestEntry> ReadManifest(const std::filesystem::path& path);
void WriteManifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);
PairDataset LoadManifest(const std::filesystem::path& path);

struct TrainConfig {
  AdamConfig adam;
  int64_t steps = 2000;
  int batch_size = 2;
  int crop_h = 64;  // 0 with crop_w = 0 means whole images
  int crop_w = 64;
  double lambda_l1 = 10.0;
  uint64_t seed = 17;
  GanLossKind loss_variant = GanLossKind::kVanilla;
  GeneratorAdversarial gen_loss = GeneratorAdversarial::kNonSaturating;
  bool deterministic = true;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;

  bool cropped() const { return crop_h > 0; }
  LossOptions loss_options() const { return {loss_variant, gen_loss, lambda_l1}; }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void Validate(const TrainConfig& cfg);

// key=value lines; unknown keys throw UnknownKey.
TrainConfig ParseTrainConfig(std::string_view text);
TrainConfig LoadTrainConfig(const std::filesystem::path& path);
void ApplyOverride(TrainConfig& cfg, const std::string& key, const std::string& value);
// Canonical text form; ParseTrainConfig(FormatTrainConfig(c)) == c.
std::string FormatTrainConfig(const TrainConfig& cfg);

struct Checkpoint {
  uint32_t version = kContainerVersion;
  Generator<float> generator;
  MultiScaleDiscriminator<float> discriminator;
  AdamState<float> opt_g;
  AdamState<float> opt_d;
  int64_t step = 0;
  std::string config_echo;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Freshly initialized networks: G from seed, D from seed + 1.
Checkpoint InitCheckpoint(const TrainConfig& cfg);

Container ToContainer(const Checkpoint& ckpt);
Checkpoint FromContainer(const Container& c);
void SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

// Losses of one step, evaluated at the parameters in effect when it began.
struct LossRecord {
  int64_t step = 0;
  double loss_d = 0.0;
  double loss_g_adv = 0.0;
  double loss_g_l1 = 0.0;

  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

std::string FormatLossLog(const std::vector<LossRecord>& log);
void WriteLossLog(const std::vector<LossRecord>& log, const std::filesystem::path& path);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossRecord> log;
};

using TrainProgress = std::function<void(const LossRecord&)>;

// Per step: draw a batch (same crop for x and y), one Adam step on every
// discriminator, then one Adam step on the generator.
TrainResult Train(const PairDataset& ds, const TrainConfig& cfg, const TrainProgress& progress = {});

// Pixels to [-1, 1] and back; one sample, one channel.
Tensor<float> ImageToTensor(const GrayImage& image);
GrayImage TensorToImage(const Tensor<float>& t);

// Runs G over the whole image, with padding columns mirrored from the valid
// frames on the way in. Columns at or beyond meta.orig_frames stay 0
// and the metadata is carried over unchanged.
EncodedMel Enhance(Checkpoint& ckpt, const EncodedMel& input);

}  // namespace melfix

#endif  // MELFIX_TRAINING_HPP_
