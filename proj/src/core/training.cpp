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


#include "melfix/training.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "kv.hpp"
#include "melfix/error.hpp"

namespace melfix {

namespace fs = std::filesystem;

// --- Degradation -----------------------------------------------------------------

namespace {

std::size_t Reflect(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < n ? i : period - i);
}

std::vector<fs::path> ListFiles(const fs::path& dir, std::string_view ext) {
  Require(fs::is_directory(dir), ErrorCode::kFileNotFound, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

MelSpectrogram Oversmooth(const MelSpectrogram& mel, double sigma_t) {
  Require(sigma_t >= 0.0 && std::isfinite(sigma_t), ErrorCode::kInvalidArgument,
          "sigma_t must be finite and >= 0");
  if (sigma_t == 0.0 || mel.frames() == 0) return mel;
  const long radius = static_cast<long>(std::ceil(3.0 * sigma_t));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (long k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * static_cast<double>(k * k) / (sigma_t * sigma_t));
    kernel[static_cast<std::size_t>(k + radius)] = w;
    sum += w;
  }
  for (double& w : kernel) w /= sum;

  MelSpectrogram out = mel;
  const long frames = static_cast<long>(mel.frames());
  for (std::size_t r = 0; r < mel.n_mels(); ++r) {
    auto src = mel.values.row(r);
    auto dst = out.values.row(r);
    for (long t = 0; t < frames; ++t) {
      double acc = 0.0;
      for (long k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * src[Reflect(t + k, frames)];
      }
      dst[static_cast<std::size_t>(t)] = acc;
    }
  }
  return out;
}

EncodedMel DegradeEncoded(const EncodedMel& natural, double sigma_t) {
  const MelSpectrogram smooth = Oversmooth(ImageToMel(natural.image, natural.meta), sigma_t);
  EncodedMel tight = MelToImage(smooth, natural.meta.min_db, natural.meta.max_db, 1);
  EncodedMel out;
  out.meta = natural.meta;
  out.image.width = natural.image.width;
  out.image.height = natural.image.height;
  out.image.pixels.assign(natural.image.pixels.size(), 0);
  for (int r = 0; r < out.image.height; ++r) {
    for (int c = 0; c < tight.image.width; ++c) out.image.at(r, c) = tight.image.at(r, c);
  }
  return out;
}

// --- Pair construction -------------------------------------------------------------

void Validate(const PairDataset& ds) {
  Require(!ds.pairs.empty(), ErrorCode::kEmptySource, "pair dataset is empty");
  std::set<std::string> ids;
  for (const auto& p : ds.pairs) {
    Require(ids.insert(p.id).second, ErrorCode::kInvalidArgument, "duplicate pair id " + p.id);
    Require(p.x.image.width == p.y.image.width && p.x.image.height == p.y.image.height,
            ErrorCode::kShapeMismatch, "pair " + p.id + ": x and y image shapes differ");
  }
}

PairDataset MakePairsDegrade(const fs::path& source, double sigma_t, std::string_view profile) {
  PairDataset ds;
  const auto wavs = ListFiles(source, ".wav");
  if (!wavs.empty()) {
    const FeatureProfile prof = ProfileByName(profile);
    for (const auto& path : wavs) {
      const MelSpectrogram mel =
          ComputeMelSpectrogram(ReadWav(path), prof.stft, prof.mel, path.stem().string());
      ds.pairs.push_back({MelToImage(Oversmooth(mel, sigma_t)), MelToImage(mel),
                          path.stem().string()});
    }
  } else {
    for (const auto& path : ListFiles(source, ".png")) {
      if (!fs::exists(SidecarPath(path))) continue;
      EncodedMel y = ReadEncoded(path);
      EncodedMel x = DegradeEncoded(y, sigma_t);
      ds.pairs.push_back({std::move(x), std::move(y), path.stem().string()});
    }
  }
  Require(!ds.pairs.empty(), ErrorCode::kEmptySource, "no input files in " + source.string());
  Validate(ds);
  return ds;
}

std::vector<std::pair<fs::path, fs::path>> MatchPngPairs(const fs::path& natural_dir,
                                                         const fs::path& synth_dir) {
  const auto naturals = ListFiles(natural_dir, ".png");
  const auto synths = ListFiles(synth_dir, ".png");
  Require(!naturals.empty(), ErrorCode::kEmptySource, "no input files in " + natural_dir.string());
  std::set<fs::path> synth_names;
  for (const auto& p : synths) synth_names.insert(p.filename());
  std::vector<std::pair<fs::path, fs::path>> out;
  for (const auto& y : naturals) {
    Require(synth_names.erase(y.filename()) == 1, ErrorCode::kUnmatchedPair,
            "no counterpart for " + y.filename().string() + " in " + synth_dir.string());
    out.emplace_back(synth_dir / y.filename(), y);
  }
  Require(synth_names.empty(), ErrorCode::kUnmatchedPair,
          synth_names.empty() ? std::string()
                              : "no counterpart for " + synth_names.begin()->string() + " in " +
                                    natural_dir.string());
  return out;
}

namespace {

PairDataset LoadEntries(const std::vector<ManifestEntry>& entries) {
  PairDataset ds;
  for (const auto& [x_path, y_path] : entries) {
    TrainingPair p{ReadEncoded(x_path), ReadEncoded(y_path), y_path.stem().string()};
    Require(p.x.image.width == p.y.image.width && p.x.image.height == p.y.image.height,
            ErrorCode::kShapeMismatch,
            "shape mismatch between " + x_path.string() + " and " + y_path.string());
    ds.pairs.push_back(std::move(p));
  }
  Validate(ds);
  return ds;
}

}  // namespace

PairDataset MakePairsPaired(const fs::path& natural_dir, const fs::path& synth_dir) {
  return LoadEntries(MatchPngPairs(natural_dir, synth_dir));
}

std::vector<ManifestEntry> ReadManifest(const fs::path& path) {
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorCode::kFileNotFound, "cannot open " + path.string());
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::size_t tab = line.find('\t');
    Require(tab != std::string::npos && line.find('\t', tab + 1) == std::string::npos,
            ErrorCode::kMalformedFile,
            path.string() + ":" + std::to_string(line_no) + ": expected x_path<TAB>y_path");
    fs::path x = line.substr(0, tab);
    fs::path y = line.substr(tab + 1);
    out.emplace_back(x.is_relative() ? base / x : x, y.is_relative() ? base / y : y);
  }
  Require(!out.empty(), ErrorCode::kEmptySource, "manifest " + path.string() + " has no pairs");
  return out;
}

void WriteManifest(const std::vector<ManifestEntry>& entries, const fs::path& path) {
  std::string text;
  for (const auto& [x, y] : entries) text += x.generic_string() + "\t" + y.generic_string() + "\n";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  Require(static_cast<bool>(out), ErrorCode::kIoError, "short write to " + path.string());
}

PairDataset LoadManifest(const fs::path& path) { return LoadEntries(ReadManifest(path)); }

// --- Config ------------------------------------------------------------------------

void Validate(const TrainConfig& cfg) {
  auto bad = [](const std::string& msg) { Fail(ErrorCode::kInvalidArgument, "train config: " + msg); };
  if (cfg.steps < 1) bad("steps must be >= 1");
  if (cfg.batch_size < 1) bad("batch_size must be >= 1");
  if (!(cfg.adam.lr > 0.0)) bad("lr must be > 0");
  if (!(cfg.adam.beta1 >= 0.0 && cfg.adam.beta1 < 1.0)) bad("beta1 must be in [0, 1)");
  if (!(cfg.adam.beta2 >= 0.0 && cfg.adam.beta2 < 1.0)) bad("beta2 must be in [0, 1)");
  if (!(cfg.adam.eps > 0.0)) bad("eps must be > 0");
  if (!(cfg.lambda_l1 >= 0.0) || !std::isfinite(cfg.lambda_l1)) bad("lambda_l1 must be >= 0");
  Validate(cfg.generator);
  Validate(cfg.discriminator);
  if ((cfg.crop_h > 0) != (cfg.crop_w > 0) || cfg.crop_h < 0 || cfg.crop_w < 0) {
    bad("crop must be HxW with both positive, or none");
  }
  if (cfg.cropped()) {
    const int multiple = std::max({4, cfg.generator.spatial_multiple(),
                                   cfg.discriminator.spatial_multiple()});
    if (cfg.crop_h % multiple != 0 || cfg.crop_w % multiple != 0) {
      bad("crop dims must be divisible by " + std::to_string(multiple));
    }
  }
}

namespace {

std::string CropText(const TrainConfig& c) {
  return c.cropped() ? std::to_string(c.crop_h) + "x" + std::to_string(c.crop_w) : "none";
}

}  // namespace

void ApplyOverride(TrainConfig& cfg, const std::string& key, const std::string& value) {
  auto as_int = [&] { return static_cast<int>(kv::ToInt(key, value)); };
  if (key == "lr") cfg.adam.lr = kv::ToDouble(key, value);
  else if (key == "beta1") cfg.adam.beta1 = kv::ToDouble(key, value);
  else if (key == "beta2") cfg.adam.beta2 = kv::ToDouble(key, value);
  else if (key == "eps") cfg.adam.eps = kv::ToDouble(key, value);
  else if (key == "steps") cfg.steps = kv::ToInt(key, value);
  else if (key == "batch_size") cfg.batch_size = as_int();
  else if (key == "lambda_l1") cfg.lambda_l1 = kv::ToDouble(key, value);
  else if (key == "seed") {
    Require(!value.empty() && value.front() != '-', ErrorCode::kInvalidArgument,
            "seed must be non-negative");
    cfg.seed = static_cast<uint64_t>(kv::ToInt(key, value));
  } else if (key == "deterministic") cfg.deterministic = kv::ToBool(key, value);
  else if (key == "base_channels") cfg.generator.base_channels = as_int();
  else if (key == "n_downsample") cfg.generator.n_downsample = as_int();
  else if (key == "n_resblocks") cfg.generator.n_resblocks = as_int();
  else if (key == "n_enhancers") cfg.generator.n_enhancers = as_int();
  else if (key == "disc_base_channels") cfg.discriminator.base_channels = as_int();
  else if (key == "disc_n_layers") cfg.discriminator.n_layers = as_int();
  else if (key == "crop") {
    if (value == "none") {
      cfg.crop_h = cfg.crop_w = 0;
    } else {
      const std::size_t x = value.find('x');
      Require(x != std::string::npos, ErrorCode::kInvalidArgument,
              "crop must be HxW or none, got '" + value + "'");
      cfg.crop_h = static_cast<int>(kv::ToInt(key, value.substr(0, x)));
      cfg.crop_w = static_cast<int>(kv::ToInt(key, value.substr(x + 1)));
    }
  } else if (key == "loss_variant") {
    if (value == "vanilla") cfg.loss_variant = GanLossKind::kVanilla;
    else if (value == "least_squares") cfg.loss_variant = GanLossKind::kLeastSquares;
    else Fail(ErrorCode::kInvalidArgument, "loss_variant must be vanilla or least_squares");
  } else if (key == "gen_loss") {
    if (value == "non_saturating") cfg.gen_loss = GeneratorAdversarial::kNonSaturating;
    else if (value == "minimax") cfg.gen_loss = GeneratorAdversarial::kMinimax;
    else Fail(ErrorCode::kInvalidArgument, "gen_loss must be non_saturating or minimax");
  } else {
    Fail(ErrorCode::kUnknownKey, "unknown config key '" + key + "'");
  }
}

TrainConfig ParseTrainConfig(std::string_view text) {
  TrainConfig cfg;
  for (const auto& [k, v] : kv::Parse(text)) ApplyOverride(cfg, k, v);
  Validate(cfg);
  return cfg;
}

TrainConfig LoadTrainConfig(const fs::path& path) {
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorCode::kFileNotFound, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return ParseTrainConfig(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string FormatTrainConfig(const TrainConfig& c) {
  std::string out;
  auto line = [&](const char* k, const std::string& v) { out += std::string(k) + "=" + v + "\n"; };
  line("lr", kv::FormatDouble(c.adam.lr));
  line("beta1", kv::FormatDouble(c.adam.beta1));
  line("beta2", kv::FormatDouble(c.adam.beta2));
  line("eps", kv::FormatDouble(c.adam.eps));
  line("steps", std::to_string(c.steps));
  line("batch_size", std::to_string(c.batch_size));
  line("crop", CropText(c));
  line("lambda_l1", kv::FormatDouble(c.lambda_l1));
  line("seed", std::to_string(c.seed));
  line("loss_variant", c.loss_variant == GanLossKind::kVanilla ? "vanilla" : "least_squares");
  line("gen_loss",
       c.gen_loss == GeneratorAdversarial::kNonSaturating ? "non_saturating" : "minimax");
  line("deterministic", c.deterministic ? "true" : "false");
  line("base_channels", std::to_string(c.generator.base_channels));
  line("n_downsample", std::to_string(c.generator.n_downsample));
  line("n_resblocks", std::to_string(c.generator.n_resblocks));
  line("n_enhancers", std::to_string(c.generator.n_enhancers));
  line("disc_base_channels", std::to_string(c.discriminator.base_channels));
  line("disc_n_layers", std::to_string(c.discriminator.n_layers));
  return out;
}

// --- Checkpoints -------------------------------------------------------------------

Checkpoint InitCheckpoint(const TrainConfig& cfg) {
  Validate(cfg);
  Checkpoint ck;
  ck.generator = Generator<float>(cfg.generator, cfg.seed);
  ck.discriminator = MultiScaleDiscriminator<float>(cfg.discriminator, cfg.seed + 1);
  ck.opt_g = MakeAdamState(ck.generator.params().pointers());
  ck.opt_d = MakeAdamState(ck.discriminator.params().pointers());
  ck.config_echo = FormatTrainConfig(cfg);
  return ck;
}

namespace {

void PutParams(Container& c, const std::string& prefix, const ParameterSet<float>& params,
               const AdamState<float>& opt) {
  const auto& all = params.all();
  for (const auto& p : all) c.AddTensor(prefix + "/" + p.name, p.value);
  const bool has_state = opt.m.size() == all.size();
  for (std::size_t i = 0; i < all.size() && has_state; ++i) {
    c.AddTensor("adam_" + prefix + "/m/" + all[i].name, opt.m[i]);
    c.AddTensor("adam_" + prefix + "/v/" + all[i].name, opt.v[i]);
  }
  c.AddInts("adam_" + prefix + "/step", {opt.step});
}

void GetParams(const Container& c, const std::string& prefix, ParameterSet<float>& params,
               AdamState<float>& opt) {
  opt = MakeAdamState(params.pointers());
  auto& all = params.all();
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto& p = all[i];
    auto load = [&](const std::string& name, Tensor<float>& dst) {
      Tensor<float> t = c.GetTensor<float>(name);
      Require(t.shape() == p.value.shape(), ErrorCode::kShapeMismatch,
              "checkpoint tensor " + name + " has shape " + t.shape().str() + ", config expects " +
                  p.value.shape().str());
      dst = std::move(t);
    };
    load(prefix + "/" + p.name, p.value);
    load("adam_" + prefix + "/m/" + p.name, opt.m[i]);
    load("adam_" + prefix + "/v/" + p.name, opt.v[i]);
  }
  const auto step = c.GetInts("adam_" + prefix + "/step");
  Require(step.size() == 1, ErrorCode::kMalformedFile, "bad optimizer step record");
  opt.step = step[0];
}

}  // namespace

Container ToContainer(const Checkpoint& ck) {
  Container c;
  const GeneratorConfig& g = ck.generator.config();
  const DiscriminatorConfig& d = ck.discriminator.config();
  c.AddInts("gen_config", {g.in_channels, g.out_channels, g.base_channels, g.n_downsample,
                           g.n_resblocks, g.n_enhancers});
  c.AddInts("disc_config", {d.in_channels, d.base_channels, d.n_layers, d.n_scales});
  c.AddInts("step", {ck.step});
  c.AddText("train_config", ck.config_echo);
  PutParams(c, "g", ck.generator.params(), ck.opt_g);
  PutParams(c, "d", ck.discriminator.params(), ck.opt_d);
  return c;
}

Checkpoint FromContainer(const Container& c) {
  const auto gi = c.GetInts("gen_config");
  const auto di = c.GetInts("disc_config");
  const auto step = c.GetInts("step");
  Require(gi.size() == 6 && di.size() == 4 && step.size() == 1, ErrorCode::kMalformedFile,
          "checkpoint config records have the wrong length");
  auto narrow = [](int64_t v) {
    Require(v >= 0 && v < (1 << 20), ErrorCode::kMalformedFile, "checkpoint config out of range");
    return static_cast<int>(v);
  };
  GeneratorConfig g{narrow(gi[0]), narrow(gi[1]), narrow(gi[2]), narrow(gi[3]), narrow(gi[4]),
                    narrow(gi[5])};
  DiscriminatorConfig d{narrow(di[0]), narrow(di[1]), narrow(di[2]), narrow(di[3])};
  Checkpoint ck;
  ck.generator = Generator<float>(g, 0);
  ck.discriminator = MultiScaleDiscriminator<float>(d, 0);
  GetParams(c, "g", ck.generator.params(), ck.opt_g);
  GetParams(c, "d", ck.discriminator.params(), ck.opt_d);
  ck.step = step[0];
  ck.config_echo = c.GetText("train_config");
  const std::size_t expected = 4 + 3 * (ck.generator.params().all().size() +
                                        ck.discriminator.params().all().size()) + 2;
  Require(c.records().size() == expected, ErrorCode::kMalformedFile,
          "checkpoint has unexpected extra records");
  return ck;
}

void SaveCheckpoint(const Checkpoint& ck, const fs::path& path) {
  WriteContainer(ToContainer(ck), path);
}

Checkpoint LoadCheckpoint(const fs::path& path) {
  const Container c = ReadContainer(path);
  try {
    return FromContainer(c);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

// --- Training ----------------------------------------------------------------------

std::string FormatLossLog(const std::vector<LossRecord>& log) {
  std::string out = "step,loss_d,loss_g_adv,loss_g_l1\n";
  for (const auto& r : log) {
    out += std::to_string(r.step) + "," + kv::FormatDouble(r.loss_d) + "," +
           kv::FormatDouble(r.loss_g_adv) + "," + kv::FormatDouble(r.loss_g_l1) + "\n";
  }
  return out;
}

void WriteLossLog(const std::vector<LossRecord>& log, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIoError, "cannot write " + path.string());
  out << FormatLossLog(log);
  Require(static_cast<bool>(out), ErrorCode::kIoError, "short write to " + path.string());
}

Tensor<float> ImageToTensor(const GrayImage& image) {
  Tensor<float> t({1, 1, image.height, image.width});
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    t[i] = static_cast<float>(static_cast<double>(image.pixels[i]) / 65535.0 * 2.0 - 1.0);
  }
  return t;
}

GrayImage TensorToImage(const Tensor<float>& t) {
  Require(t.shape().n == 1 && t.shape().c == 1, ErrorCode::kShapeMismatch,
          "expected a single-channel image tensor, got " + t.shape().str());
  GrayImage img;
  img.height = t.shape().h;
  img.width = t.shape().w;
  img.pixels.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double u = std::clamp((static_cast<double>(t[i]) + 1.0) / 2.0, 0.0, 1.0);
    img.pixels[i] = Quantize16(u);
  }
  return img;
}

namespace {

struct Sample {
  Tensor<float> x;
  Tensor<float> y;
  int valid_w = 0;  // columns holding real frames
};

struct Batch {
  Tensor<float> x;
  Tensor<float> y;
};

// Pure function of (dataset, config): epoch-wise shuffles and crop offsets
// come from one generator seeded by cfg.seed.
class BatchSource {
 public:
  BatchSource(const std::vector<Sample>& samples, const TrainConfig& cfg)
      : samples_(samples), cfg_(cfg), rng_(cfg.seed ^ 0x9e3779b97f4a7c15ULL) {}

  Batch Next() {
    const int n = cfg_.batch_size;
    Shape s;
    Batch b;
    for (int i = 0; i < n; ++i) {
      const Sample& smp = samples_[NextIndex()];
      const Shape full = smp.x.shape();
      const int h = cfg_.cropped() ? cfg_.crop_h : full.h;
      const int w = cfg_.cropped() ? cfg_.crop_w : full.w;
      if (i == 0) {
        s = {n, 1, h, w};
        b.x = Tensor<float>(s);
        b.y = Tensor<float>(s);
      }
      int r0 = 0;
      int c0 = 0;
      if (cfg_.cropped()) {
        r0 = Uniform(full.h - h);
        c0 = Uniform((smp.valid_w >= w ? smp.valid_w : full.w) - w);
      }
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          b.x.at(i, 0, r, c) = smp.x.at(0, 0, r0 + r, c0 + c);
          b.y.at(i, 0, r, c) = smp.y.at(0, 0, r0 + r, c0 + c);
        }
      }
    }
    return b;
  }

 private:
  std::size_t NextIndex() {
    if (cursor_ == order_.size()) {
      order_.resize(samples_.size());
      for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
      // Fisher-Yates with explicit draws so the order is library independent.
      for (std::size_t i = order_.size(); i > 1; --i) {
        std::swap(order_[i - 1], order_[static_cast<std::size_t>(Uniform(static_cast<int>(i - 1)))]);
      }
      cursor_ = 0;
    }
    return order_[cursor_++];
  }

  // Uniform integer in [0, hi], by rejection on the raw 64-bit output.
  int Uniform(int hi) {
    const uint64_t range = static_cast<uint64_t>(hi) + 1;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    uint64_t v;
    do {
      v = rng_();
    } while (v >= limit);
    return static_cast<int>(v % range);
  }

  const std::vector<Sample>& samples_;
  const TrainConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

// Runs a BatchSource on a worker thread, at most `capacity` batches ahead.
// Batches come out in the order the source produces them.
class Prefetcher {
 public:
  Prefetcher(BatchSource& source, int64_t total, std::size_t capacity)
      : source_(source), capacity_(capacity), remaining_(total),
        worker_([this] { Run(); }) {}

  ~Prefetcher() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    worker_.join();
  }

  Batch Next() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !queue_.empty() || error_; });
    if (queue_.empty()) std::rethrow_exception(error_);
    Batch b = std::move(queue_.front());
    queue_.pop_front();
    cv_.notify_all();
    return b;
  }

 private:
  void Run() {
    try {
      while (remaining_-- > 0) {
        Batch b = source_.Next();
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return queue_.size() < capacity_ || stop_; });
        if (stop_) return;
        queue_.push_back(std::move(b));
        cv_.notify_all();
      }
    } catch (...) {
      std::lock_guard lock(mu_);
      error_ = std::current_exception();
      cv_.notify_all();
    }
  }

  BatchSource& source_;
  std::size_t capacity_;
  int64_t remaining_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Batch> queue_;
  std::exception_ptr error_;
  bool stop_ = false;
  std::thread worker_;
};

std::vector<Sample> PrepareSamples(const PairDataset& ds, const TrainConfig& cfg) {
  Validate(ds);
  const int multiple = std::max(cfg.generator.spatial_multiple(),
                                cfg.discriminator.spatial_multiple());
  std::vector<Sample> out;
  for (const auto& p : ds.pairs) {
    const int h = p.y.image.height;
    const int w = p.y.image.width;
    if (cfg.cropped()) {
      Require(h >= cfg.crop_h && w >= cfg.crop_w, ErrorCode::kShapeMismatch,
              "pair " + p.id + " (" + std::to_string(h) + "x" + std::to_string(w) +
                  ") is smaller than the crop");
    } else {
      Require(h % multiple == 0 && w % multiple == 0, ErrorCode::kShapeMismatch,
              "pair " + p.id + ": uncropped training needs H and W divisible by " +
                  std::to_string(multiple));
      Require(cfg.batch_size == 1 || (h == ds.pairs[0].y.image.height &&
                                       w == ds.pairs[0].y.image.width),
              ErrorCode::kShapeMismatch, "uncropped batches need equally sized images");
    }
    out.push_back({ImageToTensor(p.x.image), ImageToTensor(p.y.image),
                   std::min(w, std::max(p.y.meta.orig_frames, 1))});
  }
  return out;
}

}  // namespace

TrainResult Train(const PairDataset& ds, const TrainConfig& cfg, const TrainProgress& progress) {
  Validate(cfg);
  const std::vector<Sample> samples = PrepareSamples(ds, cfg);
  const LossOptions opts = cfg.loss_options();

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  ck = InitCheckpoint(cfg);
  Generator<float>& g = ck.generator;
  MultiScaleDiscriminator<float>& d = ck.discriminator;
  const auto g_params = g.params().pointers();
  const auto d_params = d.params().pointers();

  BatchSource source(samples, cfg);
  std::optional<Prefetcher> prefetch;
  if (!cfg.deterministic) prefetch.emplace(source, cfg.steps, 2);

  result.log.reserve(static_cast<std::size_t>(cfg.steps));
  for (int64_t step = 0; step < cfg.steps; ++step) {
    const Batch batch = prefetch ? prefetch->Next() : source.Next();
    LossRecord rec;
    rec.step = step;
    try {
      Tape<float> gt;
      Var<float> x = gt.Constant(batch.x);
      Var<float> y = gt.Constant(batch.y);
      Var<float> fake = g.Forward(gt, x, true);

      d.params().ZeroGrad();
      std::vector<Tensor<float>> fake_logits;
      {
        Tape<float> dt;
        Var<float> loss_d = LossDiscriminatorOnFake(dt, d, batch.x, batch.y, fake.value(), opts,
                                                    &fake_logits);
        rec.loss_d = loss_d.value()[0];
        dt.Backward(loss_d);
      }
      {
        Tape<float> st;
        std::vector<Var<float>> z;
        for (auto& t : fake_logits) z.push_back(st.Constant(std::move(t)));
        rec.loss_g_adv = GeneratorAdversarialTerm(z, opts).value()[0];
        Require(std::isfinite(rec.loss_g_adv), ErrorCode::kNonFiniteLoss,
                "generator adversarial loss is not finite");
      }
      AdamStep(d_params, ck.opt_d, cfg.adam);

      g.params().ZeroGrad();
      const GeneratorLoss<float> lg = LossGeneratorOnFake(gt, d, x, y, fake, opts);
      rec.loss_g_l1 = lg.l1.value()[0];
      gt.Backward(lg.total);
      AdamStep(g_params, ck.opt_g, cfg.adam);
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(step) + ": " + e.what());
    }
    ck.step = step + 1;
    result.log.push_back(rec);
    if (progress) progress(rec);
  }
  g.params().ZeroGrad();
  d.params().ZeroGrad();
  return result;
}

EncodedMel Enhance(Checkpoint& ck, const EncodedMel& input) {
  const GrayImage& img = input.image;
  const GeneratorConfig& gc = ck.generator.config();
  const int m = gc.spatial_multiple();
  Require(gc.in_channels == 1 && gc.out_channels == 1, ErrorCode::kShapeMismatch,
          "checkpoint generator is not single-channel");
  Require(img.height > 0 && img.width > 0 && img.height % m == 0 && img.width % m == 0,
          ErrorCode::kShapeMismatch,
          "image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
              " must have both sides divisible by " + std::to_string(m));
  Require(input.meta.n_mels == 0 || input.meta.n_mels == img.height, ErrorCode::kShapeMismatch,
          "sidecar n_mels disagrees with image height");
  const int valid = input.meta.orig_frames > 0 ? std::min(input.meta.orig_frames, img.width)
                                               : img.width;
  // G is trained on crops of real frames; mirror them into the padding so the
  // instance-norm statistics see the same kind of content.
  GrayImage filled = img;
  for (int r = 0; r < img.height; ++r) {
    for (int c = valid; c < img.width; ++c) {
      filled.at(r, c) = img.at(r, static_cast<int>(Reflect(c, valid)));
    }
  }
  EncodedMel out;
  out.meta = input.meta;
  out.image = TensorToImage(GeneratorInference(ck.generator, ImageToTensor(filled)));
  for (int r = 0; r < out.image.height; ++r) {
    for (int c = valid; c < out.image.width; ++c) out.image.at(r, c) = 0;
  }
  return out;
}

}  // namespace melfix
