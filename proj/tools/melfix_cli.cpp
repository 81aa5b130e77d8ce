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


// melfix command-line tool. Talks to the library only through melfix.h.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "melfix/melfix.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Thrown for problems with the command line or its paths.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a library call fails.
struct CallError : std::runtime_error {
  CallError(int status, const std::string& context)
      : std::runtime_error(context + ": " + melfix_status_name(status) + ": " +
                           melfix_last_error()) {}
};

void Check(int status, const std::string& context) {
  if (status != MELFIX_OK) throw CallError(status, context);
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Mel = std::unique_ptr<melfix_mel, Deleter<melfix_mel, melfix_mel_free>>;
using Image = std::unique_ptr<melfix_image, Deleter<melfix_image, melfix_image_free>>;
using Config =
    std::unique_ptr<melfix_train_config, Deleter<melfix_train_config, melfix_train_config_free>>;
using Dataset = std::unique_ptr<melfix_dataset, Deleter<melfix_dataset, melfix_dataset_free>>;
using Ckpt = std::unique_ptr<melfix_checkpoint, Deleter<melfix_checkpoint, melfix_checkpoint_free>>;

std::string Num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void RequireDir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir.string());
}

void RequireFile(const fs::path& file) {
  if (!fs::is_regular_file(file)) throw UsageError("no such file: " + file.string());
}

std::vector<fs::path> ListInputs(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path Sidecar(const fs::path& png) {
  fs::path p = png;
  return p.replace_extension(".meta");
}

// PNGs that carry a sidecar.
std::vector<fs::path> ListEncoded(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& p : ListInputs(dir, ".png")) {
    if (fs::exists(Sidecar(p))) out.push_back(p);
  }
  return out;
}

int WorkerCount(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MELFIX_THREADS")) {
    int cap = 0;
    const std::string s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), cap);
    if (ec != std::errc() || ptr != s.data() + s.size() || cap < 1) {
      throw UsageError("MELFIX_THREADS must be a positive integer");
    }
    n = std::min(n, static_cast<unsigned>(cap));
  }
  return static_cast<int>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

// Runs job(i) for every input on up to MELFIX_THREADS workers. Each job
// returns its summary line or throws; lines are printed in input order.
// Returns the number of failed jobs.
template <class Job>
int ForEachFile(const std::vector<fs::path>& inputs, Job job) {
  std::vector<std::string> lines(inputs.size());
  std::vector<char> failed(inputs.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      try {
        lines[i] = job(inputs[i]);
      } catch (const std::exception& e) {
        lines[i] = inputs[i].string() + ": error: " + e.what();
        failed[i] = 1;
      }
    }
  };
  const int n = WorkerCount(inputs.size());
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  int failures = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::fprintf(failed[i] ? stderr : stdout, "%s\n", lines[i].c_str());
    failures += failed[i];
  }
  return failures;
}

Image ReadImage(const fs::path& png) {
  melfix_image* raw = nullptr;
  Check(melfix_image_read(png.c_str(), &raw), png.string());
  return Image(raw);
}

void WriteImage(const melfix_image* image, const fs::path& png) {
  Check(melfix_image_write(image, png.c_str()), png.string());
}

Mel ImageToMel(const melfix_image* image, const fs::path& context) {
  melfix_mel* raw = nullptr;
  Check(melfix_image_to_mel(image, &raw), context.string());
  return Mel(raw);
}

// A mel from a feature file (.mel) or an encoded image (.png + sidecar).
Mel LoadAnyMel(const fs::path& path) {
  RequireFile(path);
  if (path.extension() == ".mel") {
    melfix_mel* raw = nullptr;
    Check(melfix_mel_load(path.c_str(), &raw), path.string());
    return Mel(raw);
  }
  Image img = ReadImage(path);
  return ImageToMel(img.get(), path);
}

void SaveMel(const melfix_mel* mel, const fs::path& path) {
  Check(melfix_mel_save(mel, path.c_str()), path.string());
}

// --- Commands -------------------------------------------------------------------

int CmdExtract(const fs::path& in_dir, const fs::path& out_dir, const std::string& profile) {
  RequireDir(in_dir);
  if (profile != "desk16k" && profile != "paper48k") {
    throw UsageError("profile must be desk16k or paper48k");
  }
  const auto wavs = ListInputs(in_dir, ".wav");
  if (wavs.empty()) throw UsageError("no input files in " + in_dir.string());
  fs::create_directories(out_dir);
  const int failures = ForEachFile(wavs, [&](const fs::path& wav) {
    melfix_mel* raw = nullptr;
    Check(melfix_mel_from_wav(wav.c_str(), profile.c_str(), &raw), wav.string());
    Mel mel(raw);
    const std::string stem = wav.stem().string();
    SaveMel(mel.get(), out_dir / (stem + ".mel"));
    melfix_image* img_raw = nullptr;
    Check(melfix_image_from_mel(mel.get(), -100.0, 0.0, 16, &img_raw), wav.string());
    Image img(img_raw);
    WriteImage(img.get(), out_dir / (stem + ".png"));
    int n_mels = 0, frames = 0;
    Check(melfix_mel_shape(mel.get(), &n_mels, &frames), wav.string());
    return stem + ": " + std::to_string(n_mels) + " mels x " + std::to_string(frames) +
           " frames -> " + (out_dir / (stem + ".png")).string();
  });
  return failures == 0 ? kExitOk : kExitFailure;
}

int CmdDegrade(const fs::path& in_dir, const fs::path& out_dir, double sigma) {
  RequireDir(in_dir);
  if (!(sigma >= 0.0)) throw UsageError("sigma must be >= 0");
  const auto pngs = ListEncoded(in_dir);
  if (pngs.empty()) throw UsageError("no input files in " + in_dir.string());
  fs::create_directories(out_dir);
  const int failures = ForEachFile(pngs, [&](const fs::path& png) {
    Image natural = ReadImage(png);
    melfix_image* raw = nullptr;
    Check(melfix_image_degrade(natural.get(), sigma, &raw), png.string());
    Image degraded(raw);
    const fs::path out = out_dir / png.filename();
    WriteImage(degraded.get(), out);
    Mel mel = ImageToMel(degraded.get(), out);
    SaveMel(mel.get(), fs::path(out).replace_extension(".mel"));
    return png.stem().string() + ": sigma " + Num(sigma) + " -> " + out.string();
  });
  return failures == 0 ? kExitOk : kExitFailure;
}

int CmdPack(const fs::path& natural_dir, const fs::path& input_dir, const fs::path& manifest) {
  RequireDir(natural_dir);
  RequireDir(input_dir);
  if (ListEncoded(natural_dir).empty()) {
    throw UsageError("no input files in " + natural_dir.string());
  }
  size_t pairs = 0;
  Check(melfix_pack_manifest(natural_dir.c_str(), input_dir.c_str(), manifest.c_str(), &pairs),
        manifest.string());
  std::printf("%zu pairs -> %s\n", pairs, manifest.c_str());
  return kExitOk;
}

int CmdTrain(const fs::path& manifest, const std::string& config_path, const fs::path& out_ckpt,
             const std::vector<std::string>& overrides, std::string log_path, int every) {
  RequireFile(manifest);
  melfix_train_config* cfg_raw = nullptr;
  if (config_path == "-") {
    Check(melfix_train_config_default(&cfg_raw), "config");
  } else {
    RequireFile(config_path);
    Check(melfix_train_config_load(config_path.c_str(), &cfg_raw), config_path);
  }
  Config cfg(cfg_raw);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    const int rc = melfix_train_config_set(cfg.get(), kv.substr(0, eq).c_str(),
                                           kv.substr(eq + 1).c_str());
    if (rc != MELFIX_OK) throw UsageError(std::string("--set ") + kv + ": " + melfix_last_error());
  }
  if (log_path.empty()) log_path = fs::path(out_ckpt).replace_extension(".loss.csv").string();

  melfix_dataset* ds_raw = nullptr;
  Check(melfix_dataset_from_manifest(manifest.c_str(), &ds_raw), manifest.string());
  Dataset ds(ds_raw);
  size_t pairs = 0;
  Check(melfix_dataset_size(ds.get(), &pairs), manifest.string());
  std::printf("training on %zu pairs\n", pairs);
  std::fflush(stdout);

  struct Progress {
    int every;
  } progress{every};
  auto report = [](int64_t step, double d, double adv, double l1, void* user) {
    const int every = static_cast<Progress*>(user)->every;
    if (every > 0 && step % every == 0) {
      std::printf("step %lld loss_d %.5f loss_g_adv %.5f loss_g_l1 %.5f\n",
                  static_cast<long long>(step), d, adv, l1);
      std::fflush(stdout);
    }
  };
  melfix_checkpoint* ck_raw = nullptr;
  Check(melfix_train(ds.get(), cfg.get(), log_path.c_str(), report, &progress, &ck_raw), "train");
  Ckpt ck(ck_raw);
  Check(melfix_checkpoint_save(ck.get(), out_ckpt.c_str()), out_ckpt.string());
  std::printf("checkpoint -> %s\nloss log -> %s\n", out_ckpt.c_str(), log_path.c_str());
  return kExitOk;
}

int CmdEnhance(const fs::path& ckpt_path, const fs::path& in, const fs::path& out) {
  RequireFile(ckpt_path);
  std::vector<fs::path> inputs;
  const bool dir_mode = fs::is_directory(in);
  if (dir_mode) {
    inputs = ListEncoded(in);
    if (inputs.empty()) throw UsageError("no input files in " + in.string());
    fs::create_directories(out);
  } else {
    RequireFile(in);
    inputs.push_back(in);
  }
  melfix_checkpoint* raw = nullptr;
  Check(melfix_checkpoint_load(ckpt_path.c_str(), &raw), ckpt_path.string());
  Ckpt ck(raw);
  // Inference reuses one checkpoint, so files are processed in sequence.
  int failures = 0;
  for (const auto& png : inputs) {
    try {
      const fs::path dst = dir_mode ? out / png.filename() : out;
      Image x = ReadImage(png);
      melfix_image* y_raw = nullptr;
      Check(melfix_enhance(ck.get(), x.get(), &y_raw), png.string());
      Image y(y_raw);
      WriteImage(y.get(), dst);
      Mel mel = ImageToMel(y.get(), dst);
      SaveMel(mel.get(), fs::path(dst).replace_extension(".mel"));
      std::printf("%s -> %s\n", png.c_str(), dst.c_str());
    } catch (const CallError& e) {
      std::fprintf(stderr, "%s\n", e.what());
      ++failures;
    }
  }
  return failures == 0 ? kExitOk : kExitFailure;
}

int CmdEval(const fs::path& a_dir, const fs::path& b_dir, const fs::path& report) {
  RequireDir(a_dir);
  RequireDir(b_dir);
  std::vector<fs::path> inputs = ListEncoded(a_dir);
  if (inputs.empty()) inputs = ListInputs(a_dir, ".mel");
  if (inputs.empty()) throw UsageError("no input files in " + a_dir.string());
  struct Row {
    double lsd = 0.0;
    double gv = 0.0;
  };
  std::vector<Row> rows(inputs.size());
  std::mutex mu;
  const int failures = ForEachFile(inputs, [&](const fs::path& a_path) {
    const fs::path b_path = b_dir / a_path.filename();
    if (!fs::exists(b_path)) {
      throw std::runtime_error("UnmatchedPair: no " + a_path.filename().string() + " in " +
                               b_dir.string());
    }
    Mel a = LoadAnyMel(a_path);
    Mel b = LoadAnyMel(b_path);
    Row r;
    Check(melfix_lsd(a.get(), b.get(), &r.lsd), a_path.string());
    Check(melfix_gv_ratio_mean(a.get(), b.get(), &r.gv), a_path.string());
    const auto idx = static_cast<std::size_t>(
        std::find(inputs.begin(), inputs.end(), a_path) - inputs.begin());
    {
      std::lock_guard lock(mu);
      rows[idx] = r;
    }
    return a_path.stem().string() + ": lsd " + Num(r.lsd) + " dB, gv_ratio_mean " + Num(r.gv);
  });
  if (failures > 0) return kExitFailure;
  std::string csv = "id,lsd,gv_ratio_mean\n";
  double lsd_sum = 0.0, gv_sum = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    csv += inputs[i].stem().string() + "," + Num(rows[i].lsd) + "," + Num(rows[i].gv) + "\n";
    lsd_sum += rows[i].lsd;
    gv_sum += rows[i].gv;
  }
  std::ofstream out(report, std::ios::binary | std::ios::trunc);
  out << csv;
  if (!out) throw std::runtime_error("cannot write " + report.string());
  const double n = static_cast<double>(inputs.size());
  std::printf("mean lsd %s dB, mean gv_ratio %s over %zu files -> %s\n", Num(lsd_sum / n).c_str(),
              Num(gv_sum / n).c_str(), inputs.size(), report.c_str());
  return kExitOk;
}

int CmdPlot(const fs::path& orig, const fs::path& synth, const fs::path& enhanced,
            const fs::path& out) {
  Mel a = LoadAnyMel(orig);
  Mel b = LoadAnyMel(synth);
  Mel c = LoadAnyMel(enhanced);
  Check(melfix_plot_triptych(a.get(), b.get(), c.get(), out.c_str()), out.string());
  std::printf("triptych -> %s\n", out.c_str());
  return kExitOk;
}

int CmdGradcheck() {
  constexpr double kLimit = 1e-4;
  struct Tally {
    int failed = 0;
  } tally;
  auto report = [](const char* op, double err, double tol, void* user) {
    const bool ok = err < kLimit;
    std::printf("%-28s max_rel_error %.3e  (op tolerance %.0e) %s\n", op, err, tol,
                ok ? "ok" : "FAIL");
    if (!ok) ++static_cast<Tally*>(user)->failed;
  };
  double worst = 0.0;
  Check(melfix_gradcheck(report, &tally, &worst), "gradcheck");
  std::printf("worst %.3e\n", worst);
  return tally.failed == 0 ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"melfix: mel-spectrogram GAN postfilter toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(melfix_version()));

  std::string in_dir, out_dir, profile = "desk16k";
  auto* extract = app.add_subcommand("extract", "wav files -> mel features, PNGs and sidecars");
  extract->add_option("in_dir", in_dir)->required();
  extract->add_option("out_dir", out_dir)->required();
  extract->add_option("--profile", profile, "desk16k or paper48k")->capture_default_str();

  double sigma = 4.0;
  auto* degrade = app.add_subcommand("degrade", "time-axis blur of encoded mels");
  degrade->add_option("in_dir", in_dir)->required();
  degrade->add_option("out_dir", out_dir)->required();
  degrade->add_option("--sigma", sigma, "blur sigma in frames")->capture_default_str();

  std::string natural_dir, input_dir, manifest;
  auto* pack = app.add_subcommand("pack", "pair natural and input PNGs into a manifest");
  pack->add_option("natural_dir", natural_dir)->required();
  pack->add_option("input_dir", input_dir)->required();
  pack->add_option("out_manifest", manifest)->required();

  std::string config, out_ckpt, log_path;
  std::vector<std::string> overrides;
  int every = 100;
  auto* train = app.add_subcommand("train", "train the conditional GAN");
  train->add_option("manifest", manifest)->required();
  train->add_option("config", config, "key=value config file, or - for defaults")->required();
  train->add_option("out_ckpt", out_ckpt)->required();
  train->add_option("--set", overrides, "override a config key (key=value)");
  train->add_option("--log", log_path, "loss CSV (default: out_ckpt with a .loss.csv extension)");
  train->add_option("--every", every, "progress interval in steps, 0 for none")
      ->capture_default_str();

  std::string ckpt, in, out;
  auto* enhance = app.add_subcommand("enhance", "run the generator on a PNG or a directory");
  enhance->add_option("ckpt", ckpt)->required();
  enhance->add_option("in", in)->required();
  enhance->add_option("out", out)->required();

  std::string a_dir, b_dir, report;
  auto* eval = app.add_subcommand("eval", "LSD and GV ratio of a_dir against b_dir");
  eval->add_option("a_dir", a_dir)->required();
  eval->add_option("b_dir", b_dir)->required();
  eval->add_option("report", report)->required();

  std::string orig, synth, enhanced;
  auto* plot = app.add_subcommand("plot", "original / synthesized / enhanced comparison figure");
  plot->add_option("orig", orig)->required();
  plot->add_option("synth", synth)->required();
  plot->add_option("enhanced", enhanced)->required();
  plot->add_option("out", out)->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*extract) return CmdExtract(in_dir, out_dir, profile);
    if (*degrade) return CmdDegrade(in_dir, out_dir, sigma);
    if (*pack) return CmdPack(natural_dir, input_dir, manifest);
    if (*train) return CmdTrain(manifest, config, out_ckpt, overrides, log_path, every);
    if (*enhance) return CmdEnhance(ckpt, in, out);
    if (*eval) return CmdEval(a_dir, b_dir, report);
    if (*plot) return CmdPlot(orig, synth, enhanced, out);
    if (*gradcheck) return CmdGradcheck();
  } catch (const UsageError& e) {
    std::fprintf(stderr, "melfix: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "melfix: %s\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
