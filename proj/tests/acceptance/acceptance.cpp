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


// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Pass criterion numbers to run a subset.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "melfix/codec.hpp"
#include "melfix/dsp.hpp"
#include "melfix/metrics.hpp"
#include "melfix/models.hpp"
#include "melfix/optim.hpp"
#include "melfix/png.hpp"
#include "melfix/training.hpp"
#include "oracles.hpp"
#include "png_oracle.hpp"

namespace fs = std::filesystem;
using namespace melfix;

namespace {

// Frozen after calibration on the synthetic corpus: GV(x)/GV(y) ~ 0.16.
constexpr double kDegradeSigma = 6.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string Fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

int Shell(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string Q(const fs::path& p) { return "'" + p.string() + "'"; }

// 1. STFT magnitude against the direct DFT.
Outcome DspOracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> len(64, 900);
  const StftConfig cfg{60, 16, 64, true};
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(static_cast<std::size_t>(len(rng)));
    for (double& v : x) v = u(rng);
    const Matrix got = StftMagnitude({x, 16000}, cfg);
    const Matrix want = testing::OracleStft(x, cfg);
    if (got.rows() != want.rows() || got.cols() != want.cols()) return {false, "shape differs"};
    worst = std::max(worst, testing::RelativeError(got, want));
  }
  const double sec = Seconds(t0);
  return {worst < 1e-10 && sec < 5.0,
          Fmt("max rel error %.2e (< 1e-10) over 100 signals, %.2f s (< 5 s)", worst, sec)};
}

// 2. Filterbank structure and the triangle formula.
Outcome Filterbank() {
  bool ok = true;
  std::string why;
  for (const char* name : {"desk16k", "paper48k"}) {
    const FeatureProfile p = ProfileByName(name);
    const Matrix fb = MelFilterbank(p.mel, p.stft.n_fft);
    ok = ok && fb.rows() == 80;
    long prev_peak = -1;
    for (std::size_t r = 0; r < fb.rows(); ++r) {
      const auto row = fb.row(r);
      std::size_t peak = 0;
      for (std::size_t k = 0; k < row.size(); ++k) {
        if (row[k] < 0.0) ok = false;
        if (row[k] > row[peak]) peak = k;
      }
      for (std::size_t k = 1; k <= peak; ++k) ok = ok && row[k] >= row[k - 1];
      for (std::size_t k = peak + 1; k < row.size(); ++k) ok = ok && row[k] <= row[k - 1];
      ok = ok && static_cast<long>(peak) > prev_peak;
      prev_peak = static_cast<long>(peak);
    }
    // Bins strictly inside the outermost centers get weight from some filter.
    const double m_hi = HzToMel(p.mel.f_max);
    const double first = MelToHz(m_hi / 81.0), last = MelToHz(m_hi * 80.0 / 81.0);
    for (std::size_t k = 0; k < fb.cols(); ++k) {
      const double f = static_cast<double>(k) * p.mel.sample_rate / p.stft.n_fft;
      if (f <= first || f >= last) continue;
      double col = 0;
      for (std::size_t r = 0; r < fb.rows(); ++r) col += fb(r, k);
      ok = ok && col > 0.0;
    }
    if (!ok && why.empty()) why = std::string(" (") + name + ")";
  }
  const MelConfig tiny{2, 0.0, 4000.0, 8000, -100.0};
  double err = 0;
  const Matrix got = MelFilterbank(tiny, 8), want = testing::OracleFilterbank(tiny, 8);
  for (std::size_t i = 0; i < want.size(); ++i) {
    err = std::max(err, std::abs(got.data()[i] - want.data()[i]));
  }
  // The full-size banks must agree with the formula as well.
  const auto desk = ProfileByName("desk16k");
  const double full = testing::RelativeError(MelFilterbank(desk.mel, desk.stft.n_fft),
                                             testing::OracleFilterbank(desk.mel, desk.stft.n_fft));
  return {ok && err < 1e-12 && full < 1e-12,
          "80 rows nonnegative, unimodal, increasing peaks, interior covered" + why +
              Fmt("; tiny case max error %.1e (< 1e-12), desk16k %.1e", err, full)};
}

// 3. Codec roundtrip and PNG exactness.
Outcome Codec() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(-100.0, 0.0);
  std::uniform_int_distribution<int> rows(1, 80), cols(1, 120);
  double worst = 0;
  bool png_exact = true;
  for (int i = 0; i < 1000; ++i) {
    MelSpectrogram mel;
    mel.values = Matrix(static_cast<std::size_t>(rows(rng)), static_cast<std::size_t>(cols(rng)));
    mel.mel.n_mels = static_cast<int>(mel.values.rows());
    for (double& v : mel.values.data()) v = u(rng);
    const EncodedMel enc = MelToImage(mel);
    const std::string bytes = EncodePngGray16(enc.image);
    const GrayImage back = DecodePngGray16(bytes);
    png_exact = png_exact && back == enc.image;
    // Independent decoder on the same bytes.
    const testing::RawPng raw = testing::OracleDecode(bytes);
    for (std::size_t p = 0; p < enc.image.pixels.size() && png_exact; ++p) {
      const uint16_t v = static_cast<uint16_t>(raw.rows[2 * p] << 8 | raw.rows[2 * p + 1]);
      png_exact = v == enc.image.pixels[p];
    }
    const MelSpectrogram dec = ImageToMel(back, enc.meta);
    for (std::size_t k = 0; k < mel.values.size(); ++k) {
      worst = std::max(worst, std::abs(dec.values.data()[k] - mel.values.data()[k]));
    }
  }
  const double sec = Seconds(t0);
  return {worst <= 7.63e-4 && png_exact && sec < 10.0,
          Fmt("max cell error %.3e dB (<= 7.63e-4), ", worst) +
              (png_exact ? "PNG bit-exact" : "PNG MISMATCH") +
              Fmt(", 1000 matrices in %.2f s (< 10 s)", sec)};
}

// 4. Finite-difference gradient checks.
Outcome GradChecks() {
  const auto t0 = Clock::now();
  const auto results = RunStandardGradChecks(1234, 1e-6);
  double worst_op = 0, worst_chain = 0;
  for (const auto& r : results) {
    double& w = r.op.rfind("chain_", 0) == 0 ? worst_chain : worst_op;
    w = std::max(w, r.max_rel_error);
  }
  const double sec = Seconds(t0);
  return {worst_op < 1e-5 && worst_chain < 1e-4 && sec < 60.0 && results.size() >= 17,
          Fmt("%.0f checks; ops max %.2e (< 1e-5), chains max %.2e (< 1e-4), %.2f s (< 60 s)",
              static_cast<double>(results.size()), worst_op, worst_chain, sec)};
}

// 5. Losses at initialization.
Outcome InitLosses() {
  const auto dir = testing::ScratchDir("acc_init");
  testing::WriteCorpus(dir, testing::SyntheticCorpus(2, 16000, 1.0, 5));
  const auto ds = MakePairsDegrade(dir, kDegradeSigma);
  TrainConfig cfg;
  cfg.steps = 1;
  const auto res = Train(ds, cfg);
  const double d = res.log[0].loss_d, g = res.log[0].loss_g_adv;
  const double ln2 = std::numbers::ln2;
  return {std::abs(d - 6 * ln2) <= 1e-6 && std::abs(g - 3 * ln2) <= 1e-6,
          Fmt("loss_d %.9f vs 6 ln2 %.9f; loss_g_adv %.9f vs 3 ln2 %.9f (tol 1e-6)", d, 6 * ln2, g,
              3 * ln2)};
}

// 6. Overfit restoration on degraded speech-like mels.
Outcome Restoration() {
  const auto t0 = Clock::now();
  const auto dir = testing::ScratchDir("acc_restore");
  testing::WriteCorpus(dir, testing::SyntheticCorpus(8, 16000, 1.0));
  const auto ds = MakePairsDegrade(dir, kDegradeSigma, "desk16k");
  TrainConfig cfg;
  cfg.steps = 2000;
  cfg.batch_size = 2;
  cfg.crop_h = cfg.crop_w = 64;
  cfg.lambda_l1 = 10.0;
  cfg.seed = 17;
  auto res = Train(ds, cfg, [](const LossRecord& r) {
    if ((r.step + 1) % 500 == 0) {
      std::fprintf(stderr, "  restoration: step %lld, l1 %.4f\n",
                   static_cast<long long>(r.step + 1), r.loss_g_l1);
    }
  });
  double l1_x = 0, l1_g = 0, gv_x = 0, gv_g = 0;
  for (const auto& p : ds.pairs) {
    const auto y = ImageToMel(p.y.image, p.y.meta);
    const auto x = ImageToMel(p.x.image, p.x.meta);
    const auto e = Enhance(res.checkpoint, p.x);
    const auto g = ImageToMel(e.image, e.meta);
    l1_x += MeanAbsDifference(x, y);
    l1_g += MeanAbsDifference(g, y);
    gv_x += GvRatioMean(x, y);
    gv_g += GvRatioMean(g, y);
  }
  const double n = static_cast<double>(ds.pairs.size());
  l1_x /= n, l1_g /= n, gv_x /= n, gv_g /= n;
  const double sec = Seconds(t0);
  const bool calibrated = gv_x < 0.5;
  const bool a = l1_g < 0.5 * l1_x;
  const bool b = gv_g >= 0.6 && gv_g <= 1.4;
  return {calibrated && a && b && sec <= 1800.0,
          Fmt("sigma %.1f, GV(x)/GV(y) %.3f (< 0.5); L1 G %.3f dB vs x %.3f dB", kDegradeSigma, gv_x,
              l1_g, l1_x) +
              Fmt(" (ratio %.3f < 0.5); GV(G)/GV(y) %.3f in [0.6, 1.4]; %.0f s (<= 1800 s)",
                  l1_g / l1_x, gv_g, sec)};
}

// 7. Two identical CLI training runs.
Outcome Determinism() {
  const auto root = testing::ScratchDir("acc_determinism");
  testing::WriteCorpus(root / "wav", testing::SyntheticCorpus(4, 16000, 1.0, 77));
  const std::string cli = MELFIX_CLI_PATH;
  if (Shell(cli + " extract " + Q(root / "wav") + " " + Q(root / "nat")) != 0 ||
      Shell(cli + " degrade " + Q(root / "nat") + " " + Q(root / "syn") + " --sigma 4") != 0 ||
      Shell(cli + " pack " + Q(root / "nat") + " " + Q(root / "syn") + " " + Q(root / "pairs.tsv")) !=
          0) {
    return {false, "data preparation through the CLI failed"};
  }
  WriteFileBytes(root / "train.cfg", "steps=25\nseed=17\ndeterministic=true\n");
  for (const char* run : {"a", "b"}) {
    const std::string ck = (root / (std::string(run) + ".ckpt")).string();
    if (Shell(cli + " train " + Q(root / "pairs.tsv") + " " + Q(root / "train.cfg") + " " + Q(ck) +
              " --every 0") != 0) {
      return {false, std::string("training run ") + run + " failed"};
    }
  }
  const bool ck_same = ReadFileBytes(root / "a.ckpt") == ReadFileBytes(root / "b.ckpt");
  const bool log_same = ReadFileBytes(root / "a.loss.csv") == ReadFileBytes(root / "b.loss.csv");
  return {ck_same && log_same,
          std::string("checkpoints ") + (ck_same ? "bit-identical" : "DIFFER") + ", loss logs " +
              (log_same ? "bit-identical" : "DIFFER") + " (25 steps, seed 17, two processes)"};
}

// 8. Comparison figure from the CLI.
Outcome Figure() {
  const auto root = testing::ScratchDir("acc_figure");
  testing::WriteCorpus(root / "wav", testing::SyntheticCorpus(1, 16000, 1.0, 88));
  const std::string cli = MELFIX_CLI_PATH;
  if (Shell(cli + " extract " + Q(root / "wav") + " " + Q(root / "nat")) != 0) {
    return {false, "extract failed"};
  }
  const auto nat = ReadEncoded(root / "nat" / "utt0.png");
  const auto y = ImageToMel(nat.image, nat.meta);
  const auto x = Oversmooth(y, kDegradeSigma);
  auto e = y;  // a third, distinct panel
  for (double& v : e.values.data()) v = std::max(-100.0, v - 20.0);
  SaveMelFeatures(x, root / "syn.mel");
  SaveMelFeatures(e, root / "enh.mel");
  if (Shell(cli + " plot " + Q(root / "nat" / "utt0.png") + " " + Q(root / "syn.mel") + " " +
            Q(root / "enh.mel") + " " + Q(root / "fig.png")) != 0) {
    return {false, "plot failed"};
  }
  const RgbImage fig = ReadPngRgb(root / "fig.png");
  const int h = static_cast<int>(y.n_mels()), w = static_cast<int>(y.frames());
  const bool dims = fig.width == w && fig.height == 3 * h + 2 * kTriptychMargin;
  auto row_bytes = [](const RgbImage& img, int r) {
    const auto* p = img.rgb.data() + static_cast<std::size_t>(r) * img.width * 3;
    return std::vector<uint8_t>(p, p + static_cast<std::size_t>(img.width) * 3);
  };
  int panels = 0;
  bool order = dims, margins = dims;
  if (dims) {
    const MelSpectrogram* expect[3] = {&y, &x, &e};
    for (int k = 0; k < 3; ++k) {
      const RgbImage panel = RenderMel(*expect[k]);
      bool same = true;
      for (int r = 0; r < h; ++r) same = same && row_bytes(fig, k * (h + kTriptychMargin) + r) == row_bytes(panel, r);
      order = order && same;
      panels += same ? 1 : 0;
    }
    const std::vector<uint8_t> white(static_cast<std::size_t>(w) * 3, 255);
    for (int k = 0; k < 2; ++k)
      for (int m = 0; m < kTriptychMargin; ++m)
        margins = margins && row_bytes(fig, k * (h + kTriptychMargin) + h + m) == white;
  }
  bool monotone = true;
  const auto& lut = ColorLut();
  for (std::size_t i = 1; i < lut.size(); ++i) monotone = monotone && Luminance(lut[i]) >= Luminance(lut[i - 1]);
  return {dims && order && margins && monotone && panels == 3,
          Fmt("%.0f panels in order original/synthesized/enhanced, %.0fx%.0f px (= 3*%.0f+8 x T), ",
              panels, fig.height, fig.width, h) +
              (margins ? "white margins, " : "MARGINS WRONG, ") +
              (monotone ? "LUT luminance monotone" : "LUT NOT MONOTONE")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"dsp oracle equivalence", DspOracle},
      {"mel filterbank properties", Filterbank},
      {"codec roundtrip", Codec},
      {"gradient checks", GradChecks},
      {"init-loss closed forms", InitLosses},
      {"overfit restoration", Restoration},
      {"determinism", Determinism},
      {"figure emission", Figure},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
