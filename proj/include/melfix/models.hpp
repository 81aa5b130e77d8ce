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

// Conditional image-to-image GAN used as a mel-spectrogram postfilter.
//
// Generator: 7x7 conv -> strided downsampling convs -> residual blocks ->
// transposed-conv upsampling -> 7x7 conv -> tanh, all with instance norm and
// ReLU in between. An optional local enhancer runs the global network on a
// 2x downsampled input and refines its features at full resolution.
//
// Discriminator: three PatchGAN networks, each judging the channel
// concatenation (condition, candidate) at scales 1, 1/2 and 1/4 of the input.
//
// The last conv of the generator and of every discriminator starts at zero,
// so at initialization G(x) = 0 and every logit is 0.

#ifndef MELFIX_MODELS_HPP_
#define MELFIX_MODELS_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "melfix/autodiff.hpp"
#include "melfix/tensor.hpp"

namespace melfix {

struct GeneratorConfig {
  int in_channels = 1;
  int out_channels = 1;
  int base_channels = 16;
  int n_downsample = 2;
  int n_resblocks = 3;
  int n_enhancers = 0;

  // H and W of every input must be a multiple of this.
  int spatial_multiple() const { return 1 << (n_downsample + (n_enhancers > 0 ? 1 : 0)); }

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

struct DiscriminatorConfig {
  int in_channels = 2;
  int base_channels = 16;
  int n_layers = 3;   // stride-2 4x4 convs per PatchGAN
  int n_scales = 3;

  // H and W of the full-scale input must be a multiple of this.
  int spatial_multiple() const { return (1 << (n_scales - 1)) * (1 << n_layers); }

  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

void Validate(const GeneratorConfig& cfg);
void Validate(const DiscriminatorConfig& cfg);

// An ordered, named collection of parameters.
template <class T>
class ParameterSet {
 public:
  Parameter<T>& Add(const std::string& name, Tensor<T> value);
  Parameter<T>& Get(const std::string& name);
  const Parameter<T>& Get(const std::string& name) const;
  bool Contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Parameter<T>>& all() { return params_; }
  const std::vector<Parameter<T>>& all() const { return params_; }
  std::vector<Parameter<T>*> pointers();
  std::size_t scalar_count() const;
  void ZeroGrad();

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (a.params_.size() != b.params_.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i) {
      if (a.params_[i].name != b.params_[i].name || !(a.params_[i].value == b.params_[i].value)) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<Parameter<T>> params_;
  std::map<std::string, std::size_t> index_;
};

template <class T>
class Generator {
 public:
  Generator() = default;
  // Conv weights ~ N(0, 0.02), norm gains ~ N(1, 0.02), biases 0, output conv 0.
  // Global-network parameters are drawn first, so they do not depend on
  // n_enhancers.
  Generator(const GeneratorConfig& cfg, uint64_t seed);

  // x: [N, in_channels, H, W] -> [N, out_channels, H, W] in (-1, 1).
  Var<T> Forward(Tape<T>& tape, Var<T> x, bool trainable = true);

  const GeneratorConfig& config() const { return cfg_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  friend bool operator==(const Generator&, const Generator&) = default;

 private:
  Var<T> GlobalFeatures(Tape<T>& tape, Var<T> x, bool trainable);
  Var<T> ResBlock(Tape<T>& tape, Var<T> h, const std::string& prefix, bool trainable);
  Var<T> P(Tape<T>& tape, const std::string& name, bool trainable);

  GeneratorConfig cfg_;
  ParameterSet<T> params_;
};

template <class T>
class MultiScaleDiscriminator {
 public:
  MultiScaleDiscriminator() = default;
  MultiScaleDiscriminator(const DiscriminatorConfig& cfg, uint64_t seed);

  // Patch logits of discriminator `scale` for an already-pooled pair input
  // [N, in_channels, H, W] -> [N, 1, H / 2^n_layers, W / 2^n_layers].
  Var<T> ForwardScale(Tape<T>& tape, int scale, Var<T> pair, bool trainable = true);
  // Logits of every scale for condition x and candidate y.
  std::vector<Var<T>> Forward(Tape<T>& tape, Var<T> x, Var<T> y, bool trainable = true);

  const DiscriminatorConfig& config() const { return cfg_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  friend bool operator==(const MultiScaleDiscriminator&, const MultiScaleDiscriminator&) =
      default;

 private:
  Var<T> P(Tape<T>& tape, const std::string& name, bool trainable);

  DiscriminatorConfig cfg_;
  ParameterSet<T> params_;
};

// [t, pool(t), pool(pool(t)), ...] with `levels` entries.
template <class T>
std::vector<Var<T>> Pyramid(Var<T> t, int levels = 3);

enum class GanLossKind { kVanilla, kLeastSquares };
enum class GeneratorAdversarial { kNonSaturating, kMinimax };

struct LossOptions {
  GanLossKind kind = GanLossKind::kVanilla;
  GeneratorAdversarial generator = GeneratorAdversarial::kNonSaturating;
  double lambda_l1 = 0.0;
};

// Criterion on one logit map: vanilla = bce_with_logits, least squares = mse.
template <class T>
Var<T> GanCriterion(Var<T> logits, double target, GanLossKind kind);

// sum_i [ crit(D_i(x_i, y_i), 1) + crit(D_i(x_i, G(x)_i), 0) ] with G(x)
// evaluated on a private tape, so nothing flows back into the generator.
template <class T>
Var<T> LossDiscriminator(Tape<T>& tape, Generator<T>& g, MultiScaleDiscriminator<T>& d,
                         const Tensor<T>& x, const Tensor<T>& y, const LossOptions& opts);

// Variant taking a precomputed (detached) generator output. Optionally copies
// out the per-scale logits on the fake pair.
template <class T>
Var<T> LossDiscriminatorOnFake(Tape<T>& tape, MultiScaleDiscriminator<T>& d, const Tensor<T>& x,
                               const Tensor<T>& y, const Tensor<T>& fake,
                               const LossOptions& opts,
                               std::vector<Tensor<T>>* fake_logits = nullptr);

template <class T>
struct GeneratorLoss {
  Var<T> total;
  Var<T> adversarial;
  Var<T> l1;
};

// Non-saturating: sum_i crit(D_i(x_i, G(x)_i), 1); minimax: -sum_i bce(.., 0).
// Plus lambda_l1 * mean|G(x) - y|. Discriminator parameters enter the tape as
// constants.
template <class T>
GeneratorLoss<T> LossGenerator(Tape<T>& tape, Generator<T>& g, MultiScaleDiscriminator<T>& d,
                               const Tensor<T>& x, const Tensor<T>& y, const LossOptions& opts);

// The adversarial part alone, from per-scale logits on the fake pair.
template <class T>
Var<T> GeneratorAdversarialTerm(const std::vector<Var<T>>& logits, const LossOptions& opts);

// Same as LossGenerator for a G(x) already recorded on `tape`.
template <class T>
GeneratorLoss<T> LossGeneratorOnFake(Tape<T>& tape, MultiScaleDiscriminator<T>& d, Var<T> x,
                                     Var<T> y, Var<T> fake, const LossOptions& opts);

// Generator output for x without recording gradients.
template <class T>
Tensor<T> GeneratorInference(Generator<T>& g, const Tensor<T>& x);

}  // namespace melfix

#endif  // MELFIX_MODELS_HPP_
