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

#include "melfix/models.hpp"

#include <cmath>
#include <random>

#include "melfix/error.hpp"

namespace melfix {

void Validate(const GeneratorConfig& cfg) {
  Require(cfg.in_channels >= 1 && cfg.out_channels >= 1, ErrorCode::kInvalidArgument,
          "generator channels must be >= 1");
  Require(cfg.base_channels >= 1, ErrorCode::kInvalidArgument, "base_channels must be >= 1");
  Require(cfg.n_downsample >= 0 && cfg.n_downsample <= 6, ErrorCode::kInvalidArgument,
          "n_downsample must be in [0, 6]");
  Require(cfg.n_resblocks >= 0, ErrorCode::kInvalidArgument, "n_resblocks must be >= 0");
  Require(cfg.n_enhancers == 0 || cfg.n_enhancers == 1, ErrorCode::kInvalidArgument,
          "n_enhancers must be 0 or 1");
}

void Validate(const DiscriminatorConfig& cfg) {
  Require(cfg.in_channels >= 1 && cfg.base_channels >= 1, ErrorCode::kInvalidArgument,
          "discriminator channels must be >= 1");
  Require(cfg.n_layers >= 1 && cfg.n_layers <= 6, ErrorCode::kInvalidArgument,
          "discriminator n_layers must be in [1, 6]");
  Require(cfg.n_scales >= 1 && cfg.n_scales <= 4, ErrorCode::kInvalidArgument,
          "discriminator n_scales must be in [1, 4]");
}

// --- ParameterSet ------------------------------------------------------------

template <class T>
Parameter<T>& ParameterSet<T>::Add(const std::string& name, Tensor<T> value) {
  Require(index_.count(name) == 0, ErrorCode::kInternal, "duplicate parameter " + name);
  index_[name] = params_.size();
  params_.emplace_back(name, std::move(value));
  return params_.back();
}

template <class T>
Parameter<T>& ParameterSet<T>::Get(const std::string& name) {
  auto it = index_.find(name);
  Require(it != index_.end(), ErrorCode::kInvalidArgument, "unknown parameter " + name);
  return params_[it->second];
}

template <class T>
const Parameter<T>& ParameterSet<T>::Get(const std::string& name) const {
  auto it = index_.find(name);
  Require(it != index_.end(), ErrorCode::kInvalidArgument, "unknown parameter " + name);
  return params_[it->second];
}

template <class T>
std::vector<Parameter<T>*> ParameterSet<T>::pointers() {
  std::vector<Parameter<T>*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

template <class T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <class T>
void ParameterSet<T>::ZeroGrad() {
  for (auto& p : params_) p.ZeroGrad();
}

namespace {

template <class T>
class Initializer {
 public:
  Initializer(ParameterSet<T>& set, uint64_t seed) : set_(set), rng_(seed) {}

  void Normal(const std::string& name, Shape shape, double mean, double stddev) {
    std::normal_distribution<double> dist(mean, stddev);
    Tensor<T> t(shape);
    for (auto& v : t.values()) v = static_cast<T>(dist(rng_));
    set_.Add(name, std::move(t));
  }
  void Zeros(const std::string& name, Shape shape) { set_.Add(name, Tensor<T>(shape)); }

  void Conv(const std::string& name, int cout, int cin, int k) {
    Normal(name + ".w", {cout, cin, k, k}, 0.0, 0.02);
  }
  void ConvT(const std::string& name, int cin, int cout, int k) {
    Normal(name + ".w", {cin, cout, k, k}, 0.0, 0.02);
  }
  void Norm(const std::string& name, int c) {
    Normal(name + ".gain", {1, c, 1, 1}, 1.0, 0.02);
    Zeros(name + ".bias", {1, c, 1, 1});
  }
  void ZeroConv(const std::string& name, int cout, int cin, int k) {
    Zeros(name + ".w", {cout, cin, k, k});
    Zeros(name + ".b", {1, cout, 1, 1});
  }

 private:
  ParameterSet<T>& set_;
  std::mt19937_64 rng_;
};

}  // namespace

// --- Generator ---------------------------------------------------------------

template <class T>
Generator<T>::Generator(const GeneratorConfig& cfg, uint64_t seed) : cfg_(cfg) {
  Validate(cfg);
  Initializer<T> init(params_, seed);
  const int base = cfg.base_channels;
  init.Conv("g.in", base, cfg.in_channels, 7);
  init.Norm("g.in.norm", base);
  int ch = base;
  for (int i = 0; i < cfg.n_downsample; ++i) {
    const std::string name = "g.down" + std::to_string(i);
    init.Conv(name, ch * 2, ch, 4);
    init.Norm(name + ".norm", ch * 2);
    ch *= 2;
  }
  for (int i = 0; i < cfg.n_resblocks; ++i) {
    const std::string name = "g.res" + std::to_string(i);
    init.Conv(name + ".conv1", ch, ch, 3);
    init.Norm(name + ".norm1", ch);
    init.Conv(name + ".conv2", ch, ch, 3);
    init.Norm(name + ".norm2", ch);
  }
  for (int i = 0; i < cfg.n_downsample; ++i) {
    const std::string name = "g.up" + std::to_string(i);
    init.ConvT(name, ch, ch / 2, 4);
    init.Norm(name + ".norm", ch / 2);
    ch /= 2;
  }
  init.ZeroConv("g.out", cfg.out_channels, base, 7);

  if (cfg.n_enhancers > 0) {
    const int local = std::max(1, base / 2);
    init.Conv("e.in", local, cfg.in_channels, 7);
    init.Norm("e.in.norm", local);
    init.Conv("e.down", base, local, 4);
    init.Norm("e.down.norm", base);
    for (int i = 0; i < cfg.n_resblocks; ++i) {
      const std::string name = "e.res" + std::to_string(i);
      init.Conv(name + ".conv1", base, base, 3);
      init.Norm(name + ".norm1", base);
      init.Conv(name + ".conv2", base, base, 3);
      init.Norm(name + ".norm2", base);
    }
    init.ConvT("e.up", base, local, 4);
    init.Norm("e.up.norm", local);
    init.ZeroConv("e.out", cfg.out_channels, local, 7);
  }
}

template <class T>
Var<T> Generator<T>::P(Tape<T>& tape, const std::string& name, bool trainable) {
  return tape.Param(params_.Get(name), trainable);
}

template <class T>
Var<T> Generator<T>::ResBlock(Tape<T>& tape, Var<T> h, const std::string& prefix,
                              bool trainable) {
  auto r = Conv2d(h, P(tape, prefix + ".conv1.w", trainable), std::nullopt, 1, 1);
  r = Relu(InstanceNorm(r, P(tape, prefix + ".norm1.gain", trainable),
                        P(tape, prefix + ".norm1.bias", trainable)));
  r = Conv2d(r, P(tape, prefix + ".conv2.w", trainable), std::nullopt, 1, 1);
  r = InstanceNorm(r, P(tape, prefix + ".norm2.gain", trainable),
                   P(tape, prefix + ".norm2.bias", trainable));
  return Add(h, r);
}

template <class T>
Var<T> Generator<T>::GlobalFeatures(Tape<T>& tape, Var<T> x, bool trainable) {
  auto block = [&](Var<T> h, const std::string& norm) {
    return Relu(InstanceNorm(h, P(tape, norm + ".gain", trainable),
                             P(tape, norm + ".bias", trainable)));
  };
  Var<T> h = block(Conv2d(x, P(tape, "g.in.w", trainable), std::nullopt, 1, 3), "g.in.norm");
  for (int i = 0; i < cfg_.n_downsample; ++i) {
    const std::string name = "g.down" + std::to_string(i);
    h = block(Conv2d(h, P(tape, name + ".w", trainable), std::nullopt, 2, 1), name + ".norm");
  }
  for (int i = 0; i < cfg_.n_resblocks; ++i) {
    h = ResBlock(tape, h, "g.res" + std::to_string(i), trainable);
  }
  for (int i = 0; i < cfg_.n_downsample; ++i) {
    const std::string name = "g.up" + std::to_string(i);
    h = block(ConvTranspose2d(h, P(tape, name + ".w", trainable), std::nullopt, 2, 1),
              name + ".norm");
  }
  return h;
}

template <class T>
Var<T> Generator<T>::Forward(Tape<T>& tape, Var<T> x, bool trainable) {
  const Shape s = x.shape();
  const int multiple = cfg_.spatial_multiple();
  Require(s.c == cfg_.in_channels, ErrorCode::kShapeMismatch,
          "generator expects " + std::to_string(cfg_.in_channels) + " input channels, got " +
              s.str());
  Require(s.h % multiple == 0 && s.w % multiple == 0, ErrorCode::kShapeMismatch,
          "generator input " + s.str() + " must have H and W divisible by " +
              std::to_string(multiple));

  if (cfg_.n_enhancers == 0) {
    Var<T> h = GlobalFeatures(tape, x, trainable);
    return Tanh(Conv2d(h, P(tape, "g.out.w", trainable), P(tape, "g.out.b", trainable), 1, 3));
  }

  auto block = [&](Var<T> h, const std::string& norm) {
    return Relu(InstanceNorm(h, P(tape, norm + ".gain", trainable),
                             P(tape, norm + ".bias", trainable)));
  };
  Var<T> coarse = GlobalFeatures(tape, AvgPool2(x), trainable);
  Var<T> h = block(Conv2d(x, P(tape, "e.in.w", trainable), std::nullopt, 1, 3), "e.in.norm");
  h = block(Conv2d(h, P(tape, "e.down.w", trainable), std::nullopt, 2, 1), "e.down.norm");
  h = Add(h, coarse);
  for (int i = 0; i < cfg_.n_resblocks; ++i) {
    h = ResBlock(tape, h, "e.res" + std::to_string(i), trainable);
  }
  h = block(ConvTranspose2d(h, P(tape, "e.up.w", trainable), std::nullopt, 2, 1), "e.up.norm");
  return Tanh(Conv2d(h, P(tape, "e.out.w", trainable), P(tape, "e.out.b", trainable), 1, 3));
}

// --- Discriminator -----------------------------------------------------------

template <class T>
MultiScaleDiscriminator<T>::MultiScaleDiscriminator(const DiscriminatorConfig& cfg, uint64_t seed)
    : cfg_(cfg) {
  Validate(cfg);
  Initializer<T> init(params_, seed);
  for (int s = 0; s < cfg.n_scales; ++s) {
    const std::string prefix = "d" + std::to_string(s);
    int ch = cfg.in_channels;
    int next = cfg.base_channels;
    for (int l = 0; l < cfg.n_layers; ++l) {
      const std::string name = prefix + ".conv" + std::to_string(l);
      init.Conv(name, next, ch, 4);
      if (l == 0) {
        init.Zeros(name + ".b", {1, next, 1, 1});
      } else {
        init.Norm(name + ".norm", next);
      }
      ch = next;
      next *= 2;
    }
    init.ZeroConv(prefix + ".out", 1, ch, 3);
  }
}

template <class T>
Var<T> MultiScaleDiscriminator<T>::P(Tape<T>& tape, const std::string& name, bool trainable) {
  return tape.Param(params_.Get(name), trainable);
}

template <class T>
Var<T> MultiScaleDiscriminator<T>::ForwardScale(Tape<T>& tape, int scale, Var<T> pair,
                                                bool trainable) {
  Require(scale >= 0 && scale < cfg_.n_scales, ErrorCode::kInvalidArgument,
          "discriminator scale out of range");
  const Shape s = pair.shape();
  const int multiple = 1 << cfg_.n_layers;
  Require(s.c == cfg_.in_channels, ErrorCode::kShapeMismatch,
          "discriminator expects " + std::to_string(cfg_.in_channels) + " channels, got " +
              s.str());
  Require(s.h % multiple == 0 && s.w % multiple == 0, ErrorCode::kShapeMismatch,
          "discriminator input " + s.str() + " must have H and W divisible by " +
              std::to_string(multiple));
  const std::string prefix = "d" + std::to_string(scale);
  Var<T> h = pair;
  for (int l = 0; l < cfg_.n_layers; ++l) {
    const std::string name = prefix + ".conv" + std::to_string(l);
    if (l == 0) {
      h = Conv2d(h, P(tape, name + ".w", trainable), P(tape, name + ".b", trainable), 2, 1);
    } else {
      h = Conv2d(h, P(tape, name + ".w", trainable), std::nullopt, 2, 1);
      h = InstanceNorm(h, P(tape, name + ".norm.gain", trainable),
                       P(tape, name + ".norm.bias", trainable));
    }
    h = LeakyRelu(h, 0.2);
  }
  return Conv2d(h, P(tape, prefix + ".out.w", trainable), P(tape, prefix + ".out.b", trainable),
                1, 1);
}

template <class T>
std::vector<Var<T>> MultiScaleDiscriminator<T>::Forward(Tape<T>& tape, Var<T> x, Var<T> y,
                                                        bool trainable) {
  Require(x.shape() == y.shape(), ErrorCode::kShapeMismatch,
          "discriminator condition " + x.shape().str() + " and candidate " + y.shape().str() +
              " differ");
  const auto levels = Pyramid(ConcatChannels(x, y), cfg_.n_scales);
  std::vector<Var<T>> logits;
  for (int s = 0; s < cfg_.n_scales; ++s) {
    logits.push_back(ForwardScale(tape, s, levels[static_cast<std::size_t>(s)], trainable));
  }
  return logits;
}

template <class T>
std::vector<Var<T>> Pyramid(Var<T> t, int levels) {
  Require(levels >= 1, ErrorCode::kInvalidArgument, "pyramid needs at least one level");
  const int multiple = 1 << (levels - 1);
  const Shape s = t.shape();
  Require(s.h % multiple == 0 && s.w % multiple == 0, ErrorCode::kShapeMismatch,
          "pyramid input " + s.str() + " must have H and W divisible by " +
              std::to_string(multiple));
  std::vector<Var<T>> out{t};
  for (int i = 1; i < levels; ++i) out.push_back(AvgPool2(out.back()));
  return out;
}

// --- Losses --------------------------------------------------------------------

template <class T>
Var<T> GanCriterion(Var<T> logits, double target, GanLossKind kind) {
  return kind == GanLossKind::kVanilla ? BceWithLogits(logits, target)
                                       : MseToConstant(logits, target);
}

namespace {

template <class T>
Var<T> SumAll(const std::vector<Var<T>>& terms) {
  Var<T> acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = Add(acc, terms[i]);
  return acc;
}

template <class T>
void RequireFiniteLoss(Var<T> v, const char* what) {
  Require(std::isfinite(static_cast<double>(v.value()[0])), ErrorCode::kNonFiniteLoss,
          std::string(what) + " is not finite");
}

}  // namespace

template <class T>
Tensor<T> GeneratorInference(Generator<T>& g, const Tensor<T>& x) {
  Tape<T> tape;
  return g.Forward(tape, tape.Constant(x), false).value();
}

template <class T>
Var<T> LossDiscriminatorOnFake(Tape<T>& tape, MultiScaleDiscriminator<T>& d, const Tensor<T>& x,
                               const Tensor<T>& y, const Tensor<T>& fake,
                               const LossOptions& opts, std::vector<Tensor<T>>* fake_logits) {
  Var<T> xv = tape.Constant(x);
  const auto real = d.Forward(tape, xv, tape.Constant(y), true);
  const auto gen = d.Forward(tape, xv, tape.Constant(fake), true);
  std::vector<Var<T>> terms;
  for (std::size_t i = 0; i < real.size(); ++i) {
    terms.push_back(GanCriterion(real[i], 1.0, opts.kind));
    terms.push_back(GanCriterion(gen[i], 0.0, opts.kind));
  }
  if (fake_logits) {
    fake_logits->clear();
    for (const auto& z : gen) fake_logits->push_back(z.value());
  }
  Var<T> total = SumAll(terms);
  RequireFiniteLoss(total, "discriminator loss");
  return total;
}

template <class T>
Var<T> LossDiscriminator(Tape<T>& tape, Generator<T>& g, MultiScaleDiscriminator<T>& d,
                         const Tensor<T>& x, const Tensor<T>& y, const LossOptions& opts) {
  return LossDiscriminatorOnFake(tape, d, x, y, GeneratorInference(g, x), opts);
}

template <class T>
Var<T> GeneratorAdversarialTerm(const std::vector<Var<T>>& logits, const LossOptions& opts) {
  std::vector<Var<T>> terms;
  for (const auto& z : logits) {
    if (opts.generator == GeneratorAdversarial::kMinimax) {
      // Minimizing log(1 - D) is maximizing the "fake" criterion.
      terms.push_back(Scale(GanCriterion(z, 0.0, opts.kind), -1.0));
    } else {
      terms.push_back(GanCriterion(z, 1.0, opts.kind));
    }
  }
  return SumAll(terms);
}

template <class T>
GeneratorLoss<T> LossGeneratorOnFake(Tape<T>& tape, MultiScaleDiscriminator<T>& d, Var<T> x,
                                     Var<T> y, Var<T> fake, const LossOptions& opts) {
  GeneratorLoss<T> out;
  out.adversarial = GeneratorAdversarialTerm(d.Forward(tape, x, fake, false), opts);
  out.l1 = MeanAbsDiff(fake, y);
  out.total = opts.lambda_l1 != 0.0 ? Add(out.adversarial, Scale(out.l1, opts.lambda_l1))
                                    : out.adversarial;
  RequireFiniteLoss(out.total, "generator loss");
  return out;
}

template <class T>
GeneratorLoss<T> LossGenerator(Tape<T>& tape, Generator<T>& g, MultiScaleDiscriminator<T>& d,
                               const Tensor<T>& x, const Tensor<T>& y, const LossOptions& opts) {
  Var<T> xv = tape.Constant(x);
  Var<T> yv = tape.Constant(y);
  return LossGeneratorOnFake(tape, d, xv, yv, g.Forward(tape, xv, true), opts);
}

#define MELFIX_INSTANTIATE_MODELS(T)                                                          \
  template class ParameterSet<T>;                                                             \
  template class Generator<T>;                                                                \
  template class MultiScaleDiscriminator<T>;                                                  \
  template std::vector<Var<T>> Pyramid(Var<T>, int);                                          \
  template Var<T> GanCriterion(Var<T>, double, GanLossKind);                                  \
  template Tensor<T> GeneratorInference(Generator<T>&, const Tensor<T>&);                     \
  template Var<T> LossDiscriminatorOnFake(Tape<T>&, MultiScaleDiscriminator<T>&,              \
                                          const Tensor<T>&, const Tensor<T>&,                 \
                                          const Tensor<T>&, const LossOptions&,               \
                                          std::vector<Tensor<T>>*);                           \
  template Var<T> GeneratorAdversarialTerm(const std::vector<Var<T>>&, const LossOptions&);   \
  template GeneratorLoss<T> LossGeneratorOnFake(Tape<T>&, MultiScaleDiscriminator<T>&, Var<T>, \
                                                Var<T>, Var<T>, const LossOptions&);          \
  template Var<T> LossDiscriminator(Tape<T>&, Generator<T>&, MultiScaleDiscriminator<T>&,     \
                                    const Tensor<T>&, const Tensor<T>&, const LossOptions&);  \
  template GeneratorLoss<T> LossGenerator(Tape<T>&, Generator<T>&,                            \
                                          MultiScaleDiscriminator<T>&, const Tensor<T>&,      \
                                          const Tensor<T>&, const LossOptions&);

MELFIX_INSTANTIATE_MODELS(float)
MELFIX_INSTANTIATE_MODELS(double)

}  // namespace melfix
