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

#include "melfix/optim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "melfix/error.hpp"

namespace melfix {

template <class T>
AdamState<T> MakeAdamState(const std::vector<Parameter<T>*>& params) {
  AdamState<T> state;
  for (const Parameter<T>* p : params) {
    state.m.emplace_back(p->value.shape());
    state.v.emplace_back(p->value.shape());
  }
  return state;
}

template <class T>
void AdamStep(const std::vector<Parameter<T>*>& params, AdamState<T>& state,
              const AdamConfig& cfg) {
  Require(state.m.size() == params.size() && state.v.size() == params.size(),
          ErrorCode::kShapeMismatch, "adam: state does not match parameter list");
  for (const Parameter<T>* p : params) {
    Require(p->grad.shape() == p->value.shape(), ErrorCode::kShapeMismatch,
            "adam: gradient shape mismatch for " + p->name);
    for (T g : p->grad.values()) {
      Require(std::isfinite(g), ErrorCode::kNonFiniteGradient,
              "adam: non-finite gradient in parameter " + p->name);
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = params[i]->value.values();
    const auto& grad = params[i]->grad.values();
    auto& m = state.m[i].values();
    auto& v = state.v[i].values();
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = grad[k];
      const double mk = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
      const double vk = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double m_hat = mk / correction1;
      const double v_hat = vk / correction2;
      value[k] = static_cast<T>(value[k] - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
    }
  }
}

template AdamState<float> MakeAdamState(const std::vector<Parameter<float>*>&);
template AdamState<double> MakeAdamState(const std::vector<Parameter<double>*>&);
template void AdamStep(const std::vector<Parameter<float>*>&, AdamState<float>&,
                       const AdamConfig&);
template void AdamStep(const std::vector<Parameter<double>*>&, AdamState<double>&,
                       const AdamConfig&);

// --- Gradient checking -------------------------------------------------------

namespace {

Tensor<double> RandomTensor(Shape shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

struct Evaluator {
  const GradCheckFn& fn;
  Tensor<double> projection;  // empty until the output shape is known

  double Run(const std::vector<Tensor<double>>& inputs, std::vector<Tensor<double>>* grads) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& in : inputs) vars.push_back(grads ? tape.Input(in) : tape.Constant(in));
    Var<double> out = fn(tape, vars);
    if (out.value().size() != 1) {
      if (projection.size() == 0) {
        std::mt19937_64 rng(out.value().size());
        projection = RandomTensor(out.shape(), rng);
      }
      out = WeightedSum(out, projection);
    }
    if (grads) {
      tape.Backward(out);
      grads->clear();
      for (const auto& v : vars) grads->push_back(tape.Grad(v));
    }
    return out.value()[0];
  }
};

}  // namespace

double GradCheck(const GradCheckFn& fn, const std::vector<Tensor<double>>& inputs, double eps) {
  Evaluator eval{fn, {}};
  std::vector<Tensor<double>> analytic;
  eval.Run(inputs, &analytic);

  double max_diff = 0.0;
  double max_numeric = 0.0;
  std::vector<Tensor<double>> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t k = 0; k < inputs[i].size(); ++k) {
      const double orig = probe[i][k];
      probe[i][k] = orig + eps;
      const double plus = eval.Run(probe, nullptr);
      probe[i][k] = orig - eps;
      const double minus = eval.Run(probe, nullptr);
      probe[i][k] = orig;
      const double numeric = (plus - minus) / (2.0 * eps);
      max_diff = std::max(max_diff, std::abs(numeric - analytic[i][k]));
      max_numeric = std::max(max_numeric, std::abs(numeric));
    }
  }
  return max_diff / std::max(max_numeric, 1e-12);
}

std::vector<GradCheckResult> RunStandardGradChecks(uint64_t seed, double eps) {
  constexpr double kOpTol = 1e-5;
  constexpr double kChainTol = 1e-4;
  std::mt19937_64 rng(seed);
  auto rnd = [&](Shape s) { return RandomTensor(s, rng); };
  std::vector<GradCheckResult> results;
  auto check = [&](const std::string& name, double tol, const GradCheckFn& fn,
                   std::vector<Tensor<double>> inputs) {
    results.push_back({name, GradCheck(fn, inputs, eps), tol});
  };
  using V = std::vector<Var<double>>;

  check("conv2d", kOpTol,
        [](Tape<double>&, const V& in) { return Conv2d(in[0], in[1], in[2], 1, 1); },
        {rnd({1, 2, 6, 6}), rnd({3, 2, 3, 3}), rnd({1, 3, 1, 1})});
  check("conv2d_stride2", kOpTol,
        [](Tape<double>&, const V& in) { return Conv2d(in[0], in[1], in[2], 2, 1); },
        {rnd({2, 2, 6, 6}), rnd({3, 2, 4, 4}), rnd({1, 3, 1, 1})});
  check("conv_transpose2d", kOpTol,
        [](Tape<double>&, const V& in) { return ConvTranspose2d(in[0], in[1], in[2], 2, 1); },
        {rnd({1, 3, 3, 3}), rnd({3, 2, 4, 4}), rnd({1, 2, 1, 1})});
  check("instance_norm", kOpTol,
        [](Tape<double>&, const V& in) { return InstanceNorm(in[0], in[1], in[2]); },
        {rnd({2, 3, 4, 4}), rnd({1, 3, 1, 1}), rnd({1, 3, 1, 1})});
  check("relu", kOpTol, [](Tape<double>&, const V& in) { return Relu(in[0]); },
        {rnd({2, 2, 3, 3})});
  check("leaky_relu", kOpTol, [](Tape<double>&, const V& in) { return LeakyRelu(in[0], 0.2); },
        {rnd({2, 2, 3, 3})});
  check("tanh", kOpTol, [](Tape<double>&, const V& in) { return Tanh(in[0]); },
        {RandomTensor({2, 2, 3, 3}, rng, -2.0, 2.0)});
  check("avg_pool2", kOpTol, [](Tape<double>&, const V& in) { return AvgPool2(in[0]); },
        {rnd({1, 2, 4, 6})});
  check("add", kOpTol, [](Tape<double>&, const V& in) { return Add(in[0], in[1]); },
        {rnd({1, 2, 3, 3}), rnd({1, 2, 3, 3})});
  check("scale", kOpTol, [](Tape<double>&, const V& in) { return Scale(in[0], -1.7); },
        {rnd({1, 2, 3, 3})});
  check("concat_channels", kOpTol,
        [](Tape<double>&, const V& in) { return ConcatChannels(in[0], in[1]); },
        {rnd({2, 1, 3, 4}), rnd({2, 2, 3, 4})});
  check("mean_abs_diff", kOpTol,
        [](Tape<double>&, const V& in) { return MeanAbsDiff(in[0], in[1]); },
        {rnd({1, 1, 4, 4}), rnd({1, 1, 4, 4})});
  check("bce_with_logits_t1", kOpTol,
        [](Tape<double>&, const V& in) { return BceWithLogits(in[0], 1.0); },
        {RandomTensor({1, 1, 3, 3}, rng, -4.0, 4.0)});
  check("bce_with_logits_t0", kOpTol,
        [](Tape<double>&, const V& in) { return BceWithLogits(in[0], 0.0); },
        {RandomTensor({1, 1, 3, 3}, rng, -4.0, 4.0)});
  check("mse_to_constant", kOpTol,
        [](Tape<double>&, const V& in) { return MseToConstant(in[0], 1.0); },
        {rnd({1, 1, 3, 3})});

  check("chain_conv_norm_lrelu_pool", kChainTol,
        [](Tape<double>&, const V& in) {
          return AvgPool2(LeakyRelu(InstanceNorm(Conv2d(in[0], in[1], in[2], 1, 1), in[3], in[4]),
                                    0.2));
        },
        {rnd({1, 2, 6, 6}), rnd({4, 2, 3, 3}), rnd({1, 4, 1, 1}), rnd({1, 4, 1, 1}),
         rnd({1, 4, 1, 1})});
  check("chain_encoder_decoder_bce", kChainTol,
        [](Tape<double>&, const V& in) {
          auto h = Relu(InstanceNorm(Conv2d(in[0], in[1], std::nullopt, 2, 1), in[2], in[3]));
          auto y = Tanh(ConvTranspose2d(h, in[4], in[5], 2, 1));
          auto pair = ConcatChannels(in[0], y);
          auto logits = Conv2d(LeakyRelu(pair, 0.2), in[6], std::nullopt, 2, 1);
          return Add(BceWithLogits(logits, 1.0), Scale(MeanAbsDiff(y, in[0]), 10.0));
        },
        {rnd({1, 1, 8, 8}), rnd({3, 1, 4, 4}), rnd({1, 3, 1, 1}), rnd({1, 3, 1, 1}),
         rnd({3, 1, 4, 4}), rnd({1, 1, 1, 1}), rnd({1, 2, 4, 4})});
  return results;
}

}  // namespace melfix
