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

// Reverse-mode automatic differentiation over NCHW tensors.
//
// A Tape records every op in execution order, which is already a topological
// order, so Backward() is a single reverse sweep. Nodes that do not depend on
// any gradient-requiring input store no backward closure and are skipped.
//
//   Tape<float> tape;
//   Var<float> x = tape.Constant(input);
//   Var<float> w = tape.Param(weight);
//   Var<float> loss = MeanAbsDiff(Conv2d(x, w, std::nullopt, 1, 1), target);
//   tape.Backward(loss);  // weight.grad now holds d loss / d weight

#ifndef MELFIX_AUTODIFF_HPP_
#define MELFIX_AUTODIFF_HPP_

#include <functional>
#include <optional>
#include <type_traits>
#include <vector>

#include "melfix/tensor.hpp"

namespace melfix {

template <class T>
class Tape;

template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
};

template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> Constant(Tensor<T> value);
  // A leaf whose gradient is tracked on the tape but not written anywhere.
  Var<T> Input(Tensor<T> value);
  // Gradients flow into param.grad (accumulated) when trainable.
  Var<T> Param(Parameter<T>& param, bool trainable = true);

  // Records a derived node. `backward` reads Grad(out) and calls Accumulate
  // on its inputs; it is dropped if no input requires a gradient.
  Var<T> Record(Tensor<T> value, std::vector<int> inputs, BackwardFn backward);

  const Tensor<T>& Value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor<T>& Value(Var<T> v) const { return Value(v.id); }
  bool RequiresGrad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  // Zero-filled if the node never received a gradient.
  const Tensor<T>& Grad(int id);
  const Tensor<T>& Grad(Var<T> v) { return Grad(v.id); }
  void Accumulate(int id, const Tensor<T>& g);
  // Direct access for kernels that scatter into an input's gradient.
  Tensor<T>& MutableGrad(int id);

  // Seeds d(out)/d(out) = 1 for a single-element `out`.
  void Backward(Var<T> out);

  std::size_t size() const { return nodes_.size(); }
  // How many nodes ran their backward step during the last Backward().
  std::size_t last_backward_visits() const { return last_visits_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<int> inputs;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  std::vector<Node> nodes_;
  std::size_t last_visits_ = 0;
};

template <class T>
const Tensor<T>& Var<T>::value() const {
  return tape->Value(id);
}

// --- Ops -----------------------------------------------------------------

// Optional bias argument; excluded from template argument deduction so that
// callers can pass std::nullopt or a Var directly.
template <class T>
using BiasArg = std::type_identity_t<std::optional<Var<T>>>;

// Weights are [Cout, Cin, k, k]; bias is [1, Cout, 1, 1]. Output size is
// (H + 2*pad - k) / stride + 1 and must be exact.
template <class T>
Var<T> Conv2d(Var<T> x, Var<T> weight, BiasArg<T> bias, int stride, int pad);

// Adjoint of Conv2d. Weights are [Cin, Cout, k, k] (the matching Conv2d's
// [Cout, Cin] layout read in reverse); output size is (H - 1)*stride - 2*pad + k.
template <class T>
Var<T> ConvTranspose2d(Var<T> x, Var<T> weight, BiasArg<T> bias, int stride, int pad);

// Per-(n, c) standardization with population variance, then gain/bias
// (both [1, C, 1, 1]).
template <class T>
Var<T> InstanceNorm(Var<T> x, Var<T> gain, Var<T> bias, double eps = 1e-5);

template <class T>
Var<T> Relu(Var<T> x);
// The subgradient at exactly 0 is taken from the negative branch.
template <class T>
Var<T> LeakyRelu(Var<T> x, double slope = 0.2);
template <class T>
Var<T> Tanh(Var<T> x);
// 2x2 mean with stride 2; H and W must be even.
template <class T>
Var<T> AvgPool2(Var<T> x);

template <class T>
Var<T> Add(Var<T> a, Var<T> b);
template <class T>
Var<T> Scale(Var<T> x, double factor);
// Channel concatenation of equally sized tensors.
template <class T>
Var<T> ConcatChannels(Var<T> a, Var<T> b);

// Scalar reductions, shape [1,1,1,1].
template <class T>
Var<T> MeanAbsDiff(Var<T> a, Var<T> b);
// mean(softplus(z) - t*z), computed as max(z,0) - t*z + log1p(exp(-|z|)).
template <class T>
Var<T> BceWithLogits(Var<T> logits, double target);
// mean((z - t)^2), the least-squares GAN criterion.
template <class T>
Var<T> MseToConstant(Var<T> x, double target);
// sum(x * weights) for a constant weight tensor of x's shape.
template <class T>
Var<T> WeightedSum(Var<T> x, const Tensor<T>& weights);

}  // namespace melfix

#endif  // MELFIX_AUTODIFF_HPP_
