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

#ifndef MELFIX_OPTIM_HPP_
#define MELFIX_OPTIM_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "melfix/autodiff.hpp"
#include "melfix/tensor.hpp"

namespace melfix {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

// First/second moment estimates, one pair per parameter, in parameter order.
template <class T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  int64_t step = 0;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

template <class T>
AdamState<T> MakeAdamState(const std::vector<Parameter<T>*>& params);

// One bias-corrected Adam update from each parameter's accumulated grad.
// Throws NonFiniteGradient (leaving everything untouched) if any gradient
// element is NaN or infinite.
template <class T>
void AdamStep(const std::vector<Parameter<T>*>& params, AdamState<T>& state,
              const AdamConfig& cfg);

// Builds a scalar from the given leaves.
using GradCheckFn =
    std::function<Var<double>(Tape<double>& tape, const std::vector<Var<double>>& inputs)>;

// Compares tape gradients of `fn` with central finite differences for every
// element of every input. Returns max|analytic - numeric| over all elements,
// relative to the largest numeric gradient magnitude (floored at 1e-12).
// Scaling by the global magnitude keeps inputs whose true gradient is zero,
// such as a bias feeding instance norm, from dividing noise by noise.
double GradCheck(const GradCheckFn& fn, const std::vector<Tensor<double>>& inputs,
                 double eps = 1e-6);

struct GradCheckResult {
  std::string op;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
};

// Checks every differentiable op (tolerance 1e-5) and composite chains
// (tolerance 1e-4) on seeded random inputs.
std::vector<GradCheckResult> RunStandardGradChecks(uint64_t seed = 1234, double eps = 1e-6);

}  // namespace melfix

#endif  // MELFIX_OPTIM_HPP_
