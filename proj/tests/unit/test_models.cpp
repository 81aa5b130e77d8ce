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


#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "melfix/models.hpp"
#include "test_util.hpp"

using namespace melfix;
using melfix::testing::CodeOf;

namespace {

template <class T>
Tensor<T> Noise(Shape s, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor<T> t(s);
  for (auto& v : t.values()) v = static_cast<T>(u(rng));
  return t;
}

template <class T>
bool AllZero(ParameterSet<T>& ps) {
  for (auto& p : ps.all())
    for (T g : p.grad.values())
      if (g != T(0)) return false;
  return true;
}

template <class T>
bool AnyNonZero(ParameterSet<T>& ps) {
  return !AllZero(ps);
}

}  // namespace

TEST_SUITE("models") {

TEST_CASE("generator keeps shape and starts at zero output") {
  Generator<float> g({}, 3);
  Tape<float> t;
  const auto y = g.Forward(t, t.Constant(Noise<float>({1, 1, 80, 256}, 1)));
  CHECK(y.shape() == Shape{1, 1, 80, 256});
  for (float v : y.value().values()) CHECK(v == 0.0f);
  const auto b = GeneratorInference(g, Noise<float>({2, 1, 64, 64}, 2));
  CHECK(b.shape() == Shape{2, 1, 64, 64});
}

TEST_CASE("generator output stays in (-1, 1) once the output conv is nonzero") {
  Generator<double> g({}, 4);
  for (auto& p : g.params().all())
    if (p.name.rfind("g.out.", 0) == 0)
      for (auto& v : p.value.values()) v = 5.0;
  const auto y = GeneratorInference(g, Noise<double>({1, 1, 16, 16}, 5));
  bool moved = false;
  for (double v : y.values()) {
    CHECK(std::abs(v) < 1.0);
    moved = moved || v != 0.0;
  }
  CHECK(moved);
}

TEST_CASE("generator rejects indivisible inputs and bad configs") {
  Generator<float> g({}, 1);
  Tape<float> t;
  CHECK(CodeOf([&] { g.Forward(t, t.Constant(Tensor<float>({1, 1, 80, 30}))); }) ==
        ErrorCode::kShapeMismatch);
  GeneratorConfig bad;
  bad.base_channels = 0;
  CHECK(CodeOf([&] { Validate(bad); }) == ErrorCode::kInvalidArgument);
  GeneratorConfig enh;
  enh.n_enhancers = 1;
  CHECK(enh.spatial_multiple() == 8);
  enh.n_enhancers = 2;
  CHECK(CodeOf([&] { Validate(enh); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("parameter init is a pure function of config and seed") {
  CHECK(Generator<float>({}, 9) == Generator<float>({}, 9));
  CHECK_FALSE(Generator<float>({}, 9) == Generator<float>({}, 10));
  CHECK(MultiScaleDiscriminator<float>({}, 9) == MultiScaleDiscriminator<float>({}, 9));
}

TEST_CASE("local enhancer adds only e.* parameters") {
  GeneratorConfig with;
  with.n_enhancers = 1;
  Generator<float> a({}, 11), b(with, 11);
  std::size_t extra = 0;
  for (const auto& p : b.params().all()) {
    if (a.params().Contains(p.name)) {
      CHECK(a.params().Get(p.name).value == p.value);
    } else {
      CHECK(p.name.rfind("e.", 0) == 0);
      ++extra;
    }
  }
  CHECK(extra > 0);
  CHECK(b.params().all().size() == a.params().all().size() + extra);
  Tape<float> t;
  const auto y = b.Forward(t, t.Constant(Noise<float>({1, 1, 80, 64}, 6)));
  CHECK(y.shape() == Shape{1, 1, 80, 64});
}

TEST_CASE("pyramid halves each level") {
  Tape<double> t;
  const auto p = Pyramid(t.Constant(Noise<double>({1, 2, 80, 256}, 7)), 3);
  REQUIRE(p.size() == 3);
  CHECK(p[0].shape() == Shape{1, 2, 80, 256});
  CHECK(p[1].shape() == Shape{1, 2, 40, 128});
  CHECK(p[2].shape() == Shape{1, 2, 20, 64});
  CHECK(p[1].value().at(0, 1, 3, 5) ==
        doctest::Approx((p[0].value().at(0, 1, 6, 10) + p[0].value().at(0, 1, 6, 11) +
                         p[0].value().at(0, 1, 7, 10) + p[0].value().at(0, 1, 7, 11)) / 4));
}

TEST_CASE("discriminator logit map sizes") {
  MultiScaleDiscriminator<float> d({}, 2);
  Tape<float> t;
  const auto full = d.ForwardScale(t, 0, t.Constant(Tensor<float>({1, 2, 80, 256})));
  CHECK(full.shape() == Shape{1, 1, 10, 32});
  const auto logits = d.Forward(t, t.Constant(Noise<float>({2, 1, 64, 96}, 8)),
                                t.Constant(Noise<float>({2, 1, 64, 96}, 9)));
  REQUIRE(logits.size() == 3);
  CHECK(logits[0].shape() == Shape{2, 1, 8, 12});
  CHECK(logits[1].shape() == Shape{2, 1, 4, 6});
  CHECK(logits[2].shape() == Shape{2, 1, 2, 3});
  for (const auto& l : logits)
    for (float v : l.value().values()) CHECK(v == 0.0f);
  // The smallest scale cannot tile an 80-row input.
  CHECK(CodeOf([&] {
          d.Forward(t, t.Constant(Tensor<float>({1, 1, 80, 64})), t.Constant(Tensor<float>({1, 1, 80, 64})));
        }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("initial losses have closed forms") {
  Generator<double> g({}, 17);
  MultiScaleDiscriminator<double> d({}, 18);
  const auto x = Noise<double>({2, 1, 64, 64}, 20), y = Noise<double>({2, 1, 64, 64}, 21);
  LossOptions opts;
  Tape<double> td;
  CHECK(LossDiscriminator(td, g, d, x, y, opts).value()[0] ==
        doctest::Approx(6 * std::numbers::ln2).epsilon(1e-12));
  Tape<double> tg;
  const auto gl = LossGenerator(tg, g, d, x, y, opts);
  CHECK(gl.adversarial.value()[0] == doctest::Approx(3 * std::numbers::ln2).epsilon(1e-12));
  double l1 = 0;
  for (double v : y.values()) l1 += std::abs(v);
  CHECK(gl.l1.value()[0] == doctest::Approx(l1 / y.size()).epsilon(1e-12));
  opts.lambda_l1 = 10;
  Tape<double> tt;
  CHECK(LossGenerator(tt, g, d, x, y, opts).total.value()[0] ==
        doctest::Approx(3 * std::numbers::ln2 + 10 * l1 / y.size()).epsilon(1e-12));
  opts = {};
  opts.kind = GanLossKind::kLeastSquares;
  Tape<double> tl;
  CHECK(LossDiscriminator(tl, g, d, x, y, opts).value()[0] == doctest::Approx(3.0));
  opts = {};
  opts.generator = GeneratorAdversarial::kMinimax;
  Tape<double> tm;
  CHECK(LossGenerator(tm, g, d, x, y, opts).adversarial.value()[0] ==
        doctest::Approx(-3 * std::numbers::ln2).epsilon(1e-12));
}

TEST_CASE("discriminator loss sends no gradient into the generator and vice versa") {
  Generator<double> g({}, 1);
  MultiScaleDiscriminator<double> d({}, 2);
  // Move off the zero-output initialization so every path carries signal.
  for (auto* ps : {&g.params(), &d.params()})
    for (auto& p : ps->all())
      if (p.name.find("out.w") != std::string::npos)
        for (auto& v : p.value.values()) v = 0.01;
  const auto x = Noise<double>({1, 1, 32, 32}, 3), y = Noise<double>({1, 1, 32, 32}, 4);
  LossOptions opts;
  opts.lambda_l1 = 10;
  {
    Tape<double> t;
    t.Backward(LossDiscriminator(t, g, d, x, y, opts));
    CHECK(AllZero(g.params()));
    CHECK(AnyNonZero(d.params()));
  }
  d.params().ZeroGrad();
  {
    Tape<double> t;
    t.Backward(LossGenerator(t, g, d, x, y, opts).total);
    CHECK(AllZero(d.params()));
    CHECK(AnyNonZero(g.params()));
  }
}

TEST_CASE("fake logits are reported per scale") {
  Generator<float> g({}, 1);
  MultiScaleDiscriminator<float> d({}, 2);
  const auto x = Noise<float>({1, 1, 32, 32}, 5), y = Noise<float>({1, 1, 32, 32}, 6);
  std::vector<Tensor<float>> logits;
  Tape<float> t;
  LossDiscriminatorOnFake(t, d, x, y, GeneratorInference(g, x), LossOptions{}, &logits);
  REQUIRE(logits.size() == 3);
  CHECK(logits[2].shape() == Shape{1, 1, 1, 1});
}

}  // TEST_SUITE
