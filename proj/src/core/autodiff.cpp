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

#include "melfix/autodiff.hpp"

#include <cmath>
#include <limits>

#include "conv_kernels.hpp"
#include "melfix/error.hpp"

namespace melfix {

// --- Tape ----------------------------------------------------------------

template <class T>
Var<T> Tape<T>::Constant(Tensor<T> value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

template <class T>
Var<T> Tape<T>::Input(Tensor<T> value) {
  Var<T> v = Constant(std::move(value));
  nodes_.back().requires_grad = true;
  return v;
}

template <class T>
Var<T> Tape<T>::Param(Parameter<T>& param, bool trainable) {
  Var<T> v = Constant(param.value);
  if (trainable) {
    nodes_.back().requires_grad = true;
    nodes_.back().param = &param;
  }
  return v;
}

template <class T>
Var<T> Tape<T>::Record(Tensor<T> value, std::vector<int> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (int id : inputs) node.requires_grad = node.requires_grad || RequiresGrad(id);
  if (node.requires_grad) {
    node.inputs = std::move(inputs);
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

template <class T>
Tensor<T>& Tape<T>::MutableGrad(int id) {
  Node& node = nodes_[static_cast<std::size_t>(id)];
  if (!node.has_grad) {
    node.grad = Tensor<T>(node.value.shape());
    node.has_grad = true;
  }
  return node.grad;
}

template <class T>
const Tensor<T>& Tape<T>::Grad(int id) {
  return MutableGrad(id);
}

template <class T>
void Tape<T>::Accumulate(int id, const Tensor<T>& g) {
  if (!RequiresGrad(id)) return;
  Tensor<T>& dst = MutableGrad(id);
  Require(dst.shape() == g.shape(), ErrorCode::kShapeMismatch,
          "gradient shape " + g.shape().str() + " does not match " + dst.shape().str());
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

template <class T>
void Tape<T>::Backward(Var<T> out) {
  Require(out.tape == this, ErrorCode::kInvalidArgument, "variable belongs to another tape");
  Require(Value(out).size() == 1, ErrorCode::kShapeMismatch,
          "backward requires a single-element output");
  last_visits_ = 0;
  if (!RequiresGrad(out.id)) return;
  MutableGrad(out.id)[0] += T(1);
  for (int i = out.id; i >= 0; --i) {
    Node& node = nodes_[static_cast<std::size_t>(i)];
    if (!node.requires_grad || !node.has_grad) continue;
    ++last_visits_;
    if (node.param != nullptr) {
      auto& dst = node.param->grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += node.grad[k];
    }
    if (node.backward) node.backward(*this);
  }
}

// --- Helpers ---------------------------------------------------------------

namespace {

void RequireSameShape(const Shape& a, const Shape& b, const char* op) {
  Require(a == b, ErrorCode::kShapeMismatch,
          std::string(op) + ": shapes " + a.str() + " and " + b.str() + " differ");
}

template <class T>
void CheckBias(const std::optional<Var<T>>& bias, int channels, const char* op) {
  if (!bias) return;
  const Shape s = bias->shape();
  Require(s.size() == static_cast<std::size_t>(channels), ErrorCode::kShapeMismatch,
          std::string(op) + ": bias must have " + std::to_string(channels) + " elements");
}

template <class T>
void AddBias(Tensor<T>& y, const Tensor<T>& bias) {
  const Shape s = y.shape();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      auto plane = y.plane(n, c);
      std::fill(plane.begin(), plane.end(), bias[static_cast<std::size_t>(c)]);
    }
  }
}

template <class T>
void AccumulateBiasGrad(Tape<T>& tape, int bias_id, const Tensor<T>& gy) {
  if (!tape.RequiresGrad(bias_id)) return;
  Tensor<T>& db = tape.MutableGrad(bias_id);
  const Shape s = gy.shape();
  for (int c = 0; c < s.c; ++c) {
    double acc = 0.0;
    for (int n = 0; n < s.n; ++n) {
      for (T v : gy.plane(n, c)) acc += v;
    }
    db[static_cast<std::size_t>(c)] += static_cast<T>(acc);
  }
}

template <class T>
Tensor<T> Scalar(double v) {
  return Tensor<T>(Shape{1, 1, 1, 1}, static_cast<T>(v));
}

}  // namespace

// --- Convolution ------------------------------------------------------------

template <class T>
Var<T> Conv2d(Var<T> x, Var<T> weight, BiasArg<T> bias, int stride, int pad) {
  Tape<T>& tape = *x.tape;
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  Require(stride >= 1 && pad >= 0, ErrorCode::kInvalidArgument, "conv2d: bad stride/pad");
  Require(ws.h == ws.w, ErrorCode::kShapeMismatch, "conv2d: kernel must be square");
  Require(ws.c == xs.c, ErrorCode::kShapeMismatch,
          "conv2d: input has " + std::to_string(xs.c) + " channels, weight expects " +
              std::to_string(ws.c));
  const int k = ws.h;
  Require(xs.h + 2 * pad >= k && xs.w + 2 * pad >= k, ErrorCode::kShapeMismatch,
          "conv2d: kernel larger than padded input");
  Require((xs.h + 2 * pad - k) % stride == 0 && (xs.w + 2 * pad - k) % stride == 0,
          ErrorCode::kShapeMismatch,
          "conv2d: non-integer output size for input " + xs.str() + ", k=" +
              std::to_string(k) + ", stride=" + std::to_string(stride) +
              ", pad=" + std::to_string(pad));
  CheckBias<T>(bias, ws.n, "conv2d");

  kernels::ConvGeometry g;
  g.cin = xs.c;
  g.h = xs.h;
  g.w = xs.w;
  g.cout = ws.n;
  g.k = k;
  g.stride = stride;
  g.pad = pad;
  g.ho = (xs.h + 2 * pad - k) / stride + 1;
  g.wo = (xs.w + 2 * pad - k) / stride + 1;

  Tensor<T> y(Shape{xs.n, g.cout, g.ho, g.wo});
  if (bias) AddBias(y, bias->value());
  std::vector<T> scratch;
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = weight.value();
  for (int n = 0; n < xs.n; ++n) {
    kernels::ConvForwardAdd(xv.plane(n, 0).data(), wv.data(), g, y.plane(n, 0).data(), scratch);
  }

  const int xid = x.id;
  const int wid = weight.id;
  const int bid = bias ? bias->id : -1;
  std::vector<int> inputs = {xid, wid};
  if (bias) inputs.push_back(bid);
  const int oid = static_cast<int>(tape.size());
  return tape.Record(std::move(y), std::move(inputs), [=](Tape<T>& t) {
    const Tensor<T>& gy = t.Grad(oid);
    std::vector<T> buf;
    if (t.RequiresGrad(xid)) {
      Tensor<T>& gx = t.MutableGrad(xid);
      const Tensor<T>& w = t.Value(wid);
      for (int n = 0; n < gy.shape().n; ++n) {
        kernels::ConvBackwardDataAdd(gy.plane(n, 0).data(), w.data(), g, gx.plane(n, 0).data(),
                                     buf);
      }
    }
    if (t.RequiresGrad(wid)) {
      Tensor<T>& gw = t.MutableGrad(wid);
      const Tensor<T>& xin = t.Value(xid);
      for (int n = 0; n < gy.shape().n; ++n) {
        kernels::ConvBackwardWeightAdd(xin.plane(n, 0).data(), gy.plane(n, 0).data(), g,
                                       gw.data(), buf);
      }
    }
    if (bid >= 0) AccumulateBiasGrad(t, bid, gy);
  });
}

template <class T>
Var<T> ConvTranspose2d(Var<T> x, Var<T> weight, BiasArg<T> bias, int stride, int pad) {
  Tape<T>& tape = *x.tape;
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  Require(stride >= 1 && pad >= 0, ErrorCode::kInvalidArgument,
          "conv_transpose2d: bad stride/pad");
  Require(ws.h == ws.w, ErrorCode::kShapeMismatch, "conv_transpose2d: kernel must be square");
  Require(ws.n == xs.c, ErrorCode::kShapeMismatch,
          "conv_transpose2d: input has " + std::to_string(xs.c) +
              " channels, weight expects " + std::to_string(ws.n));
  const int k = ws.h;
  const int ho = (xs.h - 1) * stride - 2 * pad + k;
  const int wo = (xs.w - 1) * stride - 2 * pad + k;
  Require(ho >= 1 && wo >= 1, ErrorCode::kShapeMismatch, "conv_transpose2d: empty output");
  CheckBias<T>(bias, ws.c, "conv_transpose2d");

  // Geometry of the forward convolution this op is the adjoint of.
  kernels::ConvGeometry g;
  g.cin = ws.c;
  g.h = ho;
  g.w = wo;
  g.cout = ws.n;
  g.k = k;
  g.stride = stride;
  g.pad = pad;
  g.ho = xs.h;
  g.wo = xs.w;

  Tensor<T> y(Shape{xs.n, ws.c, ho, wo});
  if (bias) AddBias(y, bias->value());
  std::vector<T> scratch;
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = weight.value();
  for (int n = 0; n < xs.n; ++n) {
    kernels::ConvBackwardDataAdd(xv.plane(n, 0).data(), wv.data(), g, y.plane(n, 0).data(),
                                 scratch);
  }

  const int xid = x.id;
  const int wid = weight.id;
  const int bid = bias ? bias->id : -1;
  std::vector<int> inputs = {xid, wid};
  if (bias) inputs.push_back(bid);
  const int oid = static_cast<int>(tape.size());
  return tape.Record(std::move(y), std::move(inputs), [=](Tape<T>& t) {
    const Tensor<T>& gy = t.Grad(oid);
    std::vector<T> buf;
    if (t.RequiresGrad(xid)) {
      Tensor<T>& gx = t.MutableGrad(xid);
      const Tensor<T>& w = t.Value(wid);
      for (int n = 0; n < gy.shape().n; ++n) {
        kernels::ConvForwardAdd(gy.plane(n, 0).data(), w.data(), g, gx.plane(n, 0).data(), buf);
      }
    }
    if (t.RequiresGrad(wid)) {
      Tensor<T>& gw = t.MutableGrad(wid);
      const Tensor<T>& xin = t.Value(xid);
      for (int n = 0; n < gy.shape().n; ++n) {
        kernels::ConvBackwardWeightAdd(gy.plane(n, 0).data(), xin.plane(n, 0).data(), g,
                                       gw.data(), buf);
      }
    }
    if (bid >= 0) AccumulateBiasGrad(t, bid, gy);
  });
}

// --- Normalization ----------------------------------------------------------

template <class T>
Var<T> InstanceNorm(Var<T> x, Var<T> gain, Var<T> bias, double eps) {
  Tape<T>& tape = *x.tape;
  const Shape s = x.shape();
  Require(s.plane() >= 1, ErrorCode::kShapeMismatch, "instance_norm: empty spatial plane");
  Require(gain.value().size() == static_cast<std::size_t>(s.c) &&
              bias.value().size() == static_cast<std::size_t>(s.c),
          ErrorCode::kShapeMismatch, "instance_norm: gain/bias must have one value per channel");

  const std::size_t hw = s.plane();
  Tensor<T> xhat(s);
  std::vector<T> inv_std(static_cast<std::size_t>(s.n) * s.c);
  Tensor<T> y(s);
  const Tensor<T>& xv = x.value();
  const Tensor<T>& gv = gain.value();
  const Tensor<T>& bv = bias.value();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const auto src = xv.plane(n, c);
      double mean = 0.0;
      for (T v : src) mean += v;
      mean /= static_cast<double>(hw);
      double var = 0.0;
      for (T v : src) var += (v - mean) * (v - mean);
      var /= static_cast<double>(hw);
      const double inv = 1.0 / std::sqrt(var + eps);
      inv_std[static_cast<std::size_t>(n) * s.c + c] = static_cast<T>(inv);
      auto xh = xhat.plane(n, c);
      auto dst = y.plane(n, c);
      const T g = gv[static_cast<std::size_t>(c)];
      const T b = bv[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < hw; ++i) {
        xh[i] = static_cast<T>((src[i] - mean) * inv);
        dst[i] = g * xh[i] + b;
      }
    }
  }

  const int xid = x.id;
  const int gid = gain.id;
  const int bid = bias.id;
  const int oid = static_cast<int>(tape.size());
  return tape.Record(std::move(y), {xid, gid, bid},
                     [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t) {
    const Tensor<T>& gy = t.Grad(oid);
    const Tensor<T>& gv2 = t.Value(gid);
    const bool want_x = t.RequiresGrad(xid);
    const bool want_g = t.RequiresGrad(gid);
    const bool want_b = t.RequiresGrad(bid);
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const auto dy = gy.plane(n, c);
        const auto xh = xhat.plane(n, c);
        double sum_dy = 0.0;
        double sum_dy_xh = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
          sum_dy += dy[i];
          sum_dy_xh += static_cast<double>(dy[i]) * xh[i];
        }
        if (want_g) t.MutableGrad(gid)[static_cast<std::size_t>(c)] += static_cast<T>(sum_dy_xh);
        if (want_b) t.MutableGrad(bid)[static_cast<std::size_t>(c)] += static_cast<T>(sum_dy);
        if (want_x) {
          const double g = gv2[static_cast<std::size_t>(c)];
          const double inv = inv_std[static_cast<std::size_t>(n) * s.c + c];
          const double mean_dy = sum_dy / static_cast<double>(hw);
          const double mean_dy_xh = sum_dy_xh / static_cast<double>(hw);
          auto dx = t.MutableGrad(xid).plane(n, c);
          for (std::size_t i = 0; i < hw; ++i) {
            dx[i] += static_cast<T>(g * inv * (dy[i] - mean_dy - xh[i] * mean_dy_xh));
          }
        }
      }
    }
  });
}

// --- Elementwise ------------------------------------------------------------

namespace {

// y = f(x) with dy/dx expressed through (x, y).
template <class T, class Forward, class Derivative>
Var<T> Elementwise(Var<T> x, Forward f, Derivative d) {
  Tape<T>& tape = *x.tape;
  const Tensor<T>& xv = x.value();
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
  const int xid = x.id;
  const int oid = static_cast<int>(tape.size());
  return tape.Record(std::move(y), {xid}, [=](Tape<T>& t) {
    const Tensor<T>& gy = t.Grad(oid);
    const Tensor<T>& xin = t.Value(xid);
    const Tensor<T>& yout = t.Value(oid);
    Tensor<T>& gx = t.MutableGrad(xid);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * d(xin[i], yout[i]);
  });
}

}  // namespace

template <class T>
Var<T> Relu(Var<T> x) {
  return Elementwise(
      x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
Var<T> LeakyRelu(Var<T> x, double slope) {
  const T a = static_cast<T>(slope);
  return Elementwise(
      x, [a](T v) { return v > T(0) ? v : a * v; },
      [a](T v, T) { return v > T(0) ? T(1) : a; });
}

template <class T>
Var<T> Tanh(Var<T> x) {
  // Saturated tanh rounds to +-1 in working precision; keep the range open.
  const T bound = std::nextafter(T(1), T(0));
  return Elementwise(
      x, [bound](T v) { return std::clamp(std::tanh(v), -bound, bound); },
      [](T, T y) { return T(1) - y * y; });
}

template <class T>
Var<T> AvgPool2(Var<T> x) {
  Tape<T>& tape = *x.tape;
  const Shape s = x.shape();
  Require(s.h % 2 == 0 && s.w % 2 == 0, ErrorCode::kShapeMismatch,
          "avg_pool2: H and W must be even, got " + s.str());
  const Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor<T> y(os);
  const Tensor<T>& xv = x.value();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int i = 0; i < os.h; ++i) {
        for (int j = 0; j < os.w; ++j) {
          y.at(n, c, i, j) = (xv.at(n, c, 2 * i, 2 * j) + xv.at(n, c, 2 * i, 2 * j + 1) +
                              xv.at(n, c, 2 * i + 1, 2 * j) + xv.at(n, c, 2 * i + 1, 2 * j + 1)) *
                             T(0.25);
        }
      }
    }
  }
  const int xid = x.id;
  const int oid = static_cast<int>(tape.size());
  return tape.Record(std::move(y), {xid}, [=](Tape<T>& t) {
    const Tensor<T>& gy = t.Grad(oid);
    Tensor<T>& gx = t.MutableGrad(xid);
    for (int n = 0; n < os.n; ++n) {
      for (int c = 0; c < os.c; ++c) {
        for (int i = 0; i < os.h; ++i) {
          for (int j = 0; j < os.w; ++j) {
            const T g = gy.at(n, c, i, j) * T(0.25);
            gx.at(n, c, 2 * i, 2 * j) += g;
            gx.at(n, c, 2 * i, 2 * j + 1) += g;
            gx.at(n, c, 2 * i + 1, 2 * j) += g;
            gx.at(n, c, 2 * i + 1, 2 * j + 1) += g;
          }
        }
      }
    }
  });
}

template <class T>
Var<T> Add(Var<T> a, Var<T> b) {
  Tape<T>& tape = *a.tape;
  RequireSameShape(a.shape(), b.shape(), "add");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> y(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) y[i] = av[i] + bv[i];
  const int aid = a.id;
  const int bid = b.id;
  const int oid = static_cast<int>(tape.size());
  return tape.Record(std::move(y), {aid, bid}, [=](Tape<T>& t) {
    const Tensor<T>& gy = t.Grad(oid);
    t.Accumulate(aid, gy);
    t.Accumulate(bid, gy);
  });
}

template <class T>
Var<T> Scale(Var<T> x, double factor) {
  const T f = static_cast<T>(factor);
  return Elementwise(
      x, [f](T v) { return f * v; }, [f](T, T) { return f; });
}

template <class T>
Var<T> ConcatChannels(Var<T> a, Var<T> b) {
  Tape<T>& tape = *a.tape;
  const Shape as = a.shape();
  const Shape bs = b.shape();
  Require(as.n == bs.n && as.h == bs.h && as.w == bs.w, ErrorCode::kShapeMismatch,
          "concat: shapes " + as.str() + " and " + bs.str() + " differ outside channels");
  const Shape os{as.n, as.c + bs.c, as.h, as.w};
  Tensor<T> y(os);
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  for (int n = 0; n < os.n; ++n) {
    for (int c = 0; c < as.c; ++c) {
      auto src = av.plane(n, c);
      std::copy(src.begin(), src.end(), y.plane(n, c).begin());
    }
    for (int c = 0; c < bs.c; ++c) {
      auto src = bv.plane(n, c);
      std::copy(src.begin(), src.end(), y.plane(n, as.c + c).begin());
    }
  }
  const int aid = a.id;
  const int bid = b.id;
  const int oid = static_cast<int>(tape.size());
  return tape.Record(std::move(y), {aid, bid}, [=](Tape<T>& t) {
    const Tensor<T>& gy = t.Grad(oid);
    if (t.RequiresGrad(aid)) {
      Tensor<T>& ga = t.MutableGrad(aid);
      for (int n = 0; n < os.n; ++n) {
        for (int c = 0; c < as.c; ++c) {
          auto src = gy.plane(n, c);
          auto dst = ga.plane(n, c);
          for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
        }
      }
    }
    if (t.RequiresGrad(bid)) {
      Tensor<T>& gb = t.MutableGrad(bid);
      for (int n = 0; n < os.n; ++n) {
        for (int c = 0; c < bs.c; ++c) {
          auto src = gy.plane(n, as.c + c);
          auto dst = gb.plane(n, c);
          for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
        }
      }
    }
  });
}

// --- Reductions ---------------------------------------------------------------

template <class T>
Var<T> MeanAbsDiff(Var<T> a, Var<T> b) {
  Tape<T>& tape = *a.tape;
  RequireSameShape(a.shape(), b.shape(), "mean_abs_diff");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(static_cast<double>(av[i]) - bv[i]);
  const double count = static_cast<double>(av.size());
  const int aid = a.id;
  const int bid = b.id;
  const int oid = static_cast<int>(tape.size());
  return tape.Record(Scalar<T>(acc / count), {aid, bid}, [=](Tape<T>& t) {
    const double g = t.Grad(oid)[0] / count;
    const Tensor<T>& x = t.Value(aid);
    const Tensor<T>& y = t.Value(bid);
    Tensor<T> d(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const T diff = x[i] - y[i];
      d[i] = static_cast<T>(diff > T(0) ? g : (diff < T(0) ? -g : 0.0));
    }
    t.Accumulate(aid, d);
    if (t.RequiresGrad(bid)) {
      for (auto& v : d.values()) v = -v;
      t.Accumulate(bid, d);
    }
  });
}

template <class T>
Var<T> BceWithLogits(Var<T> logits, double target) {
  Require(target == 0.0 || target == 1.0, ErrorCode::kInvalidArgument,
          "bce_with_logits: target must be 0 or 1");
  Tape<T>& tape = *logits.tape;
  const Tensor<T>& z = logits.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double v = z[i];
    acc += std::max(v, 0.0) - target * v + std::log1p(std::exp(-std::abs(v)));
  }
  const double count = static_cast<double>(z.size());
  const int zid = logits.id;
  const int oid = static_cast<int>(tape.size());
  return tape.Record(Scalar<T>(acc / count), {zid}, [=](Tape<T>& t) {
    const double g = t.Grad(oid)[0] / count;
    const Tensor<T>& zin = t.Value(zid);
    Tensor<T>& gz = t.MutableGrad(zid);
    for (std::size_t i = 0; i < zin.size(); ++i) {
      const double v = zin[i];
      const double sig = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      gz[i] += static_cast<T>(g * (sig - target));
    }
  });
}

template <class T>
Var<T> MseToConstant(Var<T> x, double target) {
  Tape<T>& tape = *x.tape;
  const Tensor<T>& xv = x.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double d = xv[i] - target;
    acc += d * d;
  }
  const double count = static_cast<double>(xv.size());
  const int xid = x.id;
  const int oid = static_cast<int>(tape.size());
  return tape.Record(Scalar<T>(acc / count), {xid}, [=](Tape<T>& t) {
    const double g = t.Grad(oid)[0] / count;
    const Tensor<T>& xin = t.Value(xid);
    Tensor<T>& gx = t.MutableGrad(xid);
    for (std::size_t i = 0; i < xin.size(); ++i) {
      gx[i] += static_cast<T>(2.0 * g * (xin[i] - target));
    }
  });
}

template <class T>
Var<T> WeightedSum(Var<T> x, const Tensor<T>& weights) {
  Tape<T>& tape = *x.tape;
  RequireSameShape(x.shape(), weights.shape(), "weighted_sum");
  const Tensor<T>& xv = x.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += static_cast<double>(xv[i]) * weights[i];
  const int xid = x.id;
  const int oid = static_cast<int>(tape.size());
  return tape.Record(Scalar<T>(acc), {xid}, [=](Tape<T>& t) {
    const T g = t.Grad(oid)[0];
    Tensor<T>& gx = t.MutableGrad(xid);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * weights[i];
  });
}

#define MELFIX_INSTANTIATE_AUTODIFF(T)                                                    \
  template class Tape<T>;                                                                 \
  template struct Var<T>;                                                                 \
  template Var<T> Conv2d(Var<T>, Var<T>, BiasArg<T>, int, int);                \
  template Var<T> ConvTranspose2d(Var<T>, Var<T>, BiasArg<T>, int, int);       \
  template Var<T> InstanceNorm(Var<T>, Var<T>, Var<T>, double);                           \
  template Var<T> Relu(Var<T>);                                                           \
  template Var<T> LeakyRelu(Var<T>, double);                                              \
  template Var<T> Tanh(Var<T>);                                                           \
  template Var<T> AvgPool2(Var<T>);                                                       \
  template Var<T> Add(Var<T>, Var<T>);                                                    \
  template Var<T> Scale(Var<T>, double);                                                  \
  template Var<T> ConcatChannels(Var<T>, Var<T>);                                         \
  template Var<T> MeanAbsDiff(Var<T>, Var<T>);                                            \
  template Var<T> BceWithLogits(Var<T>, double);                                          \
  template Var<T> MseToConstant(Var<T>, double);                                          \
  template Var<T> WeightedSum(Var<T>, const Tensor<T>&);

MELFIX_INSTANTIATE_AUTODIFF(float)
MELFIX_INSTANTIATE_AUTODIFF(double)

}  // namespace melfix
