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

// Single-sample direct convolution kernels (im2col + GEMM). Every reduction
// runs in a fixed order, so results are bit-reproducible.

#ifndef MELFIX_SRC_CORE_CONV_KERNELS_HPP_
#define MELFIX_SRC_CORE_CONV_KERNELS_HPP_

#include <algorithm>
#include <cstddef>
#include <vector>

namespace melfix::kernels {

// Geometry of a forward convolution: input [cin, h, w] -> output [cout, ho, wo].
struct ConvGeometry {
  int cin = 0, h = 0, w = 0;
  int cout = 0, k = 0, stride = 1, pad = 0;
  int ho = 0, wo = 0;

  std::size_t patch() const { return static_cast<std::size_t>(cin) * k * k; }
  std::size_t out_plane() const { return static_cast<std::size_t>(ho) * wo; }
  std::size_t in_plane() const { return static_cast<std::size_t>(h) * w; }
};

// col is [cin*k*k, ho*wo].
template <class T>
void Im2Col(const T* x, const ConvGeometry& g, T* col) {
  const std::size_t plane = g.out_plane();
  for (int c = 0; c < g.cin; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        T* row = col + ((static_cast<std::size_t>(c) * g.k + ki) * g.k + kj) * plane;
        const T* src = x + static_cast<std::size_t>(c) * g.in_plane();
        for (int oh = 0; oh < g.ho; ++oh) {
          T* dst = row + static_cast<std::size_t>(oh) * g.wo;
          const int ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.h) {
            std::fill(dst, dst + g.wo, T(0));
            continue;
          }
          const T* line = src + static_cast<std::size_t>(ih) * g.w;
          for (int ow = 0; ow < g.wo; ++ow) {
            const int iw = ow * g.stride - g.pad + kj;
            dst[ow] = (iw >= 0 && iw < g.w) ? line[iw] : T(0);
          }
        }
      }
    }
  }
}

// x += col2im(col).
template <class T>
void Col2ImAdd(const T* col, const ConvGeometry& g, T* x) {
  const std::size_t plane = g.out_plane();
  for (int c = 0; c < g.cin; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        const T* row = col + ((static_cast<std::size_t>(c) * g.k + ki) * g.k + kj) * plane;
        T* dst = x + static_cast<std::size_t>(c) * g.in_plane();
        for (int oh = 0; oh < g.ho; ++oh) {
          const int ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.h) continue;
          T* line = dst + static_cast<std::size_t>(ih) * g.w;
          const T* src = row + static_cast<std::size_t>(oh) * g.wo;
          for (int ow = 0; ow < g.wo; ++ow) {
            const int iw = ow * g.stride - g.pad + kj;
            if (iw >= 0 && iw < g.w) line[iw] += src[ow];
          }
        }
      }
    }
  }
}

// C[m, n] += sum_k A[m, k] * B[k, n]
template <class T>
void GemmNN(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m, n] += sum_k A[k, m] * B[k, n]
template <class T>
void GemmTN(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = a[p * m + i];
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
T Dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  for (; i < n; ++i) acc[0] += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

// C[m, n] += sum_k A[m, k] * B[n, k]
template <class T>
void GemmNT(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += Dot(a + i * k, b + j * k, k);
  }
}

// y[cout, ho*wo] += W[cout, patch] * im2col(x)
template <class T>
void ConvForwardAdd(const T* x, const T* weight, const ConvGeometry& g, T* y,
                    std::vector<T>& scratch) {
  scratch.resize(g.patch() * g.out_plane());
  Im2Col(x, g, scratch.data());
  GemmNN(static_cast<std::size_t>(g.cout), g.out_plane(), g.patch(), weight, scratch.data(), y);
}

// dx[cin, h, w] += col2im(W^T * dy)
template <class T>
void ConvBackwardDataAdd(const T* dy, const T* weight, const ConvGeometry& g, T* dx,
                         std::vector<T>& scratch) {
  scratch.assign(g.patch() * g.out_plane(), T(0));
  GemmTN(g.patch(), g.out_plane(), static_cast<std::size_t>(g.cout), weight, dy,
         scratch.data());
  Col2ImAdd(scratch.data(), g, dx);
}

// dW[cout, patch] += dy * im2col(x)^T
template <class T>
void ConvBackwardWeightAdd(const T* x, const T* dy, const ConvGeometry& g, T* dweight,
                           std::vector<T>& scratch) {
  scratch.resize(g.patch() * g.out_plane());
  Im2Col(x, g, scratch.data());
  GemmNT(static_cast<std::size_t>(g.cout), g.patch(), g.out_plane(), dy, scratch.data(),
         dweight);
}

}  // namespace melfix::kernels

#endif  // MELFIX_SRC_CORE_CONV_KERNELS_HPP_
