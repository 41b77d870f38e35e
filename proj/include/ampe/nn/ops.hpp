/*
 * Copyright (c) The ampe authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Primitive kernels shared by the layer catalog. Backward variants
// accumulate (+=) into their gradient outputs.

#include "ampe/tensor.hpp"

#include <cstdint>
#include <vector>

namespace ampe::nn {

/// Gathers reflect-padded k×k patches: rows are (channel, ky, kx), columns
/// output pixels. Output spatial dims are input dims divided by stride.
template <typename Scalar>
Mat<Scalar> im2col(const Tensor<Scalar>& x, Index k, Index stride) {
  const Index pad = k / 2;
  const Index ho = x.height / stride;
  const Index wo = x.width / stride;
  std::vector<Index> ys(k * ho), xs(k * wo);
  for (Index ky = 0; ky < k; ++ky)
    for (Index oy = 0; oy < ho; ++oy) ys[ky * ho + oy] = reflect_index(oy * stride + ky - pad, x.height);
  for (Index kx = 0; kx < k; ++kx)
    for (Index ox = 0; ox < wo; ++ox) xs[kx * wo + ox] = reflect_index(ox * stride + kx - pad, x.width);

  Mat<Scalar> cols(x.channels * k * k, ho * wo);
  for (Index c = 0; c < x.channels; ++c) {
    const Scalar* src = x.data.row(c).data();
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        Scalar* dst = cols.row((c * k + ky) * k + kx).data();
        const Index* xi = &xs[kx * wo];
        for (Index oy = 0; oy < ho; ++oy) {
          const Scalar* srow = src + ys[ky * ho + oy] * x.width;
          Scalar* drow = dst + oy * wo;
          for (Index ox = 0; ox < wo; ++ox) drow[ox] = srow[xi[ox]];
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatters patch gradients back onto `dx`.
template <typename Scalar>
void col2im_add(const Mat<Scalar>& cols, Index k, Index stride, Tensor<Scalar>& dx) {
  const Index pad = k / 2;
  const Index ho = dx.height / stride;
  const Index wo = dx.width / stride;
  std::vector<Index> ys(k * ho), xs(k * wo);
  for (Index ky = 0; ky < k; ++ky)
    for (Index oy = 0; oy < ho; ++oy) ys[ky * ho + oy] = reflect_index(oy * stride + ky - pad, dx.height);
  for (Index kx = 0; kx < k; ++kx)
    for (Index ox = 0; ox < wo; ++ox) xs[kx * wo + ox] = reflect_index(ox * stride + kx - pad, dx.width);

  for (Index c = 0; c < dx.channels; ++c) {
    Scalar* dst = dx.data.row(c).data();
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Scalar* src = cols.row((c * k + ky) * k + kx).data();
        const Index* xi = &xs[kx * wo];
        for (Index oy = 0; oy < ho; ++oy) {
          Scalar* drow = dst + ys[ky * ho + oy] * dx.width;
          const Scalar* srow = src + oy * wo;
          for (Index ox = 0; ox < wo; ++ox) drow[xi[ox]] += srow[ox];
        }
      }
    }
  }
}

inline void require_divisible(Index h, Index w, Index f, const char* what) {
  if (f < 1 || h % f != 0 || w % f != 0) {
    throw ShapeError(std::string(what) + ": spatial dims " + std::to_string(h) + "x" + std::to_string(w) +
                     " not divisible by " + std::to_string(f));
  }
}

/// Same-padded (reflect) convolution. `weight` is cout × (cin·k·k),
/// `bias` is cout × 1 or null.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Mat<Scalar>& weight, const Mat<Scalar>* bias, Index k,
                      Index stride = 1) {
  require_divisible(x.height, x.width, stride, "conv");
  Tensor<Scalar> y;
  y.channels = weight.rows();
  y.height = x.height / stride;
  y.width = x.width / stride;
  if (k == 1 && stride == 1) {
    y.data.noalias() = weight * x.data;
  } else {
    y.data.noalias() = weight * im2col(x, k, stride);
  }
  if (bias) y.data.colwise() += bias->col(0);
  return y;
}

template <typename Scalar>
void conv2d_backward(const Tensor<Scalar>& x, const Mat<Scalar>& weight, Index k, Index stride,
                     const Tensor<Scalar>& dy, Mat<Scalar>& dweight, Mat<Scalar>* dbias, Tensor<Scalar>* dx) {
  if (dbias) dbias->col(0) += dy.data.rowwise().sum();
  if (k == 1 && stride == 1) {
    dweight.noalias() += dy.data * x.data.transpose();
    if (dx) dx->data.noalias() += weight.transpose() * dy.data;
    return;
  }
  const Mat<Scalar> cols = im2col(x, k, stride);
  dweight.noalias() += dy.data * cols.transpose();
  if (dx) {
    const Mat<Scalar> dcols = weight.transpose() * dy.data;
    col2im_add(dcols, k, stride, *dx);
  }
}

template <typename Scalar>
Tensor<Scalar> avg_pool(const Tensor<Scalar>& x, Index f) {
  require_divisible(x.height, x.width, f, "downsample");
  if (f == 1) return x;
  Tensor<Scalar> y(x.channels, x.height / f, x.width / f);
  const Scalar inv = Scalar(1) / Scalar(f * f);
  for (Index c = 0; c < x.channels; ++c)
    for (Index yy = 0; yy < x.height; ++yy)
      for (Index xx = 0; xx < x.width; ++xx) y(c, yy / f, xx / f) += x(c, yy, xx);
  y.data *= inv;
  return y;
}

template <typename Scalar>
void avg_pool_backward(const Tensor<Scalar>& dy, Index f, Tensor<Scalar>& dx) {
  const Scalar inv = Scalar(1) / Scalar(f * f);
  for (Index c = 0; c < dx.channels; ++c)
    for (Index yy = 0; yy < dx.height; ++yy)
      for (Index xx = 0; xx < dx.width; ++xx) dx(c, yy, xx) += dy(c, yy / f, xx / f) * inv;
}

template <typename Scalar>
Tensor<Scalar> upsample_nearest(const Tensor<Scalar>& x, Index f) {
  if (f == 1) return x;
  Tensor<Scalar> y(x.channels, x.height * f, x.width * f);
  for (Index c = 0; c < y.channels; ++c)
    for (Index yy = 0; yy < y.height; ++yy)
      for (Index xx = 0; xx < y.width; ++xx) y(c, yy, xx) = x(c, yy / f, xx / f);
  return y;
}

template <typename Scalar>
void upsample_nearest_backward(const Tensor<Scalar>& dy, Index f, Tensor<Scalar>& dx) {
  for (Index c = 0; c < dy.channels; ++c)
    for (Index yy = 0; yy < dy.height; ++yy)
      for (Index xx = 0; xx < dy.width; ++xx) dx(c, yy / f, xx / f) += dy(c, yy, xx);
}

/// FNV-1a over the sign bits of `pre`; lets gradient checks detect when a
/// perturbation flips a ReLU across its kink.
template <typename Derived>
std::uint64_t sign_pattern(const Eigen::DenseBase<Derived>& pre, std::uint64_t h = 1469598103934665603ULL) {
  for (Index i = 0; i < pre.rows(); ++i)
    for (Index j = 0; j < pre.cols(); ++j) {
      h ^= static_cast<std::uint64_t>(pre(i, j) > 0);
      h *= 1099511628211ULL;
    }
  return h;
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
}

template <typename Scalar>
void relu_inplace(Tensor<Scalar>& t) {
  t.array() = t.array().max(Scalar(0));
}

/// dx += dy where out > 0.
template <typename Scalar>
void relu_backward_add(const Tensor<Scalar>& out, const Tensor<Scalar>& dy, Tensor<Scalar>& dx) {
  dx.array() += (out.array() > Scalar(0)).select(dy.array(), Scalar(0));
}

}  // namespace ampe::nn
