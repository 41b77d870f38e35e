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

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ampe {

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape {
  Index channels = 0;
  Index height = 0;
  Index width = 0;

  Index pixels() const { return height * width; }
  Index size() const { return channels * height * width; }
  bool same_spatial(const Shape& o) const { return height == o.height && width == o.width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

/// Channel-major feature map: one row per channel, each row a row-major
/// height*width plane. This layout makes convolution a single GEMM over
/// an im2col buffer and lets pointwise math run on `data.array()`.
template <typename Scalar>
struct Tensor {
  using Storage = Mat<Scalar>;

  Index channels = 0;
  Index height = 0;
  Index width = 0;
  Storage data;

  Tensor() = default;
  Tensor(Index c, Index h, Index w) : channels(c), height(h), width(w), data(Storage::Zero(c, h * w)) {}
  explicit Tensor(const Shape& s) : Tensor(s.channels, s.height, s.width) {}

  static Tensor constant(Index c, Index h, Index w, Scalar value) {
    Tensor t(c, h, w);
    t.data.setConstant(value);
    return t;
  }
  static Tensor constant(const Shape& s, Scalar value) { return constant(s.channels, s.height, s.width, value); }

  Shape shape() const { return {channels, height, width}; }
  Index pixels() const { return height * width; }
  Index size() const { return data.size(); }

  Scalar& operator()(Index c, Index y, Index x) { return data(c, y * width + x); }
  Scalar operator()(Index c, Index y, Index x) const { return data(c, y * width + x); }

  auto array() { return data.array(); }
  auto array() const { return data.array(); }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out;
    out.channels = channels;
    out.height = height;
    out.width = width;
    out.data = data.template cast<Other>();
    return out;
  }
};

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

/// Mirror index for reflect padding without edge repetition (…2 1 0 1 2…).
/// Offsets larger than the extent keep bouncing, so any pad width works.
inline Index reflect_index(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Concatenates along the channel axis; all parts must share spatial dims.
template <typename Scalar>
Tensor<Scalar> concat_channels(std::initializer_list<const Tensor<Scalar>*> parts) {
  Index channels = 0;
  const Tensor<Scalar>* first = *parts.begin();
  for (const auto* p : parts) {
    if (!p->shape().same_spatial(first->shape())) {
      throw ShapeError("concat: spatial mismatch " + to_string(p->shape()) + " vs " + to_string(first->shape()));
    }
    channels += p->channels;
  }
  Tensor<Scalar> out(channels, first->height, first->width);
  Index row = 0;
  for (const auto* p : parts) {
    out.data.middleRows(row, p->channels) = p->data;
    row += p->channels;
  }
  return out;
}

/// Reflect-pads to the next multiple of `multiple` on the bottom/right.
template <typename Scalar>
Tensor<Scalar> reflect_pad_to_multiple(const Tensor<Scalar>& t, Index multiple) {
  const Index h = (t.height + multiple - 1) / multiple * multiple;
  const Index w = (t.width + multiple - 1) / multiple * multiple;
  if (h == t.height && w == t.width) return t;
  Tensor<Scalar> out(t.channels, h, w);
  for (Index c = 0; c < t.channels; ++c)
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) out(c, y, x) = t(c, reflect_index(y, t.height), reflect_index(x, t.width));
  return out;
}

template <typename Scalar>
Tensor<Scalar> crop(const Tensor<Scalar>& t, Index height, Index width) {
  if (height > t.height || width > t.width) throw ShapeError("crop: target larger than source");
  Tensor<Scalar> out(t.channels, height, width);
  for (Index c = 0; c < t.channels; ++c)
    for (Index y = 0; y < height; ++y)
      for (Index x = 0; x < width; ++x) out(c, y, x) = t(c, y, x);
  return out;
}

}  // namespace ampe
