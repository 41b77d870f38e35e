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

// Rainy imaging model I = T∘B + R, its pointwise inversion, and the
// background/refinement blend. Images, transmission maps and rain layers
// are all 3-channel Tensors; the functions here never clamp unless named so.

#include "ampe/tensor.hpp"

namespace ampe {

inline constexpr double kDefaultTransmissionFloor = 0.05;

/// T∘B + R, unclamped. This is the form used inside losses.
template <typename Scalar>
Tensor<Scalar> compose_raw(const Tensor<Scalar>& background, const Tensor<Scalar>& transmission,
                           const Tensor<Scalar>& rain) {
  require_same_shape(background.shape(), transmission.shape(), "compose");
  require_same_shape(background.shape(), rain.shape(), "compose");
  Tensor<Scalar> out(background.shape());
  out.array() = transmission.array() * background.array() + rain.array();
  return out;
}

template <typename Scalar>
Tensor<Scalar> clamp_unit(Tensor<Scalar> x) {
  x.array() = x.array().max(Scalar(0)).min(Scalar(1));
  return x;
}

/// Image-valued composition: T∘B + R clamped to [0,1].
template <typename Scalar>
Tensor<Scalar> compose(const Tensor<Scalar>& background, const Tensor<Scalar>& transmission,
                       const Tensor<Scalar>& rain) {
  return clamp_unit(compose_raw(background, transmission, rain));
}

/// (I − R) ⊘ max(T, ε). Finite for every finite input because ε > 0.
template <typename Scalar>
Tensor<Scalar> invert(const Tensor<Scalar>& image, const Tensor<Scalar>& rain, const Tensor<Scalar>& transmission,
                      double eps = kDefaultTransmissionFloor) {
  if (!(eps > 0.0)) throw ConfigError("invert: transmission floor must be > 0, got " + std::to_string(eps));
  require_same_shape(image.shape(), rain.shape(), "invert");
  require_same_shape(image.shape(), transmission.shape(), "invert");
  Tensor<Scalar> out(image.shape());
  out.array() = (image.array() - rain.array()) / transmission.array().max(Scalar(eps));
  return out;
}

/// α·B_m + (1−α)·refined. α outside [0,1] is rejected, never clamped.
template <typename Scalar>
Tensor<Scalar> alpha_blend(const Tensor<Scalar>& model_estimate, const Tensor<Scalar>& refined, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0,1], got " + std::to_string(alpha));
  }
  require_same_shape(model_estimate.shape(), refined.shape(), "alpha_blend");
  Tensor<Scalar> out(model_estimate.shape());
  const auto a = Scalar(alpha);
  out.array() = a * model_estimate.array() + (Scalar(1) - a) * refined.array();
  return out;
}

/// min(max(T, ε), 1) elementwise.
template <typename Scalar>
Tensor<Scalar> clamp_transmission(Tensor<Scalar> raw, double eps = kDefaultTransmissionFloor) {
  raw.array() = raw.array().max(Scalar(eps)).min(Scalar(1));
  return raw;
}

/// Derivative of clamp_transmission: 1 inside [ε,1], 0 outside.
template <typename Scalar>
Tensor<Scalar> clamp_transmission_mask(const Tensor<Scalar>& raw, double eps = kDefaultTransmissionFloor) {
  Tensor<Scalar> mask(raw.shape());
  mask.array() = (raw.array() >= Scalar(eps) && raw.array() <= Scalar(1)).template cast<Scalar>();
  return mask;
}

}  // namespace ampe
