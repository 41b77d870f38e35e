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

// Training objectives in their exact sum-of-squares form. Each takes one
// sample; batch losses are sums over samples. The *_grad variants return
// d(scale·loss)/d(estimate) so the trainer can pass scale = 1/N for the
// mean reduction.

#include "ampe/tensor.hpp"

#include <string_view>

namespace ampe::loss {

enum class ModelLoss { kInversion, kForward };  // L1, L2

inline std::string_view name(ModelLoss m) { return m == ModelLoss::kInversion ? "L1" : "L2"; }

/// Odd steps use the inversion residual, even steps the forward residual.
/// Steps count from 1.
inline ModelLoss select_model_loss(long step, bool use_forward_loss = true) {
  if (step < 1) throw ConfigError("loss schedule: step index starts at 1, got " + std::to_string(step));
  if (!use_forward_loss) return ModelLoss::kInversion;
  return step % 2 == 1 ? ModelLoss::kInversion : ModelLoss::kForward;
}

enum class Reduction { kSum, kMean };

inline std::string_view name(Reduction r) { return r == Reduction::kSum ? "sum" : "mean"; }

template <typename Scalar>
double sum_squared_difference(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_shape(a.shape(), b.shape(), "sum of squares");
  return (a.data.template cast<double>() - b.data.template cast<double>()).squaredNorm();
}

/// Σ (L̂ − L)².
template <typename Scalar>
double loss_loc(const Tensor<Scalar>& predicted, const Tensor<Scalar>& target) {
  return sum_squared_difference(predicted, target);
}

template <typename Scalar>
Tensor<Scalar> loss_loc_grad(const Tensor<Scalar>& predicted, const Tensor<Scalar>& target, double scale) {
  require_same_shape(predicted.shape(), target.shape(), "loss_loc");
  Tensor<Scalar> g(predicted.shape());
  g.array() = Scalar(2 * scale) * (predicted.array() - target.array());
  return g;
}

/// Σ (B − (I − R̂) ⊘ T̂)². T̂ is used as given; callers clamp it first.
template <typename Scalar>
double loss_L1(const Tensor<Scalar>& clean, const Tensor<Scalar>& image, const Tensor<Scalar>& rain,
               const Tensor<Scalar>& trans) {
  require_same_shape(clean.shape(), image.shape(), "loss_L1");
  require_same_shape(rain.shape(), image.shape(), "loss_L1");
  require_same_shape(trans.shape(), image.shape(), "loss_L1");
  const auto b = clean.data.template cast<double>().array();
  const auto i = image.data.template cast<double>().array();
  const auto r = rain.data.template cast<double>().array();
  const auto t = trans.data.template cast<double>().array();
  return (b - (i - r) / t).square().sum();
}

/// Σ (I − T̂∘B − R̂)².
template <typename Scalar>
double loss_L2(const Tensor<Scalar>& clean, const Tensor<Scalar>& image, const Tensor<Scalar>& rain,
               const Tensor<Scalar>& trans) {
  require_same_shape(clean.shape(), image.shape(), "loss_L2");
  require_same_shape(rain.shape(), image.shape(), "loss_L2");
  require_same_shape(trans.shape(), image.shape(), "loss_L2");
  const auto b = clean.data.template cast<double>().array();
  const auto i = image.data.template cast<double>().array();
  const auto r = rain.data.template cast<double>().array();
  const auto t = trans.data.template cast<double>().array();
  return (i - t * b - r).square().sum();
}

/// Σ (α·B_m + (1−α)·refined − B)².
template <typename Scalar>
double loss_refine(const Tensor<Scalar>& model_estimate, const Tensor<Scalar>& refined, const Tensor<Scalar>& clean,
                   double alpha) {
  require_same_shape(model_estimate.shape(), clean.shape(), "loss_refine");
  require_same_shape(refined.shape(), clean.shape(), "loss_refine");
  const auto m = model_estimate.data.template cast<double>().array();
  const auto f = refined.data.template cast<double>().array();
  const auto b = clean.data.template cast<double>().array();
  return (alpha * m + (1.0 - alpha) * f - b).square().sum();
}

/// Gradients of scale·L w.r.t. the rain layer and the (already clamped)
/// transmission.
template <typename Scalar>
struct ModelLossGrad {
  double value = 0.0;  // unscaled sum form
  Tensor<Scalar> d_rain;
  Tensor<Scalar> d_trans;
};

template <typename Scalar>
ModelLossGrad<Scalar> model_loss_grad(ModelLoss which, const Tensor<Scalar>& clean, const Tensor<Scalar>& image,
                                      const Tensor<Scalar>& rain, const Tensor<Scalar>& trans, double scale) {
  ModelLossGrad<Scalar> g;
  g.d_rain = Tensor<Scalar>(image.shape());
  g.d_trans = Tensor<Scalar>(image.shape());
  const auto b = clean.array();
  const auto i = image.array();
  const auto r = rain.array();
  const auto t = trans.array();
  const Scalar two_s = Scalar(2 * scale);
  if (which == ModelLoss::kInversion) {
    g.value = loss_L1(clean, image, rain, trans);
    // u = (I − R)/T;  L = Σ(u − B)²;  ∂u/∂R = −1/T;  ∂u/∂T = −u/T
    const auto u = (i - r) / t;
    const auto du = two_s * (u - b);
    g.d_rain.array() = -du / t;
    g.d_trans.array() = -du * u / t;
  } else {
    g.value = loss_L2(clean, image, rain, trans);
    const auto e = t * b + r - i;
    g.d_rain.array() = two_s * e;
    g.d_trans.array() = two_s * e * b;
  }
  return g;
}

}  // namespace ampe::loss
