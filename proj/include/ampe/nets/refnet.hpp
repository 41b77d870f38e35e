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

// Refinement network: conv -> conv -> SPP -> conv -> tanh, remapped to
// (0,1) by (x+1)/2.

#include "ampe/nn/network.hpp"
#include "ampe/rain_model.hpp"

namespace ampe::nets {

inline constexpr double kAlphaTrain = 0.9;

struct RefNetConfig {
  std::vector<Index> spp_factors{4, 8, 16, 32};
  Index base_channels = 16;
  /// Channels each pyramid level is reduced to; 0 means base_channels / 4.
  Index reduce_channels = 0;
  double alpha_train = kAlphaTrain;

  Index reduction() const { return reduce_channels > 0 ? reduce_channels : std::max<Index>(1, base_channels / 4); }
  void validate() const;

  friend bool operator==(const RefNetConfig&, const RefNetConfig&) = default;
};

void to_json(nlohmann::json& j, const RefNetConfig& c);
void from_json(const nlohmann::json& j, RefNetConfig& c);

template <typename Scalar>
nn::Network<Scalar> build_refnet(const RefNetConfig& cfg, std::uint64_t seed) {
  using nn::LayerSpec;
  cfg.validate();
  nn::Network<Scalar> net;
  const Index c = cfg.base_channels;
  const Index r = cfg.reduction();
  const auto in = net.add_input("estimate", 3);
  auto x = net.add("conv1", LayerSpec::conv(3, c, 3), {in});
  x = net.add("relu1", LayerSpec::relu(), {x});
  x = net.add("conv2", LayerSpec::conv(c, c, 3), {x});
  x = net.add("relu2", LayerSpec::relu(), {x});
  x = net.add("spp", LayerSpec::spp(c, r, cfg.spp_factors), {x});
  x = net.add("out_conv", LayerSpec::conv(c + r * static_cast<Index>(cfg.spp_factors.size()), 3, 3), {x});
  x = net.add("out_tanh", LayerSpec::tanh(), {x});
  x = net.add("to_unit", LayerSpec::affine(0.5, 0.5), {x});
  net.set_outputs({x});
  net.init_params(seed);
  return net;
}

template <typename Scalar>
Tensor<Scalar> refine(const nn::Network<Scalar>& net, const Tensor<Scalar>& model_estimate) {
  return net.forward(model_estimate).outputs[0];
}

/// B̂ = α·B_m + (1−α)·R(B_m).
template <typename Scalar>
Tensor<Scalar> refine_and_blend(const nn::Network<Scalar>& net, const Tensor<Scalar>& model_estimate, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1], got " + std::to_string(alpha));
  return alpha_blend(model_estimate, refine(net, model_estimate), alpha);
}

}  // namespace ampe::nets
