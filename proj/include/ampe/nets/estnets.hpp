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

// Two-branch estimation unit. Both branches share one topology:
//   conv9x9 -> 2x (avgpool2 + conv) -> res blocks -> 2x upsample_conv
//   -> concat with the conv9x9 features -> conv3x3 -> activation
// and differ only in the output activation (ReLU for transmission, tanh for
// the signed rain layer).

#include "ampe/nn/network.hpp"
#include "ampe/rain_model.hpp"

namespace ampe::nets {

enum class EstKind { kTransmission, kRain };

std::string_view est_kind_name(EstKind kind);
EstKind est_kind_from_name(std::string_view name);

struct EstNetConfig {
  EstKind kind = EstKind::kTransmission;
  Index base_channels = 16;
  Index resblocks = 5;
  Index head_kernel = 9;

  friend bool operator==(const EstNetConfig&, const EstNetConfig&) = default;
};

void to_json(nlohmann::json& j, const EstNetConfig& c);
void from_json(const nlohmann::json& j, EstNetConfig& c);

inline constexpr Index kGuidedChannels = 7;

/// Output bias of a fresh EstNet-T.
inline constexpr double kInitialTransmission = 0.9;

/// Packs [I | guide | I∘guide] into a 7-channel tensor.
template <typename Scalar>
Tensor<Scalar> assemble_guided_input(const Tensor<Scalar>& image, const Tensor<Scalar>& guide) {
  if (image.channels != 3 || guide.channels != 1 || !image.shape().same_spatial(guide.shape())) {
    throw ShapeError("guided input: expected 3-channel image and matching 1-channel guide, got " +
                     to_string(image.shape()) + " and " + to_string(guide.shape()));
  }
  if (guide.data.minCoeff() < Scalar(0) || guide.data.maxCoeff() > Scalar(1)) {
    throw ConfigError("guided input: guide values must lie in [0,1]");
  }
  Tensor<Scalar> out(kGuidedChannels, image.height, image.width);
  out.data.topRows(3) = image.data;
  out.data.row(3) = guide.data.row(0);
  for (Index c = 0; c < 3; ++c) out.data.row(4 + c).array() = image.data.row(c).array() * guide.data.row(0).array();
  return out;
}

template <typename Scalar>
Tensor<Scalar> complement(const Tensor<Scalar>& guide) {
  Tensor<Scalar> out(guide.shape());
  out.array() = Scalar(1) - guide.array();
  return out;
}

template <typename Scalar>
nn::Network<Scalar> build_estnet(const EstNetConfig& cfg, std::uint64_t seed) {
  using nn::LayerSpec;
  nn::Network<Scalar> net;
  const Index c = cfg.base_channels;
  const auto in = net.add_input("guided", kGuidedChannels);
  auto head = net.add("head", LayerSpec::conv(kGuidedChannels, c, cfg.head_kernel), {in});
  head = net.add("head_relu", LayerSpec::relu(), {head});
  auto x = head;
  for (int d = 1; d <= 2; ++d) {
    const std::string p = "down" + std::to_string(d) + "/";
    x = net.add(p + "pool", LayerSpec::downsample(2), {x});
    x = net.add(p + "conv", LayerSpec::conv(c, c, 3), {x});
    x = net.add(p + "relu", LayerSpec::relu(), {x});
  }
  for (Index r = 0; r < cfg.resblocks; ++r) x = net.add("res" + std::to_string(r), LayerSpec::res_block(c), {x});
  for (int u = 1; u <= 2; ++u) {
    const std::string p = "up" + std::to_string(u) + "/";
    x = net.add(p + "conv", LayerSpec::upsample_conv(2, c, c), {x});
    x = net.add(p + "relu", LayerSpec::relu(), {x});
  }
  x = net.add("skip_cat", LayerSpec::concat(), {x, head});
  x = net.add("out_conv", LayerSpec::conv(2 * c, 3, 3), {x});
  x = net.add("out_act", cfg.kind == EstKind::kTransmission ? LayerSpec::relu() : LayerSpec::tanh(), {x});
  net.set_outputs({x});
  net.init_params(seed);
  // T̂ starts inside the unclamped range, R̂ near zero.
  const double b0 = cfg.kind == EstKind::kTransmission ? kInitialTransmission : 0.0;
  net.init_head("out_conv", 0.1, {b0, b0, b0});
  return net;
}

/// T̂ = clamp(F(I, 1−L̂, I∘(1−L̂)), ε, 1).
template <typename Scalar>
Tensor<Scalar> estimate_T(const nn::Network<Scalar>& net_t, const Tensor<Scalar>& image, const Tensor<Scalar>& loc,
                          double eps = kDefaultTransmissionFloor) {
  return clamp_transmission(net_t.forward(assemble_guided_input(image, complement(loc))).outputs[0], eps);
}

/// R̂ = G(I, L̂, I∘L̂).
template <typename Scalar>
Tensor<Scalar> estimate_R(const nn::Network<Scalar>& net_r, const Tensor<Scalar>& image, const Tensor<Scalar>& loc) {
  return net_r.forward(assemble_guided_input(image, loc)).outputs[0];
}

}  // namespace ampe::nets
