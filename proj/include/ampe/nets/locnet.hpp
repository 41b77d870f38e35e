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

// Rain-streak localization network: image (3ch) -> per-pixel rain
// probability (1ch).
//
//   shallow: three parallel dense blocks (kernels 7/5/3) on I, concatenated
//            with I and fused by a conv into f_l;
//   deep:    for each scale s, downsample by s, lift to `base_channels`,
//            run `resblocks` residual blocks, upsample_conv back, giving f_d;
//   head:    concat(f_l, f_d) -> fuse conv -> 2-channel conv -> softmax,
//            keep the rain channel.

#include "ampe/nn/network.hpp"

#include <cmath>

namespace ampe::nets {

/// Initial rain probability of an untrained LocNet.
inline constexpr double kRainPrior = 0.1;

struct LocNetConfig {
  std::vector<Index> dense_kernels{7, 5, 3};
  std::vector<Index> scale_factors{16, 8, 4, 2};
  Index resblocks = 5;
  Index base_channels = 16;
  Index dense_growth = 8;
  Index dense_depth = 3;

  friend bool operator==(const LocNetConfig&, const LocNetConfig&) = default;
};

void to_json(nlohmann::json& j, const LocNetConfig& c);
void from_json(const nlohmann::json& j, LocNetConfig& c);

template <typename Scalar>
nn::Network<Scalar> build_locnet(const LocNetConfig& cfg, std::uint64_t seed) {
  using nn::LayerSpec;
  nn::Network<Scalar> net;
  const Index c = cfg.base_channels;
  const auto in = net.add_input("image", 3);

  std::vector<nn::NodeId> shallow{in};
  Index shallow_channels = 3;
  for (Index k : cfg.dense_kernels) {
    shallow.push_back(net.add("dense" + std::to_string(k), LayerSpec::dense_block(3, k, cfg.dense_growth, cfg.dense_depth), {in}));
    shallow_channels += cfg.dense_growth * cfg.dense_depth;
  }
  auto fl = net.add("shallow_cat", LayerSpec::concat(), shallow);
  fl = net.add("shallow_conv", LayerSpec::conv(shallow_channels, c, 3), {fl});
  fl = net.add("shallow_relu", LayerSpec::relu(), {fl});

  std::vector<nn::NodeId> deep;
  for (Index s : cfg.scale_factors) {
    const std::string p = "branch" + std::to_string(s) + "/";
    auto x = net.add(p + "down", LayerSpec::downsample(s), {in});
    x = net.add(p + "lift", LayerSpec::conv(3, c, 3), {x});
    x = net.add(p + "lift_relu", LayerSpec::relu(), {x});
    for (Index r = 0; r < cfg.resblocks; ++r) x = net.add(p + "res" + std::to_string(r), LayerSpec::res_block(c), {x});
    x = net.add(p + "up", LayerSpec::upsample_conv(s, c, c), {x});
    deep.push_back(net.add(p + "up_relu", LayerSpec::relu(), {x}));
  }
  const auto fd = net.add("deep_cat", LayerSpec::concat(), deep);

  auto h = net.add("fuse_cat", LayerSpec::concat(), {fl, fd});
  h = net.add("fuse", LayerSpec::conv(c + c * static_cast<Index>(cfg.scale_factors.size()), c, 3), {h});
  h = net.add("fuse_relu", LayerSpec::relu(), {h});
  h = net.add("logits", LayerSpec::conv(c, 2, 3), {h});
  h = net.add("softmax", LayerSpec::softmax2(), {h});
  h = net.add("rain", LayerSpec::slice(1, 1), {h});
  net.set_outputs({h});
  net.init_params(seed);
  // Start at the streak prior instead of 0.5; a softmax trained under a
  // squared loss otherwise overshoots into the all-background saturation.
  net.init_head("logits", 0.1, {0.0, std::log(kRainPrior / (1.0 - kRainPrior))});
  return net;
}

/// L̂ = H(I): per-pixel rain probability in [0,1].
template <typename Scalar>
Tensor<Scalar> locnet_forward(const nn::Network<Scalar>& net, const Tensor<Scalar>& image) {
  const Index d = net.required_divisor();
  if (image.height % d != 0 || image.width % d != 0) {
    throw ShapeError("locnet: image " + to_string(image.shape()) + " not divisible by " + std::to_string(d));
  }
  return net.forward(image).outputs[0];
}

}  // namespace ampe::nets
