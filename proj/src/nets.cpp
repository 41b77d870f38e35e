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
#include "ampe/nets/estnets.hpp"
#include "ampe/nets/locnet.hpp"
#include "ampe/nets/refnet.hpp"

namespace ampe::nets {

void to_json(nlohmann::json& j, const LocNetConfig& c) {
  j = {{"dense_kernels", c.dense_kernels}, {"scale_factors", c.scale_factors}, {"resblocks", c.resblocks},
       {"base_channels", c.base_channels}, {"dense_growth", c.dense_growth}, {"dense_depth", c.dense_depth}};
}

void from_json(const nlohmann::json& j, LocNetConfig& c) {
  c = LocNetConfig{};
  if (j.contains("dense_kernels")) j.at("dense_kernels").get_to(c.dense_kernels);
  if (j.contains("scale_factors")) j.at("scale_factors").get_to(c.scale_factors);
  if (j.contains("resblocks")) j.at("resblocks").get_to(c.resblocks);
  if (j.contains("base_channels")) j.at("base_channels").get_to(c.base_channels);
  if (j.contains("dense_growth")) j.at("dense_growth").get_to(c.dense_growth);
  if (j.contains("dense_depth")) j.at("dense_depth").get_to(c.dense_depth);
}

std::string_view est_kind_name(EstKind kind) { return kind == EstKind::kTransmission ? "T" : "R"; }

EstKind est_kind_from_name(std::string_view name) {
  if (name == "T") return EstKind::kTransmission;
  if (name == "R") return EstKind::kRain;
  throw ConfigError("unknown estimation branch '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const EstNetConfig& c) {
  j = {{"kind", est_kind_name(c.kind)},
       {"base_channels", c.base_channels},
       {"resblocks", c.resblocks},
       {"head_kernel", c.head_kernel}};
}

void from_json(const nlohmann::json& j, EstNetConfig& c) {
  c = EstNetConfig{};
  c.kind = est_kind_from_name(j.at("kind").get<std::string>());
  if (j.contains("base_channels")) j.at("base_channels").get_to(c.base_channels);
  if (j.contains("resblocks")) j.at("resblocks").get_to(c.resblocks);
  if (j.contains("head_kernel")) j.at("head_kernel").get_to(c.head_kernel);
}

void RefNetConfig::validate() const {
  if (spp_factors.empty()) throw ConfigError("refnet: spp factor list is empty");
  for (std::size_t i = 0; i < spp_factors.size(); ++i) {
    if (!nn::is_power_of_two(spp_factors[i]) || (i > 0 && spp_factors[i] <= spp_factors[i - 1])) {
      throw ConfigError("refnet: spp factors must be strictly increasing powers of 2");
    }
  }
  if (!(alpha_train >= 0.0 && alpha_train <= 1.0)) throw ConfigError("refnet: alpha_train must lie in [0,1]");
}

void to_json(nlohmann::json& j, const RefNetConfig& c) {
  j = {{"spp_factors", c.spp_factors},
       {"base_channels", c.base_channels},
       {"reduce_channels", c.reduce_channels},
       {"alpha_train", c.alpha_train}};
}

void from_json(const nlohmann::json& j, RefNetConfig& c) {
  c = RefNetConfig{};
  if (j.contains("spp_factors")) j.at("spp_factors").get_to(c.spp_factors);
  if (j.contains("base_channels")) j.at("base_channels").get_to(c.base_channels);
  if (j.contains("reduce_channels")) j.at("reduce_channels").get_to(c.reduce_channels);
  if (j.contains("alpha_train")) j.at("alpha_train").get_to(c.alpha_train);
}

}  // namespace ampe::nets
