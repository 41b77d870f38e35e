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

// Checkpoint directory layout:
//
//   <dir>/manifest.json            architecture, flags, training config,
//                                  alpha_train, loss reduction, subnet list
//   <dir>/<subnet>/manifest.json   {"architecture": {"net", "config"},
//                                   "parameters": [{"path", "shape", "dtype", "file"}]}
//   <dir>/<subnet>/<file>.bin      raw little-endian float32, row-major
//
// Subnets are locnet, estnet_t, estnet_r and refnet; disabled or not yet
// trained ones are simply absent.

#include "ampe/model.hpp"

#include <filesystem>

namespace ampe {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  nlohmann::json training = nlohmann::json::object();
  double alpha_train = nets::kAlphaTrain;
  loss::Reduction reduction = loss::Reduction::kMean;
};

void save_network(const nn::Network<float>& net, const nlohmann::json& architecture, const std::filesystem::path& dir);

/// Overwrites the parameters of `net` (already built from `architecture`).
/// A stored architecture, path list or shape that differs raises ConfigError;
/// unreadable or truncated files raise IoError.
void load_network(nn::Network<float>& net, const nlohmann::json& architecture, const std::filesystem::path& dir);

void save_checkpoint(const Model<float>& model, const CheckpointMeta& meta, const std::filesystem::path& dir);

struct LoadedCheckpoint {
  Model<float> model;
  CheckpointMeta meta;
  nlohmann::json manifest;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace ampe
