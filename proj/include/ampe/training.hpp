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

// Two-phase training. Phase "locnet" fits H(·) to the binary location maps
// with a mean squared error. Phase "main" freezes H(·) and trains the two
// estimation branches and the refinement net jointly on L_m + L_r, where L_m
// alternates between L1 (odd steps) and L2 (even steps). Both phases use
// Adam with lr = lr₀·decay^epoch and mean-reduced losses.

#include "ampe/dataset.hpp"
#include "ampe/model.hpp"
#include "ampe/nn/adam.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ampe {

enum class Phase { kLocNet, kMain };

std::string_view phase_name(Phase p);
Phase phase_from_name(std::string_view name);

struct TrainConfig {
  Phase phase = Phase::kLocNet;
  /// 0 picks the phase default: 4 for locnet, 2 for main.
  int batch_size = 0;
  Index patch_size = 64;
  double learning_rate = 1e-3;
  double lr_decay = 0.1;
  int epochs = 1;
  int steps_per_epoch = 300;
  double alpha_train = nets::kAlphaTrain;
  bool use_locnet = true;
  bool use_estnet_t = true;
  bool use_loss_l2 = true;
  std::uint64_t seed = 0;
  double transmission_floor = kDefaultTransmissionFloor;
  Architecture arch;

  int effective_batch() const { return batch_size > 0 ? batch_size : (phase == Phase::kLocNet ? 4 : 2); }
  ModelFlags flags() const { return {use_locnet, use_estnet_t, transmission_floor}; }
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Strict: unknown fields raise ConfigError.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct StepLog {
  long step = 0;  // global, from 1
  int epoch = 0;
  std::string loss;  // "loc", "L1" or "L2"
  double value = 0.0;
  double refine = 0.0;  // main phase only
  double lr = 0.0;

  nlohmann::json to_json(Phase phase) const;
};

using StepCallback = std::function<void(const StepLog&)>;

/// Deterministic batch order: successive seeded permutations of the sample
/// indices, consumed batch by batch across permutation boundaries.
class BatchSampler {
 public:
  BatchSampler(std::size_t count, std::uint64_t seed);
  std::vector<std::size_t> next(int batch);

 private:
  void reshuffle();
  std::size_t count_;
  std::uint64_t seed_;
  std::uint64_t pass_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> order_;
};

struct LocNetRun {
  nn::Network<float> net;
  std::vector<StepLog> log;
};

struct MainRun {
  Model<float> model;
  std::vector<StepLog> log;
};

/// Errors: empty dataset, use_locnet = false, non-finite loss.
LocNetRun train_locnet(const std::vector<Sample>& data, const TrainConfig& cfg, const StepCallback& on_step = {});

/// `locnet` must be given unless cfg.use_locnet is false; it is copied and
/// never modified.
MainRun train_main(const std::vector<Sample>& data, const nn::Network<float>* locnet, const TrainConfig& cfg,
                   const StepCallback& on_step = {});

/// Mean of loss_loc over whole images (not crops), per pixel.
double mean_location_loss(const nn::Network<float>& locnet, const std::vector<Sample>& data);

}  // namespace ampe
