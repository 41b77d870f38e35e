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

// Central finite-difference verification of reverse-mode gradients.
// Double precision only.

#include "ampe/nn/network.hpp"

#include <functional>

namespace ampe::nn {

struct GradCheckOptions {
  double delta = 1e-5;
  /// Above this many entries a random subset is drawn.
  std::size_t max_entries = 400;
  /// Every target array contributes at least this many entries.
  std::size_t min_per_target = 3;
  /// Relative error denominator is max(|analytic|, |numeric|, floor).
  double floor = 1e-6;
  std::uint64_t seed = 7;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Entries whose perturbation moved an activation across a kink.
  std::size_t skipped_kinks = 0;
  std::string worst;
};

/// One array of values being checked together with its analytic gradient.
struct CheckTarget {
  std::string name;
  Mat<double>* values = nullptr;
  const Mat<double>* analytic = nullptr;
};

struct LossSample {
  double loss = 0.0;
  std::uint64_t pattern = 0;
};

GradCheckReport check_gradients(std::span<const CheckTarget> targets, const std::function<LossSample()>& evaluate,
                                const GradCheckOptions& options = {});

/// Loss over network outputs: returns the value and d loss / d outputs.
struct LossAndGrad {
  double loss = 0.0;
  std::vector<Tensor<double>> output_grads;
};
using OutputLoss = std::function<LossAndGrad(const std::vector<Tensor<double>>& outputs)>;

/// Checks every parameter path (subsampled when large) and, when
/// `include_inputs` is set, the gradient with respect to each input.
GradCheckReport grad_check(Network<double>& net, std::vector<Tensor<double>> inputs, const OutputLoss& loss,
                           const GradCheckOptions& options = {}, bool include_inputs = true);

/// Smooth test loss Σ w∘y + ½Σ y² with fixed random weights w, so every
/// output entry carries a distinct gradient.
OutputLoss random_projection_loss(const Network<double>& net, const std::vector<Tensor<double>>& inputs,
                                  std::uint64_t seed = 11);

}  // namespace ampe::nn
