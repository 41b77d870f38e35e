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

#include "ampe/nn/network.hpp"

#include <cmath>
#include <stdexcept>

namespace ampe::nn {

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// lr₀ · decay^epoch.
inline double scheduled_lr(double initial, double decay, int epoch) { return initial * std::pow(decay, epoch); }

/// Optimizer state for one network: step count and first/second moments.
template <typename Scalar>
struct TrainState {
  long step = 0;  // number of updates applied so far
  int epoch = 0;
  double lr = 1e-3;
  std::vector<Mat<Scalar>> first_moment;
  std::vector<Mat<Scalar>> second_moment;

  static TrainState for_network(const Network<Scalar>& net, double lr) {
    TrainState s;
    s.lr = lr;
    s.first_moment = net.zero_gradients();
    s.second_moment = net.zero_gradients();
    return s;
  }
};

/// One bias-corrected Adam update of every parameter of `net`. A non-finite
/// gradient aborts before any parameter is touched.
template <typename Scalar>
void adam_step(Network<Scalar>& net, TrainState<Scalar>& state, const Gradients<Scalar>& grads,
               const AdamConfig& cfg = {}) {
  if (grads.size() != net.parameters().size() || state.first_moment.size() != grads.size()) {
    throw ShapeError("adam_step: gradient/state count does not match parameters");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].rows() != net.value(i).rows() || grads[i].cols() != net.value(i).cols()) {
      throw ShapeError("adam_step: gradient shape mismatch for " + net.parameters()[i].path);
    }
    if (!grads[i].allFinite()) throw NonFiniteError("non-finite gradient in parameter " + net.parameters()[i].path);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const auto b1 = Scalar(cfg.beta1);
  const auto b2 = Scalar(cfg.beta2);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto m = state.first_moment[i].array();
    auto v = state.second_moment[i].array();
    const auto g = grads[i].array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    net.mutable_value(i).array() -=
        Scalar(state.lr) * (m / Scalar(c1)) / ((v / Scalar(c2)).sqrt() + Scalar(cfg.eps));
  }
}

}  // namespace ampe::nn
