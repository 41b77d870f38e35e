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
#include "ampe/nn/grad_check.hpp"

#include <algorithm>
#include <set>

namespace ampe::nn {

GradCheckReport check_gradients(std::span<const CheckTarget> targets, const std::function<LossSample()>& evaluate,
                                const GradCheckOptions& options) {
  // (target, flat index) pairs to probe.
  std::vector<std::pair<std::size_t, Index>> entries;
  Index total = 0;
  for (const auto& t : targets) total += t.values->size();
  if (static_cast<std::size_t>(total) <= options.max_entries) {
    for (std::size_t t = 0; t < targets.size(); ++t)
      for (Index k = 0; k < targets[t].values->size(); ++k) entries.emplace_back(t, k);
  } else {
    std::mt19937_64 rng(options.seed);
    std::set<std::pair<std::size_t, Index>> chosen;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const Index n = targets[t].values->size();
      const auto want = std::min<std::size_t>(options.min_per_target, static_cast<std::size_t>(n));
      std::uniform_int_distribution<Index> pick(0, n - 1);
      while (std::count_if(chosen.begin(), chosen.end(), [&](const auto& e) { return e.first == t; }) <
             static_cast<std::ptrdiff_t>(want)) {
        chosen.emplace(t, pick(rng));
      }
    }
    std::uniform_int_distribution<Index> global(0, total - 1);
    while (chosen.size() < options.max_entries) {
      Index flat = global(rng);
      std::size_t t = 0;
      while (flat >= targets[t].values->size()) flat -= targets[t++].values->size();
      chosen.emplace(t, flat);
    }
    entries.assign(chosen.begin(), chosen.end());
  }

  const std::uint64_t base_pattern = evaluate().pattern;
  GradCheckReport report;
  for (const auto& [t, k] : entries) {
    double* v = targets[t].values->data() + k;
    const double saved = *v;
    *v = saved + options.delta;
    const LossSample plus = evaluate();
    *v = saved - options.delta;
    const LossSample minus = evaluate();
    *v = saved;
    if (plus.pattern != base_pattern || minus.pattern != base_pattern) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = (plus.loss - minus.loss) / (2.0 * options.delta);
    const double analytic = targets[t].analytic->data()[k];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), options.floor});
    const double rel = std::abs(numeric - analytic) / denom;
    ++report.checked;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst = targets[t].name + "[" + std::to_string(k) + "] analytic=" + std::to_string(analytic) +
                     " numeric=" + std::to_string(numeric);
    }
  }
  return report;
}

GradCheckReport grad_check(Network<double>& net, std::vector<Tensor<double>> inputs, const OutputLoss& loss,
                           const GradCheckOptions& options, bool include_inputs) {
  auto fwd = net.forward(std::span<const Tensor<double>>(inputs));
  const LossAndGrad lg = loss(fwd.outputs);
  const BackwardResult<double> grads = net.backward(fwd.cache, lg.output_grads);

  std::vector<CheckTarget> targets;
  for (std::size_t i = 0; i < net.parameters().size(); ++i) {
    targets.push_back({net.parameters()[i].path, &net.mutable_value(i), &grads.params[i]});
  }
  if (include_inputs) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      targets.push_back({"input" + std::to_string(i), &inputs[i].data, &grads.inputs[i].data});
    }
  }
  auto evaluate = [&]() {
    auto r = net.forward(std::span<const Tensor<double>>(inputs));
    return LossSample{loss(r.outputs).loss, r.cache.pattern()};
  };
  return check_gradients(targets, evaluate, options);
}

OutputLoss random_projection_loss(const Network<double>& net, const std::vector<Tensor<double>>& inputs,
                                  std::uint64_t seed) {
  auto outputs = net.forward(std::span<const Tensor<double>>(inputs)).outputs;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Tensor<double>> weights;
  for (const auto& o : outputs) {
    Tensor<double> w(o.shape());
    for (Index i = 0; i < w.size(); ++i) w.data.data()[i] = u(rng);
    weights.push_back(std::move(w));
  }
  // L = Σ w∘y + ½ Σ y²: linear term weights every output, quadratic keeps it non-trivial.
  return [weights](const std::vector<Tensor<double>>& ys) {
    LossAndGrad r;
    for (std::size_t k = 0; k < ys.size(); ++k) {
      r.loss += (weights[k].array() * ys[k].array()).sum() + 0.5 * ys[k].array().square().sum();
      Tensor<double> g(ys[k].shape());
      g.array() = weights[k].array() + ys[k].array();
      r.output_grads.push_back(std::move(g));
    }
    return r;
  };
}

}  // namespace ampe::nn
