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

#include "ampe/nn/layers.hpp"

#include <atomic>
#include <cmath>
#include <optional>
#include <random>
#include <unordered_map>

namespace ampe::nn {

using NodeId = int;

struct ParamInfo {
  std::string path;
  std::vector<Index> dims;
  Index fan_in = 0;
  bool is_bias = false;
  double init_gain = 1.0;
};

/// Parameter gradients, index-aligned with Network::parameters().
template <typename Scalar>
using Gradients = std::vector<Mat<Scalar>>;

/// Activations and per-layer state from one forward call.
template <typename Scalar>
struct Cache {
  std::uint64_t network_id = 0;
  std::uint64_t version = 0;
  std::vector<Tensor<Scalar>> values;  // one per node
  std::vector<LayerCache<Scalar>> layers;

  /// Combined ReLU sign pattern of the whole pass.
  std::uint64_t pattern() const {
    std::uint64_t h = 0;
    for (const auto& l : layers) h = hash_combine(h, l.pattern);
    return h;
  }
};

template <typename Scalar>
struct ForwardResult {
  std::vector<Tensor<Scalar>> outputs;
  Cache<Scalar> cache;
};

template <typename Scalar>
struct BackwardResult {
  Gradients<Scalar> params;
  std::vector<Tensor<Scalar>> inputs;
};

/// Directed acyclic layer graph with named parameters. Nodes are appended in
/// topological order (a node may only consume earlier nodes), which makes
/// the graph acyclic by construction. Parameter paths are
/// "<node name>/<layer-local name>".
template <typename Scalar>
class Network {
 public:
  struct Node {
    std::string name;
    LayerSpec spec;
    std::shared_ptr<const Layer<Scalar>> layer;  // null for graph inputs
    std::vector<NodeId> inputs;
    Index channels = 0;
    std::size_t first_param = 0;
    std::size_t param_count = 0;
  };

  Network() : id_(next_id()) {}
  Network(const Network& o) : nodes_(o.nodes_), outputs_(o.outputs_), info_(o.info_), values_(o.values_),
                              input_ids_(o.input_ids_), id_(next_id()) {}
  Network& operator=(const Network& o) {
    if (this != &o) {
      nodes_ = o.nodes_;
      outputs_ = o.outputs_;
      info_ = o.info_;
      values_ = o.values_;
      input_ids_ = o.input_ids_;
      id_ = next_id();
      version_ = 0;
    }
    return *this;
  }
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  NodeId add_input(std::string name, Index channels) {
    Node n;
    n.name = std::move(name);
    n.channels = channels;
    nodes_.push_back(std::move(n));
    input_ids_.push_back(static_cast<NodeId>(nodes_.size() - 1));
    return input_ids_.back();
  }

  /// Appends a layer node. Throws ConfigError for invalid hyperparameters,
  /// channel mismatches, unknown inputs, or zero-fan-in parameters.
  NodeId add(std::string name, const LayerSpec& spec, std::vector<NodeId> inputs) {
    for (const auto& n : nodes_)
      if (n.name == name) throw ConfigError("duplicate node name '" + name + "'");
    auto layer = make_layer<Scalar>(spec);
    if (layer->arity() >= 0 && static_cast<Index>(inputs.size()) != layer->arity()) {
      throw ConfigError(name + ": expected " + std::to_string(layer->arity()) + " inputs");
    }
    if (inputs.empty()) throw ConfigError(name + ": layer needs at least one input");
    std::vector<Index> in_channels;
    for (NodeId id : inputs) {
      if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) throw ConfigError(name + ": unknown input node");
      in_channels.push_back(nodes_[id].channels);
    }
    Node n;
    try {
      n.channels = layer->output_channels(in_channels);
    } catch (const ConfigError& e) {
      throw ConfigError(name + ": " + e.what());
    }
    n.name = std::move(name);
    n.spec = spec;
    n.inputs = std::move(inputs);
    n.first_param = info_.size();
    for (const auto& d : layer->param_decls()) {
      if (!d.is_bias && d.fan_in <= 0) throw ConfigError(n.name + "/" + d.name + ": zero fan-in parameter");
      info_.push_back({n.name + "/" + d.name, d.dims, d.fan_in, d.is_bias, d.init_gain});
      values_.push_back(Mat<Scalar>::Zero(d.rows, d.cols));
    }
    n.param_count = info_.size() - n.first_param;
    n.layer = std::move(layer);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  void set_outputs(std::vector<NodeId> outputs) { outputs_ = std::move(outputs); }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<NodeId>& outputs() const { return outputs_; }
  std::size_t input_count() const { return input_ids_.size(); }
  Index input_channels(std::size_t i) const { return nodes_[input_ids_[i]].channels; }
  Index output_channels(std::size_t i) const { return nodes_[outputs_[i]].channels; }

  std::optional<NodeId> find_node(const std::string& name) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].name == name) return static_cast<NodeId>(i);
    return std::nullopt;
  }

  const std::vector<ParamInfo>& parameters() const { return info_; }
  const std::vector<Mat<Scalar>>& values() const { return values_; }
  const Mat<Scalar>& value(std::size_t i) const { return values_[i]; }
  /// Mutable access invalidates outstanding caches.
  Mat<Scalar>& mutable_value(std::size_t i) {
    ++version_;
    return values_[i];
  }
  std::optional<std::size_t> find_parameter(const std::string& path) const {
    for (std::size_t i = 0; i < info_.size(); ++i)
      if (info_[i].path == path) return i;
    return std::nullopt;
  }
  std::size_t parameter_size() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
    return n;
  }

  Gradients<Scalar> zero_gradients() const {
    Gradients<Scalar> g;
    g.reserve(values_.size());
    for (const auto& v : values_) g.push_back(Mat<Scalar>::Zero(v.rows(), v.cols()));
    return g;
  }

  /// Largest spatial divisor any layer needs (product of nested
  /// downsampling along the deepest path, and SPP/stride factors).
  Index required_divisor() const {
    std::vector<Index> scale(nodes_.size(), 1);
    Index best = 1;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      if (!n.layer) continue;
      Index s = 1;
      for (NodeId in : n.inputs) s = std::max(s, scale[in]);
      Index need = s;
      switch (n.spec.kind) {
        case LayerKind::kDownsample:
          s *= n.spec.factor;
          need = s;
          break;
        case LayerKind::kConv:
          s *= n.spec.stride;
          need = s;
          break;
        case LayerKind::kUpsampleConv:
          s = std::max<Index>(1, s / n.spec.factor);
          break;
        case LayerKind::kSpp:
          need = s * n.spec.factors.back();
          break;
        default:
          break;
      }
      scale[i] = s;
      best = std::max(best, need);
    }
    return best;
  }

  /// Deterministic per seed: each array draws from its own stream keyed by
  /// (seed, path), weights ~ N(0, gain²·2/fan_in), biases zero.
  void init_params(std::uint64_t seed) {
    ++version_;
    for (std::size_t i = 0; i < info_.size(); ++i) {
      Mat<Scalar>& v = values_[i];
      if (info_[i].is_bias) {
        v.setZero();
        continue;
      }
      const std::uint64_t h = fnv1a(info_[i].path);
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> normal(
          0.0, info_[i].init_gain * std::sqrt(2.0 / static_cast<double>(info_[i].fan_in)));
      for (Index r = 0; r < v.rows(); ++r)
        for (Index c = 0; c < v.cols(); ++c) v(r, c) = static_cast<Scalar>(normal(rng));
    }
  }

  /// Starts an output conv near a chosen operating point: weights scaled by
  /// `weight_gain`, bias set per output channel.
  void init_head(const std::string& layer, double weight_gain, const std::vector<double>& bias) {
    const auto w = find_parameter(layer + "/weight");
    const auto b = find_parameter(layer + "/bias");
    if (!w || !b) throw ConfigError("init_head: no conv named '" + layer + "'");
    Mat<Scalar>& bv = mutable_value(*b);
    if (static_cast<std::size_t>(bv.size()) != bias.size()) {
      throw ShapeError("init_head: '" + layer + "' has " + std::to_string(bv.size()) + " bias entries, got " +
                       std::to_string(bias.size()));
    }
    mutable_value(*w) *= static_cast<Scalar>(weight_gain);
    for (std::size_t i = 0; i < bias.size(); ++i) bv(static_cast<Index>(i)) = static_cast<Scalar>(bias[i]);
  }

  ForwardResult<Scalar> forward(std::span<const Tensor<Scalar>> inputs) const {
    if (inputs.size() != input_ids_.size()) {
      throw ShapeError("network expects " + std::to_string(input_ids_.size()) + " inputs, got " +
                       std::to_string(inputs.size()));
    }
    if (outputs_.empty()) throw ConfigError("network has no outputs");
    ForwardResult<Scalar> result;
    Cache<Scalar>& cache = result.cache;
    cache.network_id = id_;
    cache.version = version_;
    cache.values.resize(nodes_.size());
    cache.layers.resize(nodes_.size());
    for (std::size_t i = 0; i < input_ids_.size(); ++i) {
      const Node& n = nodes_[input_ids_[i]];
      if (inputs[i].channels != n.channels) {
        throw ShapeError(n.name + ": expected " + std::to_string(n.channels) + " channels, got " +
                         std::to_string(inputs[i].channels));
      }
      cache.values[input_ids_[i]] = inputs[i];
    }
    std::vector<const Tensor<Scalar>*> ins;
    std::vector<Shape> shapes;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      if (!n.layer) continue;
      ins.clear();
      shapes.clear();
      for (NodeId in : n.inputs) {
        ins.push_back(&cache.values[in]);
        shapes.push_back(cache.values[in].shape());
      }
      try {
        n.layer->check_input(shapes);
        cache.values[i] = n.layer->forward(ins, param_span(n), cache.layers[i]);
      } catch (const ShapeError& e) {
        throw ShapeError("layer '" + n.name + "': " + e.what());
      }
    }
    for (NodeId o : outputs_) result.outputs.push_back(cache.values[o]);
    return result;
  }

  ForwardResult<Scalar> forward(const Tensor<Scalar>& input) const { return forward(std::span(&input, 1)); }

  /// Accumulates parameter gradients into `grads` and, when requested,
  /// returns gradients w.r.t. each network input.
  void backward_into(const Cache<Scalar>& cache, std::span<const Tensor<Scalar>> output_grads, Gradients<Scalar>& grads,
                     std::vector<Tensor<Scalar>>* input_grads = nullptr) const {
    if (cache.network_id != id_ || cache.version != version_ || cache.values.size() != nodes_.size()) {
      throw std::logic_error("backward: cache is stale or belongs to a different network");
    }
    if (output_grads.size() != outputs_.size()) throw ShapeError("backward: wrong number of output gradients");
    if (grads.size() != values_.size()) throw ShapeError("backward: gradient buffer does not match parameters");

    std::vector<Tensor<Scalar>> node_grads(nodes_.size());
    std::vector<bool> live(nodes_.size(), false);
    for (std::size_t k = 0; k < outputs_.size(); ++k) {
      const NodeId o = outputs_[k];
      require_same_shape(output_grads[k].shape(), cache.values[o].shape(), "backward output gradient");
      if (!live[o]) {
        node_grads[o] = output_grads[k];
        live[o] = true;
      } else {
        node_grads[o].data += output_grads[k].data;
      }
    }
    std::vector<const Tensor<Scalar>*> ins;
    std::vector<Tensor<Scalar>> din;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      const Node& n = nodes_[i];
      if (!n.layer || !live[i]) continue;
      ins.clear();
      din.clear();
      for (NodeId in : n.inputs) {
        ins.push_back(&cache.values[in]);
        din.emplace_back(cache.values[in].shape());
      }
      n.layer->backward(ins, cache.values[i], node_grads[i], param_span(n), cache.layers[i],
                        std::span<Mat<Scalar>>(grads.data() + n.first_param, n.param_count), din);
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const NodeId in = n.inputs[k];
        if (!live[in]) {
          node_grads[in] = std::move(din[k]);
          live[in] = true;
        } else {
          node_grads[in].data += din[k].data;
        }
      }
      node_grads[i] = Tensor<Scalar>();
    }
    if (input_grads) {
      input_grads->clear();
      for (NodeId id : input_ids_) {
        input_grads->push_back(live[id] ? node_grads[id] : Tensor<Scalar>(cache.values[id].shape()));
      }
    }
  }

  BackwardResult<Scalar> backward(const Cache<Scalar>& cache, std::span<const Tensor<Scalar>> output_grads) const {
    BackwardResult<Scalar> r;
    r.params = zero_gradients();
    backward_into(cache, output_grads, r.params, &r.inputs);
    return r;
  }
  BackwardResult<Scalar> backward(const Cache<Scalar>& cache, const Tensor<Scalar>& output_grad) const {
    return backward(cache, std::span(&output_grad, 1));
  }

  /// Same graph with parameters converted to another scalar type.
  template <typename Other>
  Network<Other> cast() const {
    Network<Other> out;
    for (const auto& n : nodes_) {
      if (!n.layer) {
        out.add_input(n.name, n.channels);
      } else {
        out.add(n.name, n.spec, n.inputs);
      }
    }
    out.set_outputs(outputs_);
    for (std::size_t i = 0; i < values_.size(); ++i) out.mutable_value(i) = values_[i].template cast<Other>();
    return out;
  }

 private:
  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
  }
  static std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }
  std::span<const Mat<Scalar>> param_span(const Node& n) const {
    return std::span<const Mat<Scalar>>(values_.data() + n.first_param, n.param_count);
  }

  std::vector<Node> nodes_;
  std::vector<NodeId> outputs_;
  std::vector<ParamInfo> info_;
  std::vector<Mat<Scalar>> values_;
  std::vector<NodeId> input_ids_;
  std::uint64_t id_ = 0;
  std::uint64_t version_ = 0;
};

}  // namespace ampe::nn
