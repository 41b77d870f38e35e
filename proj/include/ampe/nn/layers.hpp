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

#include "ampe/nn/layer_spec.hpp"
#include "ampe/nn/ops.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ampe::nn {

/// Declares one parameter array a layer owns. `dims` is the logical shape
/// written to checkpoints; the in-memory matrix is rows × cols.
struct ParamDecl {
  std::string name;
  std::vector<Index> dims;
  Index rows = 0;
  Index cols = 0;
  Index fan_in = 0;
  bool is_bias = false;
  double init_gain = 1.0;  // multiplies the He standard deviation
};

/// Init gain of the last conv in a residual branch.
inline constexpr double kResidualInitGain = 0.1;

/// Per-call state a layer saves during forward for use in backward.
template <typename Scalar>
struct LayerCache {
  std::vector<Tensor<Scalar>> saved;
  std::uint64_t pattern = 0;
};

template <typename Scalar>
using InputSpan = std::span<const Tensor<Scalar>* const>;

/// Stateless layer: parameters live in the owning Network and are passed in,
/// so one layer object can serve concurrent forward calls.
template <typename Scalar>
class Layer {
 public:
  explicit Layer(LayerSpec spec) : spec_(std::move(spec)) {}
  virtual ~Layer() = default;

  const LayerSpec& spec() const { return spec_; }

  virtual std::vector<ParamDecl> param_decls() const { return {}; }
  virtual Index arity() const { return 1; }
  /// Channel-level check done when the graph is built.
  virtual Index output_channels(std::span<const Index> in) const = 0;
  /// Spatial check done on every forward; throws ShapeError.
  virtual void check_input(std::span<const Shape> in) const { (void)in; }

  virtual Tensor<Scalar> forward(InputSpan<Scalar> in, std::span<const Mat<Scalar>> params,
                                 LayerCache<Scalar>& cache) const = 0;

  /// Accumulates into `dparams` and `din` (both pre-sized).
  virtual void backward(InputSpan<Scalar> in, const Tensor<Scalar>& out, const Tensor<Scalar>& dout,
                        std::span<const Mat<Scalar>> params, const LayerCache<Scalar>& cache,
                        std::span<Mat<Scalar>> dparams, std::span<Tensor<Scalar>> din) const = 0;

 protected:
  void expect_channels(Index got, Index want) const {
    if (got != want) {
      throw ConfigError(std::string(kind_name(spec_.kind)) + ": expected " + std::to_string(want) +
                        " input channels, got " + std::to_string(got));
    }
  }

  LayerSpec spec_;
};

namespace detail {

inline ParamDecl weight_decl(std::string prefix, Index out, Index in, Index k) {
  return {prefix + "weight", {out, in, k, k}, out, in * k * k, in * k * k, false};
}
inline ParamDecl bias_decl(std::string prefix, Index out) { return {prefix + "bias", {out}, out, 1, 0, true}; }

template <typename Scalar>
Tensor<Scalar> rows_of(const Tensor<Scalar>& t, Index begin, Index count) {
  Tensor<Scalar> out;
  out.channels = count;
  out.height = t.height;
  out.width = t.width;
  out.data = t.data.middleRows(begin, count);
  return out;
}

}  // namespace detail

template <typename Scalar>
class ConvLayer final : public Layer<Scalar> {
 public:
  using Layer<Scalar>::Layer;
  std::vector<ParamDecl> param_decls() const override {
    const auto& s = this->spec_;
    return {detail::weight_decl("", s.out_channels, s.in_channels, s.kernel), detail::bias_decl("", s.out_channels)};
  }
  Index output_channels(std::span<const Index> in) const override {
    this->expect_channels(in[0], this->spec_.in_channels);
    return this->spec_.out_channels;
  }
  void check_input(std::span<const Shape> in) const override {
    require_divisible(in[0].height, in[0].width, this->spec_.stride, "conv stride");
  }
  Tensor<Scalar> forward(InputSpan<Scalar> in, std::span<const Mat<Scalar>> p, LayerCache<Scalar>&) const override {
    return conv2d(*in[0], p[0], &p[1], this->spec_.kernel, this->spec_.stride);
  }
  void backward(InputSpan<Scalar> in, const Tensor<Scalar>&, const Tensor<Scalar>& dout,
                std::span<const Mat<Scalar>> p, const LayerCache<Scalar>&, std::span<Mat<Scalar>> dp,
                std::span<Tensor<Scalar>> din) const override {
    conv2d_backward(*in[0], p[0], this->spec_.kernel, this->spec_.stride, dout, dp[0], &dp[1], &din[0]);
  }
};

/// Nearest-neighbour resize by `factor` followed by a same-padded conv.
template <typename Scalar>
class UpsampleConvLayer final : public Layer<Scalar> {
 public:
  using Layer<Scalar>::Layer;
  std::vector<ParamDecl> param_decls() const override {
    const auto& s = this->spec_;
    return {detail::weight_decl("", s.out_channels, s.in_channels, s.kernel), detail::bias_decl("", s.out_channels)};
  }
  Index output_channels(std::span<const Index> in) const override {
    this->expect_channels(in[0], this->spec_.in_channels);
    return this->spec_.out_channels;
  }
  Tensor<Scalar> forward(InputSpan<Scalar> in, std::span<const Mat<Scalar>> p,
                         LayerCache<Scalar>& cache) const override {
    cache.saved.push_back(upsample_nearest(*in[0], this->spec_.factor));
    return conv2d(cache.saved[0], p[0], &p[1], this->spec_.kernel);
  }
  void backward(InputSpan<Scalar>, const Tensor<Scalar>&, const Tensor<Scalar>& dout, std::span<const Mat<Scalar>> p,
                const LayerCache<Scalar>& cache, std::span<Mat<Scalar>> dp,
                std::span<Tensor<Scalar>> din) const override {
    const Tensor<Scalar>& up = cache.saved[0];
    Tensor<Scalar> dup(up.shape());
    conv2d_backward(up, p[0], this->spec_.kernel, 1, dout, dp[0], &dp[1], &dup);
    upsample_nearest_backward(dup, this->spec_.factor, din[0]);
  }
};

template <typename Scalar>
class ReluLayer final : public Layer<Scalar> {
 public:
  using Layer<Scalar>::Layer;
  Index output_channels(std::span<const Index> in) const override { return in[0]; }
  Tensor<Scalar> forward(InputSpan<Scalar> in, std::span<const Mat<Scalar>>,
                         LayerCache<Scalar>& cache) const override {
    Tensor<Scalar> y = *in[0];
    cache.pattern = sign_pattern(y.data);
    relu_inplace(y);
    return y;
  }
  void backward(InputSpan<Scalar>, const Tensor<Scalar>& out, const Tensor<Scalar>& dout, std::span<const Mat<Scalar>>,
                const LayerCache<Scalar>&, std::span<Mat<Scalar>>, std::span<Tensor<Scalar>> din) const override {
    relu_backward_add(out, dout, din[0]);
  }
};

template <typename Scalar>
class TanhLayer final : public Layer<Scalar> {
 public:
  using Layer<Scalar>::Layer;
  Index output_channels(std::span<const Index> in) const override { return in[0]; }
  Tensor<Scalar> forward(InputSpan<Scalar> in, std::span<const Mat<Scalar>>, LayerCache<Scalar>&) const override {
    Tensor<Scalar> y = *in[0];
    y.array() = y.array().tanh();
    return y;
  }
  void backward(InputSpan<Scalar>, const Tensor<Scalar>& out, const Tensor<Scalar>& dout, std::span<const Mat<Scalar>>,
                const LayerCache<Scalar>&, std::span<Mat<Scalar>>, std::span<Tensor<Scalar>> din) const override {
    din[0].array() += dout.array() * (Scalar(1) - out.array().square());
  }
};

/// Two-way softmax across channels at every pixel.
template <typename Scalar>
class Softmax2Layer final : public Layer<Scalar> {
 public:
  using Layer<Scalar>::Layer;
  Index output_channels(std::span<const Index> in) const override {
    this->expect_channels(in[0], 2);
    return 2;
  }
  Tensor<Scalar> forward(InputSpan<Scalar> in, std::span<const Mat<Scalar>>, LayerCache<Scalar>&) const override {
    const Tensor<Scalar>& x = *in[0];
    Tensor<Scalar> y(x.shape());
    const auto diff = (x.data.row(1) - x.data.row(0)).array();
    y.data.row(1) = (Scalar(1) / (Scalar(1) + (-diff).exp())).matrix();
    y.data.row(0) = (Scalar(1) - y.data.row(1).array()).matrix();
    return y;
  }
  void backward(InputSpan<Scalar>, const Tensor<Scalar>& out, const Tensor<Scalar>& dout, std::span<const Mat<Scalar>>,
                const LayerCache<Scalar>&, std::span<Mat<Scalar>>, std::span<Tensor<Scalar>> din) const override {
    const auto g = ((dout.data.row(1) - dout.data.row(0)).array() * out.data.row(0).array() *
                    out.data.row(1).array())
                       .eval();
    din[0].data.row(1).array() += g;
    din[0].data.row(0).array() -= g;
  }
};

/// `depth` conv+relu layers; layer j sees concat(input, o_0..o_{j-1}).
/// The block emits concat(o_0..o_{depth-1}), i.e. depth·growth channels.
template <typename Scalar>
class DenseBlockLayer final : public Layer<Scalar> {
 public:
  using Layer<Scalar>::Layer;
  std::vector<ParamDecl> param_decls() const override {
    const auto& s = this->spec_;
    std::vector<ParamDecl> decls;
    for (Index j = 0; j < s.depth; ++j) {
      const std::string prefix = "layer" + std::to_string(j) + "/";
      decls.push_back(detail::weight_decl(prefix, s.out_channels, s.in_channels + j * s.out_channels, s.kernel));
      decls.push_back(detail::bias_decl(prefix, s.out_channels));
    }
    return decls;
  }
  Index output_channels(std::span<const Index> in) const override {
    this->expect_channels(in[0], this->spec_.in_channels);
    return this->spec_.depth * this->spec_.out_channels;
  }
  Tensor<Scalar> forward(InputSpan<Scalar> in, std::span<const Mat<Scalar>> p,
                         LayerCache<Scalar>& cache) const override {
    const auto& s = this->spec_;
    const Tensor<Scalar>& x = *in[0];
    Tensor<Scalar> features(s.in_channels + s.depth * s.out_channels, x.height, x.width);
    features.data.topRows(s.in_channels) = x.data;
    std::uint64_t pattern = 0;
    for (Index j = 0; j < s.depth; ++j) {
      const Index width = s.in_channels + j * s.out_channels;
      Tensor<Scalar> o = conv2d(detail::rows_of(features, 0, width), p[2 * j], &p[2 * j + 1], s.kernel);
      pattern = hash_combine(pattern, sign_pattern(o.data));
      relu_inplace(o);
      features.data.middleRows(width, s.out_channels) = o.data;
    }
    cache.pattern = pattern;
    Tensor<Scalar> out = detail::rows_of(features, s.in_channels, s.depth * s.out_channels);
    cache.saved.push_back(std::move(features));
    return out;
  }
  void backward(InputSpan<Scalar>, const Tensor<Scalar>&, const Tensor<Scalar>& dout, std::span<const Mat<Scalar>> p,
                const LayerCache<Scalar>& cache, std::span<Mat<Scalar>> dp,
                std::span<Tensor<Scalar>> din) const override {
    const auto& s = this->spec_;
    const Tensor<Scalar>& features = cache.saved[0];
    // Gradient w.r.t. the running feature stack; rows past the input are the layer outputs.
    Tensor<Scalar> dfeatures(features.shape());
    dfeatures.data.bottomRows(s.depth * s.out_channels) = dout.data;
    for (Index j = s.depth - 1; j >= 0; --j) {
      const Index width = s.in_channels + j * s.out_channels;
      const Tensor<Scalar> o = detail::rows_of(features, width, s.out_channels);
      const Tensor<Scalar> d_o = detail::rows_of(dfeatures, width, s.out_channels);
      Tensor<Scalar> dpre(o.shape());
      relu_backward_add(o, d_o, dpre);
      Tensor<Scalar> dinput(width, features.height, features.width);
      conv2d_backward(detail::rows_of(features, 0, width), p[2 * j], s.kernel, 1, dpre, dp[2 * j], &dp[2 * j + 1],
                      &dinput);
      dfeatures.data.topRows(width) += dinput.data;
    }
    din[0].data += dfeatures.data.topRows(s.in_channels);
  }
};

/// x + conv(relu(conv(x))).
template <typename Scalar>
class ResBlockLayer final : public Layer<Scalar> {
 public:
  using Layer<Scalar>::Layer;
  std::vector<ParamDecl> param_decls() const override {
    const Index c = this->spec_.in_channels;
    const Index k = this->spec_.kernel;
    // The branch starts close to zero so a fresh stack is near the identity.
    ParamDecl residual_out = detail::weight_decl("conv2/", c, c, k);
    residual_out.init_gain = kResidualInitGain;
    return {detail::weight_decl("conv1/", c, c, k), detail::bias_decl("conv1/", c),
            residual_out, detail::bias_decl("conv2/", c)};
  }
  Index output_channels(std::span<const Index> in) const override {
    this->expect_channels(in[0], this->spec_.in_channels);
    return in[0];
  }
  Tensor<Scalar> forward(InputSpan<Scalar> in, std::span<const Mat<Scalar>> p,
                         LayerCache<Scalar>& cache) const override {
    const Index k = this->spec_.kernel;
    Tensor<Scalar> h = conv2d(*in[0], p[0], &p[1], k);
    cache.pattern = sign_pattern(h.data);
    relu_inplace(h);
    Tensor<Scalar> y = conv2d(h, p[2], &p[3], k);
    y.data += in[0]->data;
    cache.saved.push_back(std::move(h));
    return y;
  }
  void backward(InputSpan<Scalar> in, const Tensor<Scalar>&, const Tensor<Scalar>& dout,
                std::span<const Mat<Scalar>> p, const LayerCache<Scalar>& cache, std::span<Mat<Scalar>> dp,
                std::span<Tensor<Scalar>> din) const override {
    const Index k = this->spec_.kernel;
    const Tensor<Scalar>& h = cache.saved[0];
    din[0].data += dout.data;
    Tensor<Scalar> dh(h.shape());
    conv2d_backward(h, p[2], k, 1, dout, dp[2], &dp[3], &dh);
    Tensor<Scalar> dpre(h.shape());
    relu_backward_add(h, dh, dpre);
    conv2d_backward(*in[0], p[0], k, 1, dpre, dp[0], &dp[1], &din[0]);
  }
};

template <typename Scalar>
class DownsampleLayer final : public Layer<Scalar> {
 public:
  using Layer<Scalar>::Layer;
  Index output_channels(std::span<const Index> in) const override { return in[0]; }
  void check_input(std::span<const Shape> in) const override {
    require_divisible(in[0].height, in[0].width, this->spec_.factor, "downsample");
  }
  Tensor<Scalar> forward(InputSpan<Scalar> in, std::span<const Mat<Scalar>>, LayerCache<Scalar>&) const override {
    return avg_pool(*in[0], this->spec_.factor);
  }
  void backward(InputSpan<Scalar>, const Tensor<Scalar>&, const Tensor<Scalar>& dout, std::span<const Mat<Scalar>>,
                const LayerCache<Scalar>&, std::span<Mat<Scalar>>, std::span<Tensor<Scalar>> din) const override {
    avg_pool_backward(dout, this->spec_.factor, din[0]);
  }
};

/// Spatial pyramid pooling: for each factor, average-pool, reduce channels
/// with a pointwise conv, and nearest-upsample back. Output is
/// concat(input, scale_0, ..., scale_n).
template <typename Scalar>
class SppLayer final : public Layer<Scalar> {
 public:
  using Layer<Scalar>::Layer;
  std::vector<ParamDecl> param_decls() const override {
    const auto& s = this->spec_;
    std::vector<ParamDecl> decls;
    for (Index f : s.factors) {
      const std::string prefix = "scale" + std::to_string(f) + "/";
      decls.push_back(detail::weight_decl(prefix, s.out_channels, s.in_channels, 1));
      decls.push_back(detail::bias_decl(prefix, s.out_channels));
    }
    return decls;
  }
  Index output_channels(std::span<const Index> in) const override {
    this->expect_channels(in[0], this->spec_.in_channels);
    return in[0] + static_cast<Index>(this->spec_.factors.size()) * this->spec_.out_channels;
  }
  void check_input(std::span<const Shape> in) const override {
    require_divisible(in[0].height, in[0].width, this->spec_.factors.back(), "spp");
  }
  Tensor<Scalar> forward(InputSpan<Scalar> in, std::span<const Mat<Scalar>> p,
                         LayerCache<Scalar>& cache) const override {
    const auto& s = this->spec_;
    const Tensor<Scalar>& x = *in[0];
    const Index n = static_cast<Index>(s.factors.size());
    Tensor<Scalar> out(s.in_channels + n * s.out_channels, x.height, x.width);
    out.data.topRows(s.in_channels) = x.data;
    for (Index i = 0; i < n; ++i) {
      Tensor<Scalar> pooled = avg_pool(x, s.factors[i]);
      const Tensor<Scalar> reduced = conv2d(pooled, p[2 * i], &p[2 * i + 1], 1);
      out.data.middleRows(s.in_channels + i * s.out_channels, s.out_channels) =
          upsample_nearest(reduced, s.factors[i]).data;
      cache.saved.push_back(std::move(pooled));
    }
    return out;
  }
  void backward(InputSpan<Scalar>, const Tensor<Scalar>&, const Tensor<Scalar>& dout, std::span<const Mat<Scalar>> p,
                const LayerCache<Scalar>& cache, std::span<Mat<Scalar>> dp,
                std::span<Tensor<Scalar>> din) const override {
    const auto& s = this->spec_;
    din[0].data += dout.data.topRows(s.in_channels);
    for (std::size_t i = 0; i < s.factors.size(); ++i) {
      const Index f = s.factors[i];
      const Tensor<Scalar>& pooled = cache.saved[i];
      const Tensor<Scalar> dup =
          detail::rows_of(dout, s.in_channels + static_cast<Index>(i) * s.out_channels, s.out_channels);
      Tensor<Scalar> dreduced(s.out_channels, pooled.height, pooled.width);
      upsample_nearest_backward(dup, f, dreduced);
      Tensor<Scalar> dpooled(pooled.shape());
      conv2d_backward(pooled, p[2 * i], 1, 1, dreduced, dp[2 * i], &dp[2 * i + 1], &dpooled);
      if (f == 1) {
        din[0].data += dpooled.data;
      } else {
        avg_pool_backward(dpooled, f, din[0]);
      }
    }
  }
};

template <typename Scalar>
class ConcatLayer final : public Layer<Scalar> {
 public:
  using Layer<Scalar>::Layer;
  Index arity() const override { return -1; }
  Index output_channels(std::span<const Index> in) const override {
    Index total = 0;
    for (Index c : in) total += c;
    return total;
  }
  void check_input(std::span<const Shape> in) const override {
    for (const auto& s : in)
      if (!s.same_spatial(in[0])) throw ShapeError("concat: spatial mismatch " + to_string(s) + " vs " + to_string(in[0]));
  }
  Tensor<Scalar> forward(InputSpan<Scalar> in, std::span<const Mat<Scalar>>, LayerCache<Scalar>&) const override {
    Index channels = 0;
    for (const auto* t : in) channels += t->channels;
    Tensor<Scalar> out(channels, in[0]->height, in[0]->width);
    Index row = 0;
    for (const auto* t : in) {
      out.data.middleRows(row, t->channels) = t->data;
      row += t->channels;
    }
    return out;
  }
  void backward(InputSpan<Scalar> in, const Tensor<Scalar>&, const Tensor<Scalar>& dout, std::span<const Mat<Scalar>>,
                const LayerCache<Scalar>&, std::span<Mat<Scalar>>, std::span<Tensor<Scalar>> din) const override {
    Index row = 0;
    for (std::size_t i = 0; i < in.size(); ++i) {
      din[i].data += dout.data.middleRows(row, in[i]->channels);
      row += in[i]->channels;
    }
  }
};

template <typename Scalar>
class SliceLayer final : public Layer<Scalar> {
 public:
  using Layer<Scalar>::Layer;
  Index output_channels(std::span<const Index> in) const override {
    if (this->spec_.begin + this->spec_.count > in[0]) throw ConfigError("slice: channel range exceeds input");
    return this->spec_.count;
  }
  Tensor<Scalar> forward(InputSpan<Scalar> in, std::span<const Mat<Scalar>>, LayerCache<Scalar>&) const override {
    return detail::rows_of(*in[0], this->spec_.begin, this->spec_.count);
  }
  void backward(InputSpan<Scalar>, const Tensor<Scalar>&, const Tensor<Scalar>& dout, std::span<const Mat<Scalar>>,
                const LayerCache<Scalar>&, std::span<Mat<Scalar>>, std::span<Tensor<Scalar>> din) const override {
    din[0].data.middleRows(this->spec_.begin, this->spec_.count) += dout.data;
  }
};

template <typename Scalar>
class AffineLayer final : public Layer<Scalar> {
 public:
  using Layer<Scalar>::Layer;
  Index output_channels(std::span<const Index> in) const override { return in[0]; }
  Tensor<Scalar> forward(InputSpan<Scalar> in, std::span<const Mat<Scalar>>, LayerCache<Scalar>&) const override {
    Tensor<Scalar> y = *in[0];
    y.array() = y.array() * Scalar(this->spec_.scale) + Scalar(this->spec_.shift);
    return y;
  }
  void backward(InputSpan<Scalar>, const Tensor<Scalar>&, const Tensor<Scalar>& dout, std::span<const Mat<Scalar>>,
                const LayerCache<Scalar>&, std::span<Mat<Scalar>>, std::span<Tensor<Scalar>> din) const override {
    din[0].data += Scalar(this->spec_.scale) * dout.data;
  }
};

template <typename Scalar>
std::shared_ptr<const Layer<Scalar>> make_layer(const LayerSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::kConv:
    case LayerKind::kPointwiseConv:
      return std::make_shared<ConvLayer<Scalar>>(spec);
    case LayerKind::kUpsampleConv:
      return std::make_shared<UpsampleConvLayer<Scalar>>(spec);
    case LayerKind::kRelu:
      return std::make_shared<ReluLayer<Scalar>>(spec);
    case LayerKind::kTanh:
      return std::make_shared<TanhLayer<Scalar>>(spec);
    case LayerKind::kSoftmax2:
      return std::make_shared<Softmax2Layer<Scalar>>(spec);
    case LayerKind::kDenseBlock:
      return std::make_shared<DenseBlockLayer<Scalar>>(spec);
    case LayerKind::kResBlock:
      return std::make_shared<ResBlockLayer<Scalar>>(spec);
    case LayerKind::kDownsample:
      return std::make_shared<DownsampleLayer<Scalar>>(spec);
    case LayerKind::kSpp:
      return std::make_shared<SppLayer<Scalar>>(spec);
    case LayerKind::kConcat:
      return std::make_shared<ConcatLayer<Scalar>>(spec);
    case LayerKind::kSlice:
      return std::make_shared<SliceLayer<Scalar>>(spec);
    case LayerKind::kAffine:
      return std::make_shared<AffineLayer<Scalar>>(spec);
  }
  throw ConfigError("unhandled layer kind");
}

}  // namespace ampe::nn
