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
#include "ampe/nn/adam.hpp"
#include "ampe/nn/grad_check.hpp"
#include "ampe/nn/network.hpp"

#include <gtest/gtest.h>

#include <random>

namespace ampe::nn {
namespace {

using T = Tensor<double>;

T random_tensor(Index c, Index h, Index w, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  T t(c, h, w);
  for (Index i = 0; i < t.size(); ++i) t.data.data()[i] = u(rng);
  return t;
}

/// Random small biases so ReLU pre-activations sit away from exact zero.
void jitter_biases(Network<double>& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (std::size_t i = 0; i < net.parameters().size(); ++i)
    if (net.parameters()[i].is_bias)
      for (Index k = 0; k < net.value(i).size(); ++k) net.mutable_value(i).data()[k] = u(rng);
}

TEST(Forward, IdentityCenterKernelIsIdentity) {
  Network<double> net;
  const auto in = net.add_input("x", 3);
  net.set_outputs({net.add("conv", LayerSpec::conv(3, 3, 3), {in})});
  Mat<double>& w = net.mutable_value(0);
  w.setZero();
  for (Index c = 0; c < 3; ++c) w(c, c * 9 + 4) = 1.0;
  const T x = random_tensor(3, 8, 8, 1);
  EXPECT_EQ(net.forward(x).outputs[0].data, x.data);
}

TEST(Forward, ZeroParametersGiveZeroReluOutput) {
  Network<double> net;
  const auto in = net.add_input("x", 3);
  auto h = net.add("conv1", LayerSpec::conv(3, 4, 3), {in});
  h = net.add("res", LayerSpec::res_block(4), {h});
  h = net.add("relu", LayerSpec::relu(), {h});
  net.set_outputs({h});
  const T y = net.forward(random_tensor(3, 8, 8, 2)).outputs[0];
  EXPECT_EQ(y.data.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Forward, ShapeErrorNamesLayer) {
  Network<double> net;
  const auto in = net.add_input("x", 3);
  net.set_outputs({net.add("pool4", LayerSpec::downsample(4), {in})});
  try {
    net.forward(random_tensor(3, 6, 8, 3));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("pool4"), std::string::npos);
  }
  EXPECT_THROW(net.forward(random_tensor(2, 8, 8, 3)), ShapeError);
}

TEST(Build, RejectsBadSpecs) {
  Network<double> net;
  const auto in = net.add_input("x", 3);
  EXPECT_THROW(net.add("even", LayerSpec::conv(3, 4, 4), {in}), ConfigError);
  EXPECT_THROW(net.add("stride0", LayerSpec::conv(3, 4, 3, 0), {in}), ConfigError);
  EXPECT_THROW(net.add("pool3", LayerSpec::downsample(3), {in}), ConfigError);
  EXPECT_THROW(net.add("dense0", LayerSpec::dense_block(3, 3, 4, 0), {in}), ConfigError);
  EXPECT_THROW(net.add("wrong_in", LayerSpec::conv(5, 4, 3), {in}), ConfigError);
  EXPECT_THROW(net.add("bad_input", LayerSpec::relu(), {7}), ConfigError);
}

TEST(Build, ZeroFanInRejected) {
  Network<double> net;
  const auto in = net.add_input("x", 0);
  EXPECT_THROW(net.add("conv", LayerSpec::conv(0, 4, 3), {in}), ConfigError);
}

TEST(InitParams, DeterministicPerSeed) {
  auto build = [](std::uint64_t seed) {
    Network<double> net;
    const auto in = net.add_input("x", 3);
    net.set_outputs({net.add("dense", LayerSpec::dense_block(3, 3, 4, 2), {in})});
    net.init_params(seed);
    return net;
  };
  const auto a = build(5), b = build(5), c = build(6);
  for (std::size_t i = 0; i < a.values().size(); ++i) EXPECT_EQ(a.value(i), b.value(i));
  EXPECT_NE(a.value(0), c.value(0));
  EXPECT_EQ(a.value(1).cwiseAbs().maxCoeff(), 0.0) << "biases start at zero";
}

TEST(InitParams, FanInScaledVariance) {
  Network<double> net;
  const auto in = net.add_input("x", 16);
  net.set_outputs({net.add("conv", LayerSpec::conv(16, 64, 3), {in})});
  net.init_params(9);
  const auto& w = net.value(0);
  const double var = w.array().square().mean();
  EXPECT_NEAR(var, 2.0 / (16 * 9), 0.1 * 2.0 / (16 * 9));
}

TEST(InitParams, ResidualBranchStartsSmall) {
  Network<double> net;
  const auto in = net.add_input("x", 16);
  net.set_outputs({net.add("res", LayerSpec::res_block(16), {in})});
  net.init_params(3);
  const auto first = net.find_parameter("res/conv1/weight"), second = net.find_parameter("res/conv2/weight");
  ASSERT_TRUE(first && second);
  const double v1 = net.value(*first).array().square().mean(), v2 = net.value(*second).array().square().mean();
  EXPECT_NEAR(v2 / v1, kResidualInitGain * kResidualInitGain, 0.2 * kResidualInitGain * kResidualInitGain);
}

TEST(InitHead, ScalesWeightsAndSetsBias) {
  Network<double> net;
  const auto in = net.add_input("x", 3);
  net.set_outputs({net.add("head", LayerSpec::conv(3, 2, 3), {in})});
  net.init_params(4);
  const Mat<double> before = net.value(0);
  net.init_head("head", 0.5, {1.0, -2.0});
  EXPECT_TRUE(net.value(0).isApprox(before * 0.5));
  EXPECT_EQ(net.value(1).data()[0], 1.0);
  EXPECT_EQ(net.value(1).data()[1], -2.0);
  EXPECT_THROW(net.init_head("head", 1.0, {0.0}), ShapeError);
  EXPECT_THROW(net.init_head("missing", 1.0, {0.0, 0.0}), ConfigError);
}

TEST(Backward, IdentityNetworkPassesGradient) {
  Network<double> net;
  const auto in = net.add_input("x", 3);
  net.set_outputs({net.add("id", LayerSpec::affine(1.0, 0.0), {in})});
  const T x = random_tensor(3, 4, 4, 4);
  const T g = random_tensor(3, 4, 4, 5);
  auto fwd = net.forward(x);
  EXPECT_EQ(net.backward(fwd.cache, g).inputs[0].data, g.data);
}

TEST(Backward, LinearInOutputGradient) {
  Network<double> net;
  const auto in = net.add_input("x", 3);
  auto h = net.add("conv", LayerSpec::conv(3, 4, 3), {in});
  h = net.add("relu", LayerSpec::relu(), {h});
  h = net.add("res", LayerSpec::res_block(4), {h});
  net.set_outputs({h});
  net.init_params(3);
  auto fwd = net.forward(random_tensor(3, 8, 8, 6));
  const T g = random_tensor(4, 8, 8, 7);
  T g2 = g;
  g2.data *= 2.0;
  const auto r1 = net.backward(fwd.cache, g);
  const auto r2 = net.backward(fwd.cache, g2);
  for (std::size_t i = 0; i < r1.params.size(); ++i) {
    EXPECT_LT((r2.params[i] - 2.0 * r1.params[i]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Backward, StaleCacheRejected) {
  Network<double> net;
  const auto in = net.add_input("x", 3);
  net.set_outputs({net.add("conv", LayerSpec::conv(3, 2, 3), {in})});
  net.init_params(1);
  auto fwd = net.forward(random_tensor(3, 4, 4, 1));
  net.mutable_value(0)(0, 0) += 1.0;
  EXPECT_THROW(net.backward(fwd.cache, random_tensor(2, 4, 4, 2)), std::logic_error);

  Network<double> other = net;
  auto fwd2 = net.forward(random_tensor(3, 4, 4, 1));
  EXPECT_THROW(other.backward(fwd2.cache, random_tensor(2, 4, 4, 2)), std::logic_error);
}

TEST(Im2Col, AdjointOfCol2Im) {
  for (Index stride : {1, 2}) {
    const T x = random_tensor(2, 8, 8, 10);
    const Mat<double> cols = im2col(x, 5, stride);
    Mat<double> y = random_tensor(1, 1, cols.size(), 11).data;
    y.resize(cols.rows(), cols.cols());
    T back(x.shape());
    col2im_add(y, 5, stride, back);
    EXPECT_NEAR((cols.array() * y.array()).sum(), (x.array() * back.array()).sum(), 1e-10);
  }
}

TEST(GradCheck, QuadraticOneParameterExact) {
  Network<double> net;
  const auto in = net.add_input("x", 1);
  net.set_outputs({net.add("pw", LayerSpec::pointwise_conv(1, 1), {in})});
  net.mutable_value(0)(0, 0) = 0.7;
  net.mutable_value(1)(0, 0) = -0.2;
  const T x = T::constant(1, 1, 1, 1.3);
  OutputLoss quadratic = [](const std::vector<T>& ys) {
    LossAndGrad r;
    const double y = ys[0].data(0, 0) - 2.0;
    r.loss = y * y;
    T g(ys[0].shape());
    g.data(0, 0) = 2.0 * y;
    r.output_grads.push_back(g);
    return r;
  };
  const auto report = grad_check(net, {x}, quadratic, {});
  EXPECT_LT(report.max_relative_error, 1e-8) << report.worst;
}

TEST(GradCheck, ConvReluTwoLayer) {
  Network<double> net;
  const auto in = net.add_input("x", 3);
  auto h = net.add("conv1", LayerSpec::conv(3, 4, 3), {in});
  h = net.add("relu", LayerSpec::relu(), {h});
  h = net.add("conv2", LayerSpec::conv(4, 2, 3), {h});
  net.set_outputs({h});
  net.init_params(1);
  jitter_biases(net, 2);
  const std::vector<T> x{random_tensor(3, 8, 8, 3)};
  GradCheckOptions opt;
  opt.delta = 1e-5;
  const auto report = grad_check(net, x, random_projection_loss(net, x), opt);
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst;
  EXPECT_GT(report.checked, 200u);
}

TEST(GradCheck, TanhOutput) {
  Network<double> net;
  const auto in = net.add_input("x", 3);
  auto h = net.add("conv", LayerSpec::conv(3, 3, 3), {in});
  h = net.add("tanh", LayerSpec::tanh(), {h});
  net.set_outputs({h});
  net.init_params(4);
  const std::vector<T> x{random_tensor(3, 8, 8, 5)};
  const auto report = grad_check(net, x, random_projection_loss(net, x));
  EXPECT_LT(report.max_relative_error, 1e-6) << report.worst;
}

struct KindCase {
  std::string name;
  std::function<void(Network<double>&, NodeId)> build;
  Index in_channels = 3;
};

class PerKindGradCheck : public ::testing::TestWithParam<KindCase> {};

TEST_P(PerKindGradCheck, BelowTolerance) {
  const KindCase& kc = GetParam();
  Network<double> net;
  const auto in = net.add_input("x", kc.in_channels);
  kc.build(net, in);
  net.init_params(21);
  jitter_biases(net, 22);
  const std::vector<T> x{random_tensor(kc.in_channels, 8, 8, 23)};
  const auto report = grad_check(net, x, random_projection_loss(net, x));
  EXPECT_LT(report.max_relative_error, 1e-4) << kc.name << ": " << report.worst;
  EXPECT_GT(report.checked, 50u);
}

INSTANTIATE_TEST_SUITE_P(
    Catalog, PerKindGradCheck,
    ::testing::Values(
        KindCase{"conv", [](auto& n, NodeId in) { n.set_outputs({n.add("l", LayerSpec::conv(3, 4, 5), {in})}); }},
        KindCase{"conv_stride2",
                 [](auto& n, NodeId in) { n.set_outputs({n.add("l", LayerSpec::conv(3, 4, 3, 2), {in})}); }},
        KindCase{"relu", [](auto& n, NodeId in) { n.set_outputs({n.add("l", LayerSpec::relu(), {in})}); }},
        KindCase{"tanh", [](auto& n, NodeId in) { n.set_outputs({n.add("l", LayerSpec::tanh(), {in})}); }},
        KindCase{"softmax2", [](auto& n, NodeId in) { n.set_outputs({n.add("l", LayerSpec::softmax2(), {in})}); }, 2},
        KindCase{"dense_block",
                 [](auto& n, NodeId in) { n.set_outputs({n.add("l", LayerSpec::dense_block(3, 3, 4, 3), {in})}); }},
        KindCase{"res_block", [](auto& n, NodeId in) { n.set_outputs({n.add("l", LayerSpec::res_block(3), {in})}); }},
        KindCase{"downsample", [](auto& n, NodeId in) { n.set_outputs({n.add("l", LayerSpec::downsample(2), {in})}); }},
        KindCase{"upsample_conv",
                 [](auto& n, NodeId in) { n.set_outputs({n.add("l", LayerSpec::upsample_conv(2, 3, 2), {in})}); }},
        KindCase{"pointwise_conv",
                 [](auto& n, NodeId in) { n.set_outputs({n.add("l", LayerSpec::pointwise_conv(3, 5), {in})}); }},
        KindCase{"spp",
                 [](auto& n, NodeId in) { n.set_outputs({n.add("l", LayerSpec::spp(3, 2, {1, 2, 4, 8}), {in})}); }},
        KindCase{"concat",
                 [](auto& n, NodeId in) {
                   const auto a = n.add("a", LayerSpec::conv(3, 2, 3), {in});
                   n.set_outputs({n.add("l", LayerSpec::concat(), {in, a, in})});
                 }},
        KindCase{"slice", [](auto& n, NodeId in) { n.set_outputs({n.add("l", LayerSpec::slice(1, 2), {in})}); }},
        KindCase{"affine",
                 [](auto& n, NodeId in) { n.set_outputs({n.add("l", LayerSpec::affine(0.5, 0.5), {in})}); }}),
    [](const auto& info) { return info.param.name; });

TEST(Blocks, ResBlockMatchesHandComposition) {
  Network<double> net;
  const auto in = net.add_input("x", 4);
  net.set_outputs({net.add("res", LayerSpec::res_block(4), {in})});
  net.init_params(31);
  jitter_biases(net, 32);
  const T x = random_tensor(4, 8, 8, 33);
  T h = conv2d(x, net.value(0), &net.value(1), 3);
  relu_inplace(h);
  T expect = conv2d(h, net.value(2), &net.value(3), 3);
  expect.data += x.data;
  EXPECT_LT((net.forward(x).outputs[0].data - expect.data).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Blocks, DenseBlockLayersSeeConcatOfPrevious) {
  Network<double> net;
  const auto in = net.add_input("x", 3);
  net.set_outputs({net.add("dense", LayerSpec::dense_block(3, 3, 2, 3), {in})});
  net.init_params(41);
  jitter_biases(net, 42);
  const T x = random_tensor(3, 8, 8, 43);
  T stack = x;
  std::vector<const T*> outs;
  std::vector<T> layer_outputs;
  for (Index j = 0; j < 3; ++j) {
    T o = conv2d(stack, net.value(2 * j), &net.value(2 * j + 1), 3);
    relu_inplace(o);
    layer_outputs.push_back(o);
    stack = concat_channels({&stack, &o});
  }
  const T expect = concat_channels({&layer_outputs[0], &layer_outputs[1], &layer_outputs[2]});
  const T got = net.forward(x).outputs[0];
  EXPECT_EQ(got.channels, 6);
  EXPECT_LT((got.data - expect.data).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Blocks, Softmax2IsDistribution) {
  Network<double> net;
  const auto in = net.add_input("x", 2);
  net.set_outputs({net.add("sm", LayerSpec::softmax2(), {in})});
  T x = random_tensor(2, 8, 8, 51, -30.0, 30.0);
  const T y = net.forward(x).outputs[0];
  EXPECT_GE(y.data.minCoeff(), 0.0);
  EXPECT_LE(y.data.maxCoeff(), 1.0);
  EXPECT_LT(((y.data.row(0) + y.data.row(1)).array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(Blocks, DownsampleThenUpsampleRestoresDims) {
  for (Index s : {2, 4, 8, 16, 32}) {
    Network<double> net;
    const auto in = net.add_input("x", 3);
    auto h = net.add("down", LayerSpec::downsample(s), {in});
    net.set_outputs({net.add("up", LayerSpec::upsample_conv(s, 3, 3), {h})});
    net.init_params(1);
    const T y = net.forward(random_tensor(3, 64, 32, 2)).outputs[0];
    EXPECT_EQ(y.shape(), (Shape{3, 64, 32}));
  }
}

TEST(Blocks, SppKeepsDimsAndDeclaredChannels) {
  Network<double> net;
  const auto in = net.add_input("x", 16);
  net.set_outputs({net.add("spp", LayerSpec::spp(16, 4, {4, 8, 16, 32}), {in})});
  net.init_params(1);
  EXPECT_EQ(net.output_channels(0), 32);
  const T y = net.forward(random_tensor(16, 64, 64, 3)).outputs[0];
  EXPECT_EQ(y.shape(), (Shape{32, 64, 64}));
  EXPECT_EQ(net.required_divisor(), 32);
}

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  Network<double> net;
  const auto in = net.add_input("x", 3);
  net.set_outputs({net.add("conv", LayerSpec::conv(3, 2, 3), {in})});
  net.init_params(3);
  const auto before = net.values();
  auto state = TrainState<double>::for_network(net, 1e-3);
  adam_step(net, state, net.zero_gradients());
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(net.value(i), before[i]);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // With m̂ = g and v̂ = g² after one step, the update is lr·g/(|g|+ε) ≈ lr·sign(g).
  Network<double> net;
  const auto in = net.add_input("x", 1);
  net.set_outputs({net.add("pw", LayerSpec::pointwise_conv(1, 1), {in})});
  auto state = TrainState<double>::for_network(net, 1e-3);
  auto grads = net.zero_gradients();
  grads[0](0, 0) = 0.37;
  grads[1](0, 0) = -2.5;
  adam_step(net, state, grads);
  EXPECT_NEAR(net.value(0)(0, 0), -1e-3 * 0.37 / (0.37 + 1e-8), 1e-15);
  EXPECT_NEAR(net.value(1)(0, 0), 1e-3 * 2.5 / (2.5 + 1e-8), 1e-15);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  Network<double> net;
  const auto in = net.add_input("x", 1);
  net.set_outputs({net.add("pw", LayerSpec::pointwise_conv(1, 1), {in})});
  auto state = TrainState<double>::for_network(net, 1e-3);
  auto grads = net.zero_gradients();
  grads[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(net, state, grads);
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("pw/bias"), std::string::npos);
  }
}

TEST(Adam, LearningRateSchedule) {
  EXPECT_DOUBLE_EQ(scheduled_lr(1e-3, 0.1, 0), 1e-3);
  EXPECT_NEAR(scheduled_lr(1e-3, 0.1, 1), 1e-4, 1e-18);
  EXPECT_NEAR(scheduled_lr(1e-3, 0.1, 3), 1e-6, 1e-20);
}

}  // namespace
}  // namespace ampe::nn
