#include <gtest/gtest.h>

#include "gradient_suite.hpp"

namespace ampe::testing_support {
namespace {

class SubnetGradient : public ::testing::TestWithParam<GradCase> {};

TEST_P(SubnetGradient, MatchesFiniteDifferences) {
  const auto report = run_case(GetParam());
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst;
  EXPECT_GT(report.checked, 50u);
}

INSTANTIATE_TEST_SUITE_P(Tiny, SubnetGradient, ::testing::ValuesIn(subnet_cases()),
                         [](const auto& info) { return info.param.name; });

TEST(LocNetInit, StartsNearRainPrior) {
  const auto net = nets::build_locnet<float>(Architecture{}.locnet, 5);
  const Tensor<double> x = random_tensor(3, 32, 32, 6, 0.0, 1.0);
  const Tensor<float> l = nets::locnet_forward(net, x.cast<float>());
  EXPECT_NEAR(l.data.mean(), nets::kRainPrior, 0.05);
}

TEST(EstNetInit, TransmissionStartsNearInitialValue) {
  const Architecture a;
  const auto net = nets::build_estnet<float>(a.estnet(nets::EstKind::kTransmission), 7);
  const Tensor<float> x = random_tensor(nets::kGuidedChannels, 32, 32, 8, 0.0, 1.0).cast<float>();
  const auto out = net.forward(x);
  EXPECT_NEAR(out.outputs[0].data.mean(), nets::kInitialTransmission, 0.1);
}

}  // namespace
}  // namespace ampe::testing_support
