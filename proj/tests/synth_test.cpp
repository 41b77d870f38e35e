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
#include "ampe/synth.hpp"

#include "ampe/image_io.hpp"
#include "ampe/rain_model.hpp"

#include <gtest/gtest.h>

namespace ampe::synth {
namespace {

Index count_equal(const Tensor<double>& t, double v) { return (t.array() == v).count(); }

TEST(StreakLayer, NoStreaksIsZero) {
  SynthParams p;
  p.streak_count = 0;
  EXPECT_EQ(synth_streak_layer(p, 64, 64).array().abs().maxCoeff(), 0.0);
}

TEST(StreakLayer, VerticalStreakPixelCount) {
  SynthParams p;
  p.streak_count = 1;
  p.streak_angle = 0.0;
  p.blur_sigma = 0.0;
  p.streak_width = 2;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    p.seed = seed;
    const Tensor<double> r = synth_streak_layer(p, 64, 64);
    for (Index c = 0; c < 3; ++c) {
      EXPECT_EQ((r.data.row(c).array() == p.streak_intensity).count(), p.streak_length * p.streak_width);
      EXPECT_EQ((r.data.row(c).array() == 0.0).count(), 64 * 64 - p.streak_length * p.streak_width);
    }
  }
}

TEST(StreakLayer, RasterOracleForHandPlacedStreak) {
  SynthParams p;
  p.streak_length = 5;
  p.streak_width = 1;
  const Streak s{10, 3, 45.0};
  const Tensor<double> r = rasterize_streaks(std::span(&s, 1), p, 32, 32);
  for (Index t = 0; t < 5; ++t) EXPECT_EQ(r(0, 3 + t, 10 + t), p.streak_intensity);
  EXPECT_EQ(count_equal(r, p.streak_intensity), 5);
}

TEST(StreakLayer, GeometryOutsideFrameIsClipped) {
  SynthParams p;
  p.streak_length = 20;
  p.streak_width = 3;
  const Streak s{30, 25, 30.0};
  const Tensor<double> r = rasterize_streaks(std::span(&s, 1), p, 32, 32);
  EXPECT_GT(count_equal(r, p.streak_intensity), 0);
  EXPECT_LT(count_equal(r, p.streak_intensity), 60);
}

TEST(StreakLayer, Deterministic) {
  SynthParams p;
  p.seed = 42;
  EXPECT_EQ(synth_streak_layer(p, 64, 64).data, synth_streak_layer(p, 64, 64).data);
  SynthParams q = p;
  q.seed = 43;
  EXPECT_NE(synth_streak_layer(p, 64, 64).data, synth_streak_layer(q, 64, 64).data);
}

TEST(StreakLayer, NonnegativeAndBoundedByIntensity) {
  SynthParams p;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    p.seed = seed;
    const Tensor<double> r = synth_streak_layer(p, 64, 64);
    EXPECT_GE(r.array().minCoeff(), 0.0);
    EXPECT_LE(r.array().maxCoeff(), p.streak_intensity + 1e-12);
    EXPECT_GT(r.array().maxCoeff(), 0.0);
  }
}

TEST(GaussianBlur, PreservesConstantsAndMass) {
  const Tensor<double> c = Tensor<double>::constant(1, 16, 16, 0.3);
  EXPECT_LT((gaussian_blur(c, 1.3).array() - 0.3).abs().maxCoeff(), 1e-14);
  Tensor<double> impulse(1, 32, 32);
  impulse(0, 16, 16) = 1.0;
  EXPECT_NEAR(gaussian_blur(impulse, 1.0).array().sum(), 1.0, 1e-12);
}

TEST(Transmission, NoHazeIsOne) {
  SynthParams p;
  p.haze_strength = 0.0;
  EXPECT_EQ(synth_transmission(p, 64, 64).array().minCoeff(), 1.0);
  EXPECT_EQ(synth_transmission(p, 64, 64).array().maxCoeff(), 1.0);
}

TEST(Transmission, RangeForRandomSeeds) {
  SynthParams p;
  for (double h : {0.2, 0.5, 0.9}) {
    p.haze_strength = h;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      p.seed = seed;
      const Tensor<double> t = synth_transmission(p, 64, 64);
      EXPECT_GE(t.array().minCoeff(), 1.0 - h);
      EXPECT_LE(t.array().maxCoeff(), 1.0);
      EXPECT_GT(t.array().maxCoeff() - t.array().minCoeff(), 0.05 * h);
    }
  }
}

TEST(Transmission, HugeSmoothnessIsNearConstant) {
  SynthParams p;
  p.haze_smoothness = 1e6;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    p.seed = seed;
    const Tensor<double> t = synth_transmission(p, 64, 64);
    for (Index c = 0; c < 3; ++c) EXPECT_LT(t.data.row(c).maxCoeff() - t.data.row(c).minCoeff(), 0.01);
  }
}

TEST(Transmission, HighStrengthRejected) {
  SynthParams p;
  p.haze_strength = 1.0;
  EXPECT_THROW(synth_transmission(p, 8, 8), ConfigError);
}

TEST(MakePair, CleanPassthrough) {
  SynthParams p;
  p.streak_count = 0;
  p.haze_strength = 0.0;
  const Tensor<double> b = synth_background(64, 64, 1);
  const SynthSample s = make_pair(b, p);
  EXPECT_EQ(s.rainy.data, b.data);
  EXPECT_EQ(s.location.array().maxCoeff(), 0.0);
}

TEST(MakePair, ThresholdAboveIntensityGivesEmptyMask) {
  SynthParams p;
  p.streak_intensity = 0.4;
  p.location_threshold = 0.5;
  const SynthSample s = make_pair(synth_background(64, 64, 2), p);
  EXPECT_GT(s.rain.array().maxCoeff(), 0.0);
  EXPECT_EQ(s.location.array().maxCoeff(), 0.0);
}

TEST(MakePair, MaskIsExactRasterWithoutBlur) {
  SynthParams p;
  p.streak_count = 1;
  p.blur_sigma = 0.0;
  p.location_threshold = 0.5 * p.streak_intensity;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    p.seed = seed;
    const SynthSample s = make_pair(synth_background(64, 64, seed), p);
    const auto streaks = sample_streaks(p, 64, 64);
    const Tensor<double> raster = rasterize_streaks(streaks, p, 64, 64);
    for (Index i = 0; i < 64 * 64; ++i)
      EXPECT_EQ(s.location.data(0, i), raster.data(0, i) == p.streak_intensity ? 1.0 : 0.0);
  }
}

TEST(MakePair, CompositionMatchesWithinQuantization) {
  SynthParams p;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    p.seed = seed;
    const Tensor<double> b = synth_background(64, 64, seed + 100);
    const SynthSample s = make_pair(b, p);
    const Tensor<double> stored = quantize_8bit(s.rainy);
    const Tensor<double> recomposed = compose(b, s.transmission, s.rain);
    EXPECT_LE((stored.array() - recomposed.array()).abs().maxCoeff(), 1.0 / 255.0);
  }
}

TEST(MakePair, MaskImpliesRasterAboveThreshold) {
  SynthParams p;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    p.seed = seed;
    const SynthSample s = make_pair(synth_background(64, 64, seed), p);
    EXPECT_GT(s.location.array().sum(), 0.0);
    for (Index i = 0; i < 64 * 64; ++i) {
      const double l = s.location.data(0, i);
      EXPECT_TRUE(l == 0.0 || l == 1.0);
      if (l == 1.0) EXPECT_GT(s.streaks.data(0, i), p.location_threshold);
    }
  }
}

TEST(MakePair, PureFunctionOfInputs) {
  SynthParams p;
  p.seed = 9;
  const Tensor<double> b = synth_background(64, 64, 9);
  const SynthSample a = make_pair(b, p), c = make_pair(b, p);
  EXPECT_EQ(a.rainy.data, c.rainy.data);
  EXPECT_EQ(a.location.data, c.location.data);
}

TEST(Background, OnEightBitGrid) {
  const Tensor<double> b = synth_background(32, 32, 5);
  EXPECT_EQ(quantize_8bit(b).data, b.data);
  EXPECT_GE(b.array().minCoeff(), 0.0);
  EXPECT_LE(b.array().maxCoeff(), 1.0);
}

TEST(Params, JsonRoundTripAndStrictness) {
  SynthParams p;
  p.streak_count = 7;
  p.seed = 123;
  const nlohmann::json j = p;
  EXPECT_EQ(j.get<SynthParams>(), p);
  EXPECT_THROW((nlohmann::json{{"streak_cnt", 3}}.get<SynthParams>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"streak_count", "many"}}.get<SynthParams>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"location_threshold", 1.5}}.get<SynthParams>()), ConfigError);
  EXPECT_EQ(nlohmann::json::object().get<SynthParams>(), SynthParams{});
}

}  // namespace
}  // namespace ampe::synth
