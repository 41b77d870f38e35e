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
#include "ampe/image_io.hpp"

#include <gtest/gtest.h>

#include <random>

namespace ampe {
namespace {

TEST(Quantize, RoundsHalfUpAndClamps) {
  EXPECT_EQ(quantize_u8(0.0), 0);
  EXPECT_EQ(quantize_u8(1.0), 255);
  EXPECT_EQ(quantize_u8(-0.3), 0);
  EXPECT_EQ(quantize_u8(1.7), 255);
  EXPECT_EQ(quantize_u8(0.5 / 255.0), 1);
  EXPECT_EQ(quantize_u8(0.49 / 255.0), 0);
  EXPECT_EQ(quantize_u8(std::nan("")), 0);
}

TEST(Png, RoundTripIsExactOnTheEightBitGrid) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> u(0, 255);
  Tensor<double> img(3, 5, 7);
  for (Index i = 0; i < img.size(); ++i) img.data.data()[i] = u(rng) / 255.0;
  const Tensor<double> back = decode_png(encode_png(img));
  ASSERT_EQ(back.shape(), img.shape());
  EXPECT_EQ(back.data, img.data);
}

TEST(Png, GrayRoundTrip) {
  Tensor<double> img(1, 4, 4);
  img(0, 1, 2) = 1.0;
  const Tensor<double> back = decode_png(encode_png(img), 1);
  EXPECT_EQ(back.data, img.data);
}

TEST(Png, QuantizationErrorIsAtMostHalfStep) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<double> img(3, 6, 6);
  for (Index i = 0; i < img.size(); ++i) img.data.data()[i] = u(rng);
  const Tensor<double> back = decode_png(encode_png(img));
  EXPECT_LE((back.array() - img.array()).abs().maxCoeff(), 0.5 / 255.0 + 1e-12);
}

TEST(Png, CorruptInputRaisesIoError) {
  std::vector<std::uint8_t> junk = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_THROW(decode_png(junk), IoError);
  auto good = encode_png(Tensor<double>::constant(3, 4, 4, 0.5));
  good.resize(good.size() / 2);
  EXPECT_THROW(decode_png(good), IoError);
}

TEST(Png, MissingFileRaisesIoError) { EXPECT_THROW(read_png("/nonexistent/dir/x.png"), IoError); }

}  // namespace
}  // namespace ampe
