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

// 8-bit PNG <-> real-valued tensors. Loading divides by 255; saving rounds
// half-up and clamps to [0,255].

#include "ampe/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ampe {

inline std::uint8_t quantize_u8(double v) {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  const double scaled = std::floor(v * 255.0 + 0.5);
  return scaled >= 255.0 ? 255 : static_cast<std::uint8_t>(scaled);
}

/// Rounds every value onto the 8-bit grid k/255 (what a PNG round trip does).
template <typename Scalar>
Tensor<Scalar> quantize_8bit(Tensor<Scalar> t) {
  t.data = t.data.unaryExpr([](Scalar v) { return Scalar(quantize_u8(double(v)) / 255.0); });
  return t;
}

bool looks_like_png(std::span<const std::uint8_t> bytes);

/// `channels` is 3 (RGB) or 1 (grayscale); libpng converts other layouts.
Tensor<double> decode_png(std::span<const std::uint8_t> bytes, int channels = 3);
Tensor<double> read_png(const std::filesystem::path& path, int channels = 3);

std::vector<std::uint8_t> encode_png(const Tensor<double>& image);
void write_png(const std::filesystem::path& path, const Tensor<double>& image);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace ampe
