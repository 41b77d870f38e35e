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

// Synthetic rainy-image generator: streak rain layer R, smooth haze
// transmission T, and the binary streak location map L, composed with a
// clean background B as I = clamp(T∘B + R).

#include "ampe/tensor.hpp"
#include "json.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ampe::synth {

struct SynthParams {
  int streak_count = 30;
  int streak_length = 12;
  /// Streak direction is drawn once per image from U(−angle, angle) degrees from vertical.
  double streak_angle = 20.0;
  int streak_width = 1;
  double streak_intensity = 0.6;
  double blur_sigma = 0.5;
  double haze_strength = 0.5;
  double haze_smoothness = 8.0;
  double location_threshold = 0.1;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first out-of-range field.
  void validate() const;
  friend bool operator==(const SynthParams&, const SynthParams&) = default;
};

void to_json(nlohmann::json& j, const SynthParams& p);
/// Strict: unknown fields and wrong types raise ConfigError naming the field.
void from_json(const nlohmann::json& j, SynthParams& p);

/// One rasterized streak: top pixel (x, y) and direction from vertical.
struct Streak {
  Index x = 0;
  Index y = 0;
  double angle_deg = 0.0;
};

std::vector<Streak> sample_streaks(const SynthParams& params, Index height, Index width);

/// Integer line drawing without anti-aliasing: `length` rows starting at y,
/// column offset round(t·tan θ), `width` pixels wide, value = intensity.
/// Pixels outside the image are dropped. Single channel.
Tensor<double> rasterize_streaks(std::span<const Streak> streaks, const SynthParams& params, Index height,
                                 Index width);

/// Separable normalized Gaussian blur with reflect borders; sigma <= 0 is
/// the identity.
Tensor<double> gaussian_blur(const Tensor<double>& t, double sigma);

/// Nonnegative 3-channel rain layer: blurred streak raster.
Tensor<double> synth_streak_layer(const SynthParams& params, Index height, Index width);

/// Smooth 3-channel transmission field with values in [1 − haze_strength, 1].
Tensor<double> synth_transmission(const SynthParams& params, Index height, Index width);

/// Procedural clean background on the 8-bit grid.
Tensor<double> synth_background(Index height, Index width, std::uint64_t seed);

struct SynthSample {
  Tensor<double> rainy;         // I
  Tensor<double> location;      // L, {0,1}
  Tensor<double> transmission;  // T
  Tensor<double> rain;          // R (blurred)
  Tensor<double> streaks;       // unblurred raster, 1 channel
};

/// I = clamp(T∘B + R); L(p) = 1 iff the unblurred raster exceeds τ at p.
SynthSample make_pair(const Tensor<double>& background, const SynthParams& params);

}  // namespace ampe::synth
