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
#include "ampe/util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace ampe::synth {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void fail(const char* field, const std::string& why) {
  throw ConfigError(std::string("synth params: ") + field + " " + why);
}

std::vector<double> gaussian_taps(double sigma) {
  const Index radius = std::max<Index>(1, static_cast<Index>(std::ceil(3.0 * sigma)));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (Index d = -radius; d <= radius; ++d) {
    const double w = std::exp(-0.5 * double(d * d) / (sigma * sigma));
    taps[static_cast<std::size_t>(d + radius)] = w;
    sum += w;
  }
  for (double& w : taps) w /= sum;
  return taps;
}

// Gaussian wrapped onto a circle of n samples. Once sigma is a couple of
// periods wide the wrapped kernel is flat to double precision.
std::vector<double> periodic_taps(double sigma, Index n) {
  std::vector<double> taps(static_cast<std::size_t>(n), 1.0 / double(n));
  if (sigma >= 2.0 * double(n)) return taps;
  const Index wraps = static_cast<Index>(std::ceil(6.0 * sigma / double(n))) + 1;
  double sum = 0.0;
  for (Index d = 0; d < n; ++d) {
    double w = 0.0;
    for (Index m = -wraps; m <= wraps; ++m) {
      const double t = double(d + m * n);
      w += std::exp(-0.5 * t * t / (sigma * sigma));
    }
    taps[static_cast<std::size_t>(d)] = w;
    sum += w;
  }
  for (double& w : taps) w /= sum;
  return taps;
}

// Circular separable smoothing of a single-channel field.
Mat<double> periodic_smooth(const Mat<double>& f, double sigma) {
  const Index h = f.rows(), w = f.cols();
  const auto ty = periodic_taps(sigma, h), tx = periodic_taps(sigma, w);
  Mat<double> rows = Mat<double>::Zero(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (Index d = 0; d < w; ++d) acc += tx[static_cast<std::size_t>(d)] * f(y, (x + d) % w);
      rows(y, x) = acc;
    }
  Mat<double> out = Mat<double>::Zero(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (Index d = 0; d < h; ++d) acc += ty[static_cast<std::size_t>(d)] * rows((y + d) % h, x);
      out(y, x) = acc;
    }
  return out;
}

double squared_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

Mat<double> white_noise(Index h, Index w, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat<double> m(h, w);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

void SynthParams::validate() const {
  if (streak_count < 0) fail("streak_count", "must be >= 0");
  if (streak_length < 1) fail("streak_length", "must be >= 1");
  if (!(streak_angle >= 0.0 && streak_angle < 90.0)) fail("streak_angle", "must lie in [0, 90)");
  if (streak_width < 1) fail("streak_width", "must be >= 1");
  if (!(streak_intensity > 0.0 && streak_intensity <= 1.0)) fail("streak_intensity", "must lie in (0, 1]");
  if (!(blur_sigma >= 0.0) || !std::isfinite(blur_sigma)) fail("blur_sigma", "must be >= 0");
  if (!(haze_strength >= 0.0 && haze_strength < 1.0)) fail("haze_strength", "must lie in [0, 1)");
  if (!(haze_smoothness > 0.0) || !std::isfinite(haze_smoothness)) fail("haze_smoothness", "must be > 0");
  if (!(location_threshold > 0.0 && location_threshold < 1.0)) fail("location_threshold", "must lie in (0, 1)");
}

void to_json(nlohmann::json& j, const SynthParams& p) {
  j = {{"streak_count", p.streak_count},
       {"streak_length", p.streak_length},
       {"streak_angle", p.streak_angle},
       {"streak_width", p.streak_width},
       {"streak_intensity", p.streak_intensity},
       {"blur_sigma", p.blur_sigma},
       {"haze_strength", p.haze_strength},
       {"haze_smoothness", p.haze_smoothness},
       {"location_threshold", p.location_threshold},
       {"seed", p.seed}};
}

void from_json(const nlohmann::json& j, SynthParams& p) {
  using namespace json_util;
  constexpr std::string_view what = "synth params";
  reject_unknown(j,
                 {"streak_count", "streak_length", "streak_angle", "streak_width", "streak_intensity", "blur_sigma",
                  "haze_strength", "haze_smoothness", "location_threshold", "seed"},
                 what);
  p = SynthParams{};
  optional_field(j, "streak_count", p.streak_count, what);
  optional_field(j, "streak_length", p.streak_length, what);
  optional_field(j, "streak_angle", p.streak_angle, what);
  optional_field(j, "streak_width", p.streak_width, what);
  optional_field(j, "streak_intensity", p.streak_intensity, what);
  optional_field(j, "blur_sigma", p.blur_sigma, what);
  optional_field(j, "haze_strength", p.haze_strength, what);
  optional_field(j, "haze_smoothness", p.haze_smoothness, what);
  optional_field(j, "location_threshold", p.location_threshold, what);
  optional_field(j, "seed", p.seed, what);
  p.validate();
}

std::vector<Streak> sample_streaks(const SynthParams& params, Index height, Index width) {
  params.validate();
  std::mt19937_64 rng(derive_seed(params.seed, "streaks"));
  std::uniform_real_distribution<double> angle(-params.streak_angle, params.streak_angle);
  const double theta = params.streak_angle > 0.0 ? angle(rng) : 0.0;
  // Top ends are placed so an untilted streak fits; tilted ones may leave the frame and get clipped.
  std::uniform_int_distribution<Index> ys(0, std::max<Index>(0, height - params.streak_length));
  std::uniform_int_distribution<Index> xs(0, std::max<Index>(0, width - params.streak_width));
  std::vector<Streak> out;
  out.reserve(static_cast<std::size_t>(params.streak_count));
  for (int i = 0; i < params.streak_count; ++i) {
    Streak s;
    s.y = ys(rng);
    s.x = xs(rng);
    s.angle_deg = theta;
    out.push_back(s);
  }
  return out;
}

Tensor<double> rasterize_streaks(std::span<const Streak> streaks, const SynthParams& params, Index height,
                                 Index width) {
  Tensor<double> out(1, height, width);
  for (const Streak& s : streaks) {
    const double slope = std::tan(s.angle_deg * kDegToRad);
    for (Index t = 0; t < params.streak_length; ++t) {
      const Index y = s.y + t;
      if (y < 0 || y >= height) continue;
      const Index x0 = s.x + static_cast<Index>(std::lround(double(t) * slope));
      for (Index k = 0; k < params.streak_width; ++k) {
        const Index x = x0 + k;
        if (x >= 0 && x < width) out(0, y, x) = params.streak_intensity;
      }
    }
  }
  return out;
}

Tensor<double> gaussian_blur(const Tensor<double>& t, double sigma) {
  if (!(sigma > 0.0)) return t;
  const auto taps = gaussian_taps(sigma);
  const Index radius = static_cast<Index>(taps.size() / 2);
  Tensor<double> tmp(t.shape()), out(t.shape());
  for (Index c = 0; c < t.channels; ++c) {
    for (Index y = 0; y < t.height; ++y)
      for (Index x = 0; x < t.width; ++x) {
        double acc = 0.0;
        for (Index d = -radius; d <= radius; ++d)
          acc += taps[static_cast<std::size_t>(d + radius)] * t(c, y, reflect_index(x + d, t.width));
        tmp(c, y, x) = acc;
      }
    for (Index y = 0; y < t.height; ++y)
      for (Index x = 0; x < t.width; ++x) {
        double acc = 0.0;
        for (Index d = -radius; d <= radius; ++d)
          acc += taps[static_cast<std::size_t>(d + radius)] * tmp(c, reflect_index(y + d, t.height), x);
        out(c, y, x) = acc;
      }
  }
  return out;
}

Tensor<double> synth_streak_layer(const SynthParams& params, Index height, Index width) {
  const auto streaks = sample_streaks(params, height, width);
  const Tensor<double> raster = gaussian_blur(rasterize_streaks(streaks, params, height, width), params.blur_sigma);
  Tensor<double> out(3, height, width);
  for (Index c = 0; c < 3; ++c) out.data.row(c) = raster.data.row(0);
  return out;
}

Tensor<double> synth_transmission(const SynthParams& params, Index height, Index width) {
  params.validate();
  Tensor<double> out = Tensor<double>::constant(3, height, width, 1.0);
  if (params.haze_strength == 0.0) return out;
  std::mt19937_64 rng(derive_seed(params.seed, "haze"));
  // Smoothed white noise divided by its exact standard deviation is N(0,1)
  // at every pixel whatever the smoothness, so the affine map below needs no
  // data-dependent min/max and a very wide kernel gives a flat field.
  const double sd = std::sqrt(squared_norm(periodic_taps(params.haze_smoothness, height)) *
                              squared_norm(periodic_taps(params.haze_smoothness, width)));
  const Mat<double> shared = periodic_smooth(white_noise(height, width, rng), params.haze_smoothness) / sd;
  for (Index c = 0; c < 3; ++c) {
    const Mat<double> own = periodic_smooth(white_noise(height, width, rng), params.haze_smoothness) / sd;
    for (Index y = 0; y < height; ++y)
      for (Index x = 0; x < width; ++x) {
        const double z = 0.8 * shared(y, x) + 0.6 * own(y, x);
        const double u = std::clamp(0.5 + z / 6.0, 0.0, 1.0);
        out(c, y, x) = 1.0 - params.haze_strength * u;
      }
  }
  return out;
}

Tensor<double> synth_background(Index height, Index width, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, "background"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<double> b(3, height, width);
  // Smooth colour gradients plus a few hard-edged discs for texture.
  double base[3], gx[3], gy[3], amp[3], fx[3], fy[3], ph[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 0.25 + 0.4 * u(rng);
    gx[c] = 0.3 * (u(rng) - 0.5);
    gy[c] = 0.3 * (u(rng) - 0.5);
    amp[c] = 0.1 * u(rng);
    fx[c] = 1.0 + 3.0 * u(rng);
    fy[c] = 1.0 + 3.0 * u(rng);
    ph[c] = 2.0 * std::numbers::pi * u(rng);
  }
  for (int c = 0; c < 3; ++c)
    for (Index y = 0; y < height; ++y)
      for (Index x = 0; x < width; ++x) {
        const double sx = double(x) / double(width), sy = double(y) / double(height);
        b(c, y, x) = base[c] + gx[c] * (sx - 0.5) + gy[c] * (sy - 0.5) +
                     amp[c] * std::sin(2.0 * std::numbers::pi * (fx[c] * sx + fy[c] * sy) + ph[c]);
      }
  const int discs = 3 + static_cast<int>(u(rng) * 4.0);
  for (int k = 0; k < discs; ++k) {
    const double cx = u(rng) * double(width), cy = u(rng) * double(height);
    const double r = (0.08 + 0.2 * u(rng)) * double(std::min(height, width));
    double col[3];
    for (double& v : col) v = 0.1 + 0.8 * u(rng);
    for (Index y = 0; y < height; ++y)
      for (Index x = 0; x < width; ++x) {
        const double dx = double(x) + 0.5 - cx, dy = double(y) + 0.5 - cy;
        if (dx * dx + dy * dy <= r * r)
          for (int c = 0; c < 3; ++c) b(c, y, x) = col[c];
      }
  }
  return quantize_8bit(clamp_unit(b));
}

SynthSample make_pair(const Tensor<double>& background, const SynthParams& params) {
  params.validate();
  if (background.channels != 3) throw ShapeError("make_pair: background must have 3 channels");
  const Index h = background.height, w = background.width;
  const auto streaks = sample_streaks(params, h, w);
  SynthSample s;
  s.streaks = rasterize_streaks(streaks, params, h, w);
  const Tensor<double> blurred = gaussian_blur(s.streaks, params.blur_sigma);
  s.rain = Tensor<double>(3, h, w);
  for (Index c = 0; c < 3; ++c) s.rain.data.row(c) = blurred.data.row(0);
  s.transmission = synth_transmission(params, h, w);
  s.rainy = compose(background, s.transmission, s.rain);
  s.location = Tensor<double>(1, h, w);
  for (Index p = 0; p < h * w; ++p)
    s.location.data(0, p) = s.streaks.data(0, p) > params.location_threshold ? 1.0 : 0.0;
  return s;
}

}  // namespace ampe::synth
