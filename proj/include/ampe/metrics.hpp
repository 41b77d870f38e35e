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

#include "ampe/tensor.hpp"
#include "json.hpp"

#include <string>
#include <vector>

namespace ampe::metrics {

/// Reported for identical images instead of +inf.
inline constexpr double kPsnrCap = 100.0;

/// 10·log10(1/MSE) over all pixels and channels, capped at kPsnrCap.
double psnr(const Tensor<double>& x, const Tensor<double>& y);

inline constexpr Index kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Single-scale SSIM on the channel-mean grayscale image with an 11×11
/// Gaussian window (σ = 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1,
/// averaged over all fully-inside window positions.
double ssim(const Tensor<double>& x, const Tensor<double>& y);

/// Normalized 11×11 weights, row-major.
std::vector<double> ssim_window();

struct ImageScore {
  std::string id;
  double alpha = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct AlphaSummary {
  double alpha = 0.0;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::size_t count = 0;
};

struct MetricReport {
  std::vector<ImageScore> rows;

  /// One entry per distinct α, in first-seen order.
  std::vector<AlphaSummary> summaries() const;
  nlohmann::json to_json() const;
  /// Header "id,psnr,ssim,alpha", one line per row.
  std::string to_csv() const;
};

}  // namespace ampe::metrics
