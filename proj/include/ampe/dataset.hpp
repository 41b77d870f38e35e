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

// On-disk triples (B, I, L):
//   <root>/gt/<id>.png    clean background B
//   <root>/rain/<id>.png  rainy image I
//   <root>/loc/<id>.png   location map L, 8-bit gray 0/255
//   <root>/manifest.json  {"ids": [...], "params": SynthParams}

#include "ampe/synth.hpp"
#include "ampe/tensor.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ampe {

struct Sample {
  std::string id;
  Tensor<double> clean;     // B
  Tensor<double> rainy;     // I
  Tensor<double> location;  // L, 1 channel
};

struct Dataset {
  std::vector<Sample> samples;
  std::optional<synth::SynthParams> params;
};

/// Sample i gets its own seeds derived from params.seed, so any subset can
/// be regenerated independently.
Dataset generate_dataset(int count, Index height, Index width, const synth::SynthParams& params);

void write_dataset(const Dataset& data, const std::filesystem::path& root);

/// An empty or missing-manifest directory with no gt/ entries yields no
/// samples. Missing or undecodable files raise IoError naming the id.
Dataset read_dataset(const std::filesystem::path& root);

}  // namespace ampe
