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
#include "ampe/dataset.hpp"

#include "ampe/image_io.hpp"
#include "ampe/util.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace ampe {
namespace fs = std::filesystem;

namespace {

std::string sample_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", i);
  return buf;
}

Tensor<double> load(const fs::path& path, int channels, const std::string& id) {
  if (!fs::exists(path)) throw IoError("sample '" + id + "': missing " + path.string());
  try {
    return read_png(path, channels);
  } catch (const IoError& e) {
    throw IoError("sample '" + id + "': " + e.what());
  }
}

}  // namespace

Dataset generate_dataset(int count, Index height, Index width, const synth::SynthParams& params) {
  params.validate();
  if (count < 0) throw ConfigError("sample count must be >= 0");
  Dataset out;
  out.params = params;
  for (int i = 0; i < count; ++i) {
    synth::SynthParams p = params;
    p.seed = derive_seed(params.seed, "sample", static_cast<std::uint64_t>(i));
    Sample s;
    s.id = sample_id(i);
    s.clean = synth::synth_background(height, width, derive_seed(params.seed, "background", i));
    auto pair = synth::make_pair(s.clean, p);
    // What goes to disk is 8-bit; keep the in-memory copy identical.
    s.rainy = quantize_8bit(pair.rainy);
    s.location = std::move(pair.location);
    out.samples.push_back(std::move(s));
  }
  return out;
}

void write_dataset(const Dataset& data, const fs::path& root) {
  for (const char* sub : {"gt", "rain", "loc"}) fs::create_directories(root / sub);
  nlohmann::json ids = nlohmann::json::array();
  for (const Sample& s : data.samples) {
    if (s.id.empty() || s.id.find_first_of("/\\") != std::string::npos || s.id.front() == '.')
      throw IoError("invalid sample id '" + s.id + "'");
    write_png(root / "gt" / (s.id + ".png"), s.clean);
    write_png(root / "rain" / (s.id + ".png"), s.rainy);
    write_png(root / "loc" / (s.id + ".png"), s.location);
    ids.push_back(s.id);
  }
  nlohmann::json manifest = {{"ids", ids}};
  manifest["params"] = data.params ? nlohmann::json(*data.params) : nlohmann::json(nullptr);
  std::ofstream out(root / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (root / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Dataset read_dataset(const fs::path& root) {
  Dataset data;
  if (!fs::is_directory(root)) throw IoError("dataset directory " + root.string() + " does not exist");
  std::vector<std::string> ids;
  const fs::path manifest_path = root / "manifest.json";
  if (fs::exists(manifest_path)) {
    nlohmann::json manifest;
    try {
      std::ifstream in(manifest_path);
      manifest = nlohmann::json::parse(in);
      ids = manifest.at("ids").get<std::vector<std::string>>();
      if (manifest.contains("params") && !manifest["params"].is_null())
        data.params = manifest["params"].get<synth::SynthParams>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError(manifest_path.string() + ": " + e.what());
    }
  } else if (fs::is_directory(root / "gt")) {
    for (const auto& entry : fs::directory_iterator(root / "gt"))
      if (entry.path().extension() == ".png") ids.push_back(entry.path().stem().string());
    std::sort(ids.begin(), ids.end());
  }
  for (const auto& id : ids) {
    Sample s;
    s.id = id;
    s.clean = load(root / "gt" / (id + ".png"), 3, id);
    s.rainy = load(root / "rain" / (id + ".png"), 3, id);
    s.location = load(root / "loc" / (id + ".png"), 1, id);
    if (!s.clean.shape().same_spatial(s.rainy.shape()) || !s.clean.shape().same_spatial(s.location.shape()))
      throw IoError("sample '" + id + "': gt, rain and loc sizes differ");
    data.samples.push_back(std::move(s));
  }
  return data;
}

}  // namespace ampe
