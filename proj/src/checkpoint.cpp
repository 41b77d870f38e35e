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
#include "ampe/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace ampe {
namespace fs = std::filesystem;

namespace {

static_assert(sizeof(float) == 4);

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

std::string file_for(const std::string& path) {
  std::string f = path;
  std::replace(f.begin(), f.end(), '/', '.');
  return f + ".bin";
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

nlohmann::json arch_json(const char* net, const nlohmann::json& config) { return {{"net", net}, {"config", config}}; }

struct Subnet {
  const char* name;
  std::optional<nn::Network<float>> Model<float>::*member;
  nlohmann::json architecture;
};

std::vector<Subnet> subnets(const Architecture& a) {
  return {{"locnet", &Model<float>::locnet, arch_json("locnet", a.locnet)},
          {"estnet_t", &Model<float>::est_t, arch_json("estnet", a.estnet(nets::EstKind::kTransmission))},
          {"estnet_r", &Model<float>::est_r, arch_json("estnet", a.estnet(nets::EstKind::kRain))},
          {"refnet", &Model<float>::refnet, arch_json("refnet", a.refnet)}};
}

}  // namespace

void save_network(const nn::Network<float>& net, const nlohmann::json& architecture, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t i = 0; i < net.parameters().size(); ++i) {
    const auto& info = net.parameters()[i];
    const Mat<float>& v = net.value(i);
    const std::string file = file_for(info.path);
    params.push_back({{"path", info.path},
                      {"shape", {v.rows(), v.cols()}},
                      {"dims", info.dims},
                      {"dtype", "float32"},
                      {"file", file}});
    std::vector<std::uint32_t> words(static_cast<std::size_t>(v.size()));
    for (Index k = 0; k < v.size(); ++k) {
      std::uint32_t w;
      std::memcpy(&w, v.data() + k, 4);
      words[static_cast<std::size_t>(k)] = to_little(w);
    }
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / file).string());
    out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
    if (!out) throw IoError("write failed for " + (dir / file).string());
  }
  write_json(dir / "manifest.json",
             {{"architecture", architecture}, {"byte_order", "little"}, {"parameters", params}});
}

void load_network(nn::Network<float>& net, const nlohmann::json& architecture, const fs::path& dir) {
  const nlohmann::json manifest = read_json(dir / "manifest.json");
  if (!manifest.contains("architecture") || manifest["architecture"] != architecture) {
    throw ConfigError("checkpoint " + dir.string() + ": architecture mismatch (stored " +
                      manifest.value("architecture", nlohmann::json()).dump() + ", expected " + architecture.dump() +
                      ")");
  }
  const auto& params = manifest.at("parameters");
  if (params.size() != net.parameters().size()) {
    throw ConfigError("checkpoint " + dir.string() + ": parameter count " + std::to_string(params.size()) +
                      " does not match the architecture (" + std::to_string(net.parameters().size()) + ")");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const auto& info = net.parameters()[i];
    Mat<float>& v = net.mutable_value(i);
    if (p.at("path").get<std::string>() != info.path ||
        p.at("shape") != nlohmann::json{v.rows(), v.cols()} || p.at("dtype") != "float32") {
      throw ConfigError("checkpoint " + dir.string() + ": parameter entry " + p.dump() + " does not match " +
                        info.path);
    }
    const fs::path file = dir / p.at("file").get<std::string>();
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + file.string());
    std::vector<std::uint32_t> words(static_cast<std::size_t>(v.size()));
    in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
    if (in.gcount() != static_cast<std::streamsize>(words.size() * 4) || in.peek() != std::char_traits<char>::eof())
      throw IoError("checkpoint: " + file.string() + " has the wrong size for " + info.path);
    for (Index k = 0; k < v.size(); ++k) {
      const std::uint32_t w = to_little(words[static_cast<std::size_t>(k)]);
      std::memcpy(v.data() + k, &w, 4);
    }
    if (!v.allFinite()) throw IoError("checkpoint: non-finite values in " + file.string());
  }
}

void save_checkpoint(const Model<float>& model, const CheckpointMeta& meta, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json present = nlohmann::json::array();
  for (const auto& s : subnets(model.arch)) {
    const auto& net = model.*(s.member);
    if (!net) continue;
    save_network(*net, s.architecture, dir / s.name);
    present.push_back(s.name);
  }
  write_json(dir / "manifest.json", {{"format", "ampe-checkpoint"},
                                     {"version", kCheckpointVersion},
                                     {"architecture", model.arch},
                                     {"flags", model.flags},
                                     {"alpha_train", meta.alpha_train},
                                     {"reduction", loss::name(meta.reduction)},
                                     {"dtype", "float32"},
                                     {"training", meta.training},
                                     {"subnets", present}});
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("checkpoint directory " + dir.string() + " does not exist");
  LoadedCheckpoint out;
  out.manifest = read_json(dir / "manifest.json");
  std::vector<std::string> present;
  try {
    if (out.manifest.at("format") != "ampe-checkpoint" || out.manifest.at("version") != kCheckpointVersion)
      throw ConfigError("checkpoint " + dir.string() + ": unsupported format or version");
    out.model.arch = out.manifest.at("architecture").get<Architecture>();
    out.model.flags = out.manifest.at("flags").get<ModelFlags>();
    out.meta.alpha_train = out.manifest.at("alpha_train").get<double>();
    out.meta.reduction =
        out.manifest.at("reduction") == "sum" ? loss::Reduction::kSum : loss::Reduction::kMean;
    out.meta.training = out.manifest.value("training", nlohmann::json::object());
    present = out.manifest.at("subnets").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint " + dir.string() + ": malformed manifest: " + e.what());
  }
  // Build every listed subnet from the stored architecture, then fill it.
  Model<float> fresh = build_model(out.model.arch, ModelFlags{}, 0);
  for (const auto& s : subnets(out.model.arch)) {
    if (std::find(present.begin(), present.end(), s.name) == present.end()) continue;
    auto net = *(fresh.*(s.member));
    load_network(net, s.architecture, dir / s.name);
    out.model.*(s.member) = std::move(net);
  }
  return out;
}

}  // namespace ampe
