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
#include "ampe/commands.hpp"

#include "ampe/image_io.hpp"
#include "ampe/util.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using nlohmann::json;

namespace ampe {

void to_json(json& j, const SynthJob& job) {
  j = job.params;
  j["count"] = job.count;
  j["height"] = job.height;
  j["width"] = job.width;
}

void from_json(const json& j, SynthJob& job) {
  if (!j.is_object()) throw ConfigError("synth config: expected a JSON object");
  json params = j;
  json_util::optional_field(j, "count", job.count, "synth config");
  json_util::optional_field(j, "height", job.height, "synth config");
  json_util::optional_field(j, "width", job.width, "synth config");
  for (const char* k : {"count", "height", "width"}) params.erase(k);
  job.params = params.get<synth::SynthParams>();
  if (job.count < 1) throw ConfigError("synth config: field 'count' must be >= 1");
  if (job.height < 1 || job.width < 1) throw ConfigError("synth config: fields 'height' and 'width' must be >= 1");
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

std::string utc_time(const char* fmt) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  return std::string(buf, std::strftime(buf, sizeof buf, fmt, &tm));
}

Tensor<double> to_double(const Tensor<float>& t) { return t.cast<double>(); }

}  // namespace

Dataset cmd_synth(const SynthJob& job, const fs::path& out_dir) {
  job.params.validate();
  Dataset data = generate_dataset(job.count, job.height, job.width, job.params);
  write_dataset(data, out_dir);
  return data;
}

void cmd_train(const TrainConfig& cfg, const fs::path& dataset_dir, const fs::path& ckpt_dir) {
  cfg.validate();
  const Dataset data = read_dataset(dataset_dir);
  if (data.samples.empty()) throw IoError("dataset " + dataset_dir.string() + " has no samples");

  json training = json::object();
  if (fs::exists(ckpt_dir / "manifest.json")) training = read_json_file(ckpt_dir / "manifest.json").value("training", json::object());
  training[std::string(phase_name(cfg.phase))] = cfg;

  fs::create_directories(ckpt_dir);
  std::ofstream log(ckpt_dir / ("train_" + std::string(phase_name(cfg.phase)) + ".jsonl"), std::ios::binary);
  if (!log) throw IoError("cannot write training log in " + ckpt_dir.string());
  const auto on_step = [&](const StepLog& s) { log << s.to_json(cfg.phase).dump() << '\n'; };

  CheckpointMeta meta;
  meta.training = training;
  meta.alpha_train = cfg.alpha_train;
  meta.reduction = loss::Reduction::kMean;

  if (cfg.phase == Phase::kLocNet) {
    LocNetRun run = train_locnet(data.samples, cfg, on_step);
    Model<float> m;
    m.arch = cfg.arch;
    m.flags = cfg.flags();
    m.locnet = std::move(run.net);
    save_checkpoint(m, meta, ckpt_dir);
    return;
  }

  std::optional<nn::Network<float>> locnet;
  if (cfg.use_locnet) {
    const std::string hint = "run phase 'locnet' into " + ckpt_dir.string() + " first";
    if (!fs::exists(ckpt_dir / "manifest.json")) throw ConfigError("no LocNet checkpoint in " + ckpt_dir.string() + "; " + hint);
    LoadedCheckpoint prev = load_checkpoint(ckpt_dir);
    if (!prev.model.locnet) throw ConfigError("checkpoint " + ckpt_dir.string() + " has no LocNet; " + hint);
    if (!(prev.model.arch.locnet == cfg.arch.locnet))
      throw ConfigError("LocNet architecture in " + ckpt_dir.string() + " differs from the training config");
    locnet = std::move(prev.model.locnet);
  }
  MainRun run = train_main(data.samples, locnet ? &*locnet : nullptr, cfg, on_step);
  save_checkpoint(run.model, meta, ckpt_dir);
}

std::string format_alpha(double alpha) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, alpha);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

json RunManifest::to_json() const {
  json outs = json::object();
  for (const auto& [k, v] : outputs) outs[k] = v;
  return {{"run_id", run_id},       {"input", input},   {"checkpoint", checkpoint},
          {"alphas", alphas},       {"outputs", outs},  {"created", created}};
}

namespace {

void check_alphas(const std::vector<double>& alphas) {
  for (double a : alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha " + std::to_string(a) + " is outside [0,1]");
}

Index model_divisor(const Model<float>& m) {
  Index divisor = std::max(m.est_r->required_divisor(), m.refnet->required_divisor());
  if (m.locnet) divisor = std::max(divisor, m.locnet->required_divisor());
  return divisor;
}

}  // namespace

RunManifest derain_to_dir(const Model<float>& model, const Tensor<double>& image, const std::vector<double>& alphas,
                          const fs::path& out_dir, const std::string& input_name, const std::string& checkpoint_name) {
  check_alphas(alphas);
  const Inference<float> inf = infer(model, image.cast<float>());
  RunManifest rm;
  rm.run_id = out_dir.filename().string();
  rm.input = input_name;
  rm.checkpoint = checkpoint_name;
  rm.alphas = alphas;

  const auto emit = [&](const std::string& name, const Tensor<double>& t) {
    const std::string file = name + ".png";
    write_png(out_dir / file, t);
    rm.outputs.emplace_back(name, file);
  };
  emit("input", image);
  emit("bm", to_double(clamp_unit(inf.model_estimate)));
  emit("refined", to_double(inf.refined));
  for (double a : alphas) emit("blend_" + format_alpha(a), to_double(inf.blend(a)));

  rm.created = utc_time("%Y-%m-%dT%H:%M:%SZ");
  write_text(out_dir / "manifest.json", rm.to_json().dump(2) + "\n");
  return rm;
}

RunManifest cmd_derain(const fs::path& input_png, const fs::path& ckpt_dir, const std::vector<double>& alphas,
                       const fs::path& out_dir, bool* padded) {
  check_alphas(alphas);
  const Tensor<double> image = read_png(input_png);
  LoadedCheckpoint ck = load_checkpoint(ckpt_dir);
  if (!ck.model.complete()) throw ConfigError("checkpoint " + ckpt_dir.string() + " is incomplete; run phase 'main' first");

  const Index divisor = model_divisor(ck.model);
  const bool pad = image.height % divisor != 0 || image.width % divisor != 0;
  if (padded) *padded = pad;
  if (pad) {
    std::cerr << "warning: " << input_png.string() << " is " << image.width << "x" << image.height
              << ", not a multiple of " << divisor << "; processing reflect-padded and cropping back\n";
  }
  fs::create_directories(out_dir);
  return derain_to_dir(ck.model, image, alphas, out_dir, input_png.string(), ckpt_dir.string());
}

metrics::MetricReport evaluate_model(const Model<float>& model, const std::vector<Sample>& samples,
                                     const std::vector<double>& alphas) {
  metrics::MetricReport report;
  for (const Sample& s : samples) {
    const Inference<float> inf = infer(model, s.rainy.cast<float>());
    for (double a : alphas) {
      // Scored as written to disk: 8-bit.
      const Tensor<double> out = quantize_8bit(to_double(inf.blend(a)));
      report.rows.push_back({s.id, a, metrics::psnr(out, s.clean), metrics::ssim(out, s.clean)});
    }
  }
  return report;
}

metrics::MetricReport cmd_eval(const fs::path& dataset_dir, const std::optional<fs::path>& ckpt_dir,
                               const std::vector<double>& alphas, EvalSource source,
                               const std::optional<fs::path>& out_dir) {
  const Dataset data = read_dataset(dataset_dir);
  if (data.samples.empty()) throw IoError("dataset " + dataset_dir.string() + " has no ground truth images");

  metrics::MetricReport report;
  if (source == EvalSource::kModel) {
    if (!ckpt_dir) throw ConfigError("eval: a checkpoint is required to score the model");
    if (alphas.empty()) throw ConfigError("eval: no alpha values given");
    check_alphas(alphas);
    LoadedCheckpoint ck = load_checkpoint(*ckpt_dir);
    report = evaluate_model(ck.model, data.samples, alphas);
  } else {
    for (const Sample& s : data.samples) {
      const Tensor<double>& x = source == EvalSource::kInput ? s.rainy : s.clean;
      report.rows.push_back({s.id, 1.0, metrics::psnr(x, s.clean), metrics::ssim(x, s.clean)});
    }
  }
  if (out_dir) {
    fs::create_directories(*out_dir);
    write_text(*out_dir / "report.json", report.to_json().dump(2) + "\n");
    write_text(*out_dir / "report.csv", report.to_csv());
  }
  return report;
}

fs::path artifact_root() {
  const char* env = std::getenv("AMPE_HOME");
  return env && *env ? fs::path(env) : fs::path("ampe-home");
}

std::string create_run_dir(const fs::path& parent) {
  fs::create_directories(parent);
  static thread_local std::mt19937_64 rng(std::random_device{}());
  const std::string stamp = utc_time("%Y%m%dT%H%M%S");
  for (int attempt = 0; attempt < 100; ++attempt) {
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "-%08x", static_cast<unsigned>(rng() & 0xffffffffu));
    const std::string id = stamp + suffix;
    // create_directory is atomic: false means another caller holds the name.
    if (fs::create_directory(parent / id)) return id;
  }
  throw IoError("could not allocate a run directory under " + parent.string());
}

}  // namespace ampe
