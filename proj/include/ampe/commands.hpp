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

// The operations behind the command-line tool, callable from tests.

#include "ampe/checkpoint.hpp"
#include "ampe/dataset.hpp"
#include "ampe/metrics.hpp"
#include "ampe/training.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ampe {

/// Synth config file: SynthParams fields plus "count", "height", "width".
struct SynthJob {
  int count = 4;
  Index height = 64;
  Index width = 64;
  synth::SynthParams params;
};

void to_json(nlohmann::json& j, const SynthJob& job);
void from_json(const nlohmann::json& j, SynthJob& job);

/// Reads a JSON file; parse errors become ConfigError naming the file.
nlohmann::json read_json_file(const std::filesystem::path& path);

Dataset cmd_synth(const SynthJob& job, const std::filesystem::path& out_dir);

/// Phase "locnet" writes <ckpt>/locnet and the top-level manifest. Phase
/// "main" reads <ckpt>/locnet (unless use_locnet is off), trains the rest
/// and rewrites the checkpoint with every subnet. The step log goes to
/// <ckpt>/train_<phase>.jsonl.
void cmd_train(const TrainConfig& cfg, const std::filesystem::path& dataset_dir, const std::filesystem::path& ckpt_dir);

/// "1.0", "0.6", "0.25": shortest round-trip form, always with a decimal point.
std::string format_alpha(double alpha);

struct RunManifest {
  std::string run_id;
  std::string input;
  std::string checkpoint;
  std::vector<double> alphas;
  /// Output name (input, bm, refined, blend_<α>) -> file name in the run directory.
  std::vector<std::pair<std::string, std::string>> outputs;
  std::string created;

  nlohmann::json to_json() const;
};

/// Runs a loaded (complete) model on `image` and writes input.png, bm.png,
/// refined.png, blend_<α>.png and manifest.json into `out_dir`, which must
/// exist. `input_name` and `checkpoint_name` are recorded as given.
RunManifest derain_to_dir(const Model<float>& model, const Tensor<double>& image, const std::vector<double>& alphas,
                          const std::filesystem::path& out_dir, const std::string& input_name,
                          const std::string& checkpoint_name);

/// Writes input.png, bm.png, refined.png, blend_<α>.png and manifest.json
/// into `out_dir`. Inputs whose sides are not multiples of the model's
/// divisor are processed padded and cropped back (`padded` reports it).
RunManifest cmd_derain(const std::filesystem::path& input_png, const std::filesystem::path& ckpt_dir,
                       const std::vector<double>& alphas, const std::filesystem::path& out_dir,
                       bool* padded = nullptr);

/// What is scored against the ground truth in cmd_eval.
enum class EvalSource { kModel, kInput, kGroundTruth };

/// Per-image PSNR/SSIM for every α (α is ignored, and reported as 1, for the
/// input and ground-truth sources). Writes report.json and report.csv to
/// `out_dir` when given.
metrics::MetricReport cmd_eval(const std::filesystem::path& dataset_dir,
                               const std::optional<std::filesystem::path>& ckpt_dir,
                               const std::vector<double>& alphas, EvalSource source,
                               const std::optional<std::filesystem::path>& out_dir);

/// Scores an in-memory model on in-memory samples.
metrics::MetricReport evaluate_model(const Model<float>& model, const std::vector<Sample>& samples,
                                     const std::vector<double>& alphas);

/// $AMPE_HOME if set, otherwise ./ampe-home.
std::filesystem::path artifact_root();

/// Fresh id that is not yet a directory under `parent`; creates it.
std::string create_run_dir(const std::filesystem::path& parent);

}  // namespace ampe
