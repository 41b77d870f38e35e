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
// ampe: synth | train | derain | eval | serve

#include "ampe/commands.hpp"
#include "ampe/server.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace ampe;

namespace {

const std::vector<double> kDefaultAlphas{1.0, 0.6, 0.3, 0.0};

std::vector<double> pick_alphas(const std::optional<double>& alpha, const std::vector<double>& alphas) {
  if (alpha) return {*alpha};
  if (!alphas.empty()) return alphas;
  return kDefaultAlphas;
}

void print_report(const metrics::MetricReport& report) {
  std::cout << std::fixed << std::setprecision(4);
  for (const auto& s : report.summaries())
    std::cout << "alpha " << format_alpha(s.alpha) << "  psnr " << s.mean_psnr << "  ssim " << s.mean_ssim << "  ("
              << s.count << " images)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-image rain and haze removal"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic (clean, rainy, location) dataset");
  std::optional<fs::path> synth_config;
  std::optional<std::uint64_t> synth_seed;
  fs::path synth_out;
  synth->add_option("--config", synth_config, "JSON: SynthParams fields plus count, height, width");
  synth->add_option("--seed", synth_seed, "Overrides the config seed");
  synth->add_option("--out", synth_out, "Output dataset directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train one phase into a checkpoint directory");
  std::string phase;
  fs::path train_data, train_ckpt;
  std::optional<fs::path> train_config;
  std::optional<std::uint64_t> train_seed;
  bool no_locnet = false, no_estnet_t = false, no_loss_l2 = false;
  train->add_option("--phase", phase, "locnet or main")->required()->check(CLI::IsMember({"locnet", "main"}));
  train->add_option("--data", train_data, "Dataset directory")->required();
  train->add_option("--checkpoint", train_ckpt, "Checkpoint directory")->required();
  train->add_option("--config", train_config, "JSON training config");
  train->add_option("--seed", train_seed, "Overrides the config seed");
  train->add_flag("--no-locnet", no_locnet, "Ablation: constant 0.5 location guide");
  train->add_flag("--no-estnet-t", no_estnet_t, "Ablation: transmission fixed to 1");
  train->add_flag("--no-loss-l2", no_loss_l2, "Ablation: inversion loss on every step");

  // derain
  auto* derain = app.add_subcommand("derain", "Derain one PNG");
  fs::path derain_input, derain_ckpt;
  std::optional<fs::path> derain_out;
  std::optional<double> derain_alpha;
  std::vector<double> derain_alphas;
  derain->add_option("--input", derain_input, "Input PNG")->required()->check(CLI::ExistingFile);
  derain->add_option("--checkpoint", derain_ckpt, "Checkpoint directory")->required();
  auto* a1 = derain->add_option("--alpha", derain_alpha, "Single blend weight in [0,1]");
  derain->add_option("--alphas", derain_alphas, "Comma-separated blend weights")->delimiter(',')->excludes(a1);
  derain->add_option("--out", derain_out, "Output directory (default: $AMPE_HOME/runs/<id>)");

  // eval
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM against the ground truth");
  fs::path eval_data;
  std::optional<fs::path> eval_ckpt, eval_out;
  std::optional<double> eval_alpha;
  std::vector<double> eval_alphas;
  std::string baseline;
  eval->add_option("--data", eval_data, "Dataset directory")->required();
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint directory");
  auto* a2 = eval->add_option("--alpha", eval_alpha, "Single blend weight");
  eval->add_option("--alphas", eval_alphas, "Comma-separated blend weights")->delimiter(',')->excludes(a2);
  eval->add_option("--baseline", baseline, "Score the rainy input or the ground truth instead of a model")
      ->check(CLI::IsMember({"input", "gt"}));
  eval->add_option("--out", eval_out, "Directory for report.json and report.csv");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the alpha viewer and the derain endpoint");
  ServerOptions serve_opts;
  int port = 8080;
  serve->add_option("--checkpoint", serve_opts.checkpoint, "Checkpoint directory")->required();
  serve->add_option("--port", port, "TCP port (0 picks a free one)");
  serve->add_option("--host", serve_opts.host, "Bind address");
  serve->add_option("--static", serve_opts.static_dir, "Viewer bundle served at /");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      SynthJob job;
      if (synth_config) job = read_json_file(*synth_config).get<SynthJob>();
      if (synth_seed) job.params.seed = *synth_seed;
      const Dataset d = cmd_synth(job, synth_out);
      std::cout << "wrote " << d.samples.size() << " samples to " << synth_out.string() << "\n";
    } else if (*train) {
      TrainConfig cfg;
      if (train_config) {
        nlohmann::json j = read_json_file(*train_config);
        j["phase"] = phase;
        cfg = j.get<TrainConfig>();
      }
      cfg.phase = phase_from_name(phase);
      if (train_seed) cfg.seed = *train_seed;
      if (no_locnet) cfg.use_locnet = false;
      if (no_estnet_t) cfg.use_estnet_t = false;
      if (no_loss_l2) cfg.use_loss_l2 = false;
      cmd_train(cfg, train_data, train_ckpt);
      std::cout << "phase " << phase << " saved to " << train_ckpt.string() << "\n";
    } else if (*derain) {
      fs::path out;
      if (derain_out) {
        out = *derain_out;
      } else {
        const fs::path runs = artifact_root() / "runs";
        out = runs / create_run_dir(runs);
      }
      const RunManifest rm = cmd_derain(derain_input, derain_ckpt, pick_alphas(derain_alpha, derain_alphas), out);
      std::cout << "run " << rm.run_id << " written to " << out.string() << "\n";
    } else if (*eval) {
      EvalSource source = EvalSource::kModel;
      if (baseline == "input") source = EvalSource::kInput;
      if (baseline == "gt") source = EvalSource::kGroundTruth;
      if (source == EvalSource::kModel && !eval_ckpt) throw ConfigError("eval: --checkpoint or --baseline is required");
      print_report(cmd_eval(eval_data, eval_ckpt, pick_alphas(eval_alpha, eval_alphas), source, eval_out));
    } else if (*serve) {
      Server server(serve_opts);
      const int bound = server.bind(port);
      std::cout << "listening on http://" << serve_opts.host << ":" << bound << "/  (runs in "
                << serve_opts.root.string() << ")" << std::endl;
      server.run();
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
