// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance [--only name[,name...]]

#include "ampe/commands.hpp"
#include "ampe/image_io.hpp"
#include "ampe/util.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "gradient_suite.hpp"
#include "metric_oracles.hpp"

namespace fs = std::filesystem;
using namespace ampe;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Tensor<double> uniform(Index c, Index h, Index w, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(c, h, w);
  for (Index i = 0; i < t.size(); ++i) t.data.data()[i] = u(rng);
  return t;
}

// compose/invert round trip on 1000 triples, blend identities; < 10 s.
Outcome model_math() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  const double eps = kDefaultTransmissionFloor;
  double worst = 0.0;
  bool blend_exact = true;
  for (int i = 0; i < 1000; ++i) {
    const auto b = uniform(3, 8, 8, 0, 1, rng);
    const auto t = uniform(3, 8, 8, eps, 1, rng);
    const auto r = uniform(3, 8, 8, -0.5, 0.5, rng);
    const auto back = invert(compose_raw(b, t, r), r, t, eps);
    worst = std::max(worst, (back.data - b.data).cwiseAbs().maxCoeff());
    const auto other = uniform(3, 8, 8, 0, 1, rng);
    blend_exact = blend_exact && alpha_blend(b, other, 1.0).data == b.data && alpha_blend(b, other, 0.0).data == other.data;
  }
  const double s = seconds_since(t0);
  return {worst <= 1e-6 && blend_exact && s < 10,
          fmt("max round-trip error %.2e (tol 1e-6), blend identities %s, %.2f s (limit 10 s)", worst,
              blend_exact ? "exact" : "NOT exact", s)};
}

// Every layer kind, every subnet, and the full objective; < 5 min.
Outcome gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0, cases = 0;
  const auto note = [&](const std::string& name, const nn::GradCheckReport& r) {
    ++cases;
    checked += r.checked;
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_name = name + " " + r.worst;
    }
  };
  for (const auto& c : testing_support::layer_cases()) note(c.name, testing_support::run_case(c));
  for (const auto& c : testing_support::subnet_cases()) note(c.name, testing_support::run_case(c));

  std::mt19937_64 rng(4);
  const auto image = uniform(3, 8, 8, 0.05, 0.95, rng);
  const auto clean = uniform(3, 8, 8, 0.05, 0.95, rng);
  const auto guide = uniform(1, 8, 8, 0, 1, rng);
  for (auto which : {loss::ModelLoss::kInversion, loss::ModelLoss::kForward}) {
    for (bool use_t : {true, false}) {
      ModelFlags flags;
      flags.use_locnet = false;
      flags.use_estnet_t = use_t;
      auto m = build_model_double(testing_support::tiny_architecture(), flags, 3);
      nn::GradCheckOptions opt;
      opt.max_entries = 300;
      note(std::string("objective/") + std::string(loss::name(which)) + (use_t ? "" : "/no_t"),
           grad_check_objective(m, image, clean, guide, which, 0.9, opt));
    }
  }
  const double s = seconds_since(t0);
  return {worst < 1e-4 && s < 300 && checked > 0,
          fmt("%zu cases, %zu entries, max relative error %.2e at %s (tol 1e-4), %.1f s (limit 300 s)", cases, checked,
              worst, worst_name.c_str(), s)};
}

Outcome loss_schedule() {
  const auto t0 = Clock::now();
  int wrong = 0;
  for (long i = 1; i <= 1000; ++i) {
    const auto expect = i % 2 == 1 ? loss::ModelLoss::kInversion : loss::ModelLoss::kForward;
    wrong += loss::select_model_loss(i) != expect;
    wrong += loss::select_model_loss(i, false) != loss::ModelLoss::kInversion;
  }
  const double s = seconds_since(t0);
  return {wrong == 0 && s < 1, fmt("%d mismatches over 1000 steps with and without L2, %.4f s (limit 1 s)", wrong, s)};
}

Outcome degeneracy() {
  ModelFlags flags;
  flags.use_estnet_t = false;
  const Model<float> m = build_model(Architecture{}, flags, 8);
  std::mt19937_64 rng(9);
  const Tensor<float> image = uniform(3, 32, 32, 0, 1, rng).cast<float>();
  const auto inf = infer(m, image);
  Tensor<float> residual(image.shape());
  residual.array() = image.array() - inf.rain.array();
  const bool t_one = (inf.transmission.array() == 1.0f).all();
  const bool exact = inf.model_estimate.data == residual.data;
  return {t_one && exact && !m.est_t, fmt("T == 1: %s, B_m == I - R exactly: %s, est_t built: %s", t_one ? "yes" : "no",
                                          exact ? "yes" : "no", m.est_t ? "yes" : "no")};
}

double mean_psnr_of(const metrics::MetricReport& r, double alpha) {
  for (const auto& s : r.summaries())
    if (s.alpha == alpha) return s.mean_psnr;
  return std::nan("");
}

struct OverfitResult {
  Outcome overfit;
  Outcome sweep;
};

// Phase 1: 300 steps (3 epochs of 100, lr 1e-3 -> 1e-5). Phase 2: 500 steps.
OverfitResult overfit() {
  const auto t0 = Clock::now();
  const Dataset data = generate_dataset(4, 64, 64, synth::SynthParams{});

  TrainConfig loc_cfg;
  loc_cfg.phase = Phase::kLocNet;
  loc_cfg.epochs = 3;
  loc_cfg.steps_per_epoch = 100;
  const double loc0 =
      mean_location_loss(nets::build_locnet<float>(loc_cfg.arch.locnet, derive_seed(loc_cfg.seed, "locnet")), data.samples);
  const LocNetRun loc = train_locnet(data.samples, loc_cfg);
  const double loc1 = mean_location_loss(loc.net, data.samples);

  TrainConfig main_cfg;
  main_cfg.phase = Phase::kMain;
  main_cfg.steps_per_epoch = 500;
  // The network phase 2 starts from (same seeds as train_main).
  ModelFlags no_loc = main_cfg.flags();
  no_loc.use_locnet = false;
  Model<float> untrained = build_model(main_cfg.arch, no_loc, main_cfg.seed);
  untrained.flags = main_cfg.flags();
  untrained.locnet = loc.net;
  const double p_untrained = mean_psnr_of(evaluate_model(untrained, data.samples, {0.9}), 0.9);
  double p_input = 0.0;
  for (const auto& s : data.samples) p_input += metrics::psnr(s.rainy, s.clean) / double(data.samples.size());

  const MainRun run = train_main(data.samples, &loc.net, main_cfg);
  const double p_trained = mean_psnr_of(evaluate_model(run.model, data.samples, {0.9}), 0.9);
  const double s = seconds_since(t0);

  OverfitResult out;
  const double ratio = loc1 / loc0;
  out.overfit.pass = ratio < 0.1 && p_trained >= p_untrained + 3.0 && p_trained > p_input && s < 900;
  out.overfit.detail = fmt(
      "loss_loc %.5f -> %.5f (ratio %.3f, need < 0.1); PSNR(B^(0.9)) untrained %.2f dB -> trained %.2f dB "
      "(gain %.2f, need >= 3), input %.2f dB; %.0f s (limit 900 s)",
      loc0, loc1, ratio, p_untrained, p_trained, p_trained - p_untrained, p_input, s);

  // α sweep on the trained model.
  const std::vector<double> alphas{1.0, 0.6, 0.3, 0.0};
  const auto report = evaluate_model(run.model, data.samples, alphas);
  bool finite = true;
  std::string trend;
  for (double a : alphas) {
    const double p = mean_psnr_of(report, a);
    finite = finite && std::isfinite(p);
    trend += fmt("%s%.1f: %.2f dB", trend.empty() ? "" : ", ", a, p);
  }
  double worst = 0.0;
  for (const auto& smp : data.samples) {
    const auto inf = infer(run.model, smp.rainy.cast<float>());
    const auto bm = quantize_8bit(clamp_unit(inf.model_estimate).cast<double>());
    const auto ref = quantize_8bit(inf.refined.cast<double>());
    for (double a : alphas) {
      const auto blend = quantize_8bit(inf.blend(a).cast<double>());
      worst = std::max(worst, (blend.array() - (a * bm.array() + (1 - a) * ref.array())).abs().maxCoeff());
    }
  }
  out.sweep.pass = finite && worst <= 1.0 / 255 + 1e-12;
  out.sweep.detail = fmt("PSNR by alpha {%s}; max deviation from affine %.5f (tol 1/255 = %.5f)", trend.c_str(), worst,
                         1.0 / 255);
  return out;
}

Outcome metric_suite() {
  std::mt19937_64 rng(12);
  double worst_psnr = 0.0, worst_ssim = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto x = uniform(3, 16, 16, 0, 1, rng);
    const auto y = uniform(3, 16, 16, 0, 1, rng);
    worst_psnr = std::max(worst_psnr, std::abs(metrics::psnr(x, y) - oracle::psnr(x, y)));
    worst_ssim = std::max(worst_ssim, std::abs(metrics::ssim(x, y) - oracle::ssim(x, y)));
  }
  const double c = metrics::ssim(Tensor<double>::constant(3, 16, 16, 0.5), Tensor<double>::constant(3, 16, 16, 0.6));
  const double closed = (2 * 0.3 + 1e-4) / (0.25 + 0.36 + 1e-4);
  const bool pass = worst_psnr <= 1e-9 && worst_ssim <= 1e-9 && std::abs(c - 0.9836) <= 1e-3;
  return {pass, fmt("psnr vs oracle %.1e, ssim vs oracle %.1e (tol 1e-9); constant SSIM %.6f (closed form %.6f, "
                    "target 0.9836 +/- 1e-3)",
                    worst_psnr, worst_ssim, c, closed)};
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = s.str();
  }
  return files;
}

// synth -> train locnet -> train main -> eval, twice with the same seed.
Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "ampe_acceptance_determinism";
  fs::remove_all(base);
  for (const char* run : {"a", "b"}) {
    const fs::path r = base / run;
    SynthJob job;
    job.params.seed = 77;
    cmd_synth(job, r / "data");
    TrainConfig cfg;
    cfg.seed = 77;
    cfg.steps_per_epoch = 6;
    cfg.phase = Phase::kLocNet;
    cmd_train(cfg, r / "data", r / "ckpt");
    cfg.phase = Phase::kMain;
    cfg.epochs = 2;
    cmd_train(cfg, r / "data", r / "ckpt");
    cmd_eval(r / "data", r / "ckpt", {1.0, 0.6, 0.3, 0.0}, EvalSource::kModel, r / "eval");
  }
  const auto a = tree_bytes(base / "a");
  const auto b = tree_bytes(base / "b");
  std::size_t differing = 0;
  std::string first;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) {
      if (!differing++) first = name;
    }
  }
  const bool same_set = a.size() == b.size();
  const bool has_ckpt = a.count("ckpt/manifest.json") && a.count("ckpt/train_main.jsonl") && a.count("ckpt/train_locnet.jsonl");
  fs::remove_all(base);
  return {differing == 0 && same_set && has_ckpt,
          fmt("%zu files compared (dataset, checkpoint, logs, reports), %zu differ%s%s", a.size(), differing,
              differing ? "; first: " : "", first.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only;
  if (argc == 3 && std::string(argv[1]) == "--only") {
    std::stringstream ss(argv[2]);
    for (std::string n; std::getline(ss, n, ',');) only.insert(n);
  }
  const auto wanted = [&](const std::string& n) { return only.empty() || only.count(n); };

  int failures = 0;
  const auto emit = [&](const std::string& name, const Outcome& o) {
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  const auto guarded = [&](const std::string& name, const std::function<Outcome()>& f) {
    if (!wanted(name)) return;
    try {
      emit(name, f());
    } catch (const std::exception& e) {
      emit(name, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded("model-math", model_math);
  guarded("gradients", gradients);
  guarded("loss-schedule", loss_schedule);
  guarded("degeneracy", degeneracy);
  if (wanted("overfit") || wanted("alpha-sweep")) {
    try {
      const OverfitResult r = overfit();
      emit("overfit", r.overfit);
      emit("alpha-sweep", r.sweep);
    } catch (const std::exception& e) {
      emit("overfit", {false, std::string("exception: ") + e.what()});
      emit("alpha-sweep", {false, "not run: overfit failed"});
    }
  }
  guarded("metrics", metric_suite);
  guarded("determinism", determinism);
  return failures ? 1 : 0;
}
