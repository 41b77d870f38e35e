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
#include "ampe/training.hpp"

#include "ampe/util.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace ampe {

std::string_view phase_name(Phase p) { return p == Phase::kLocNet ? "locnet" : "main"; }

Phase phase_from_name(std::string_view name) {
  if (name == "locnet") return Phase::kLocNet;
  if (name == "main") return Phase::kMain;
  throw ConfigError("unknown training phase '" + std::string(name) + "' (expected locnet or main)");
}

void TrainConfig::validate() const {
  auto fail = [](const char* field, const char* why) { throw ConfigError(std::string("train config: ") + field + " " + why); };
  if (batch_size < 0) fail("batch_size", "must be >= 1 (or 0 for the phase default)");
  if (patch_size < 32 || patch_size % 32 != 0) fail("patch_size", "must be a positive multiple of 32");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate", "must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) fail("lr_decay", "must lie in (0, 1]");
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (steps_per_epoch < 1) fail("steps_per_epoch", "must be >= 1");
  if (!(alpha_train >= 0.0 && alpha_train <= 1.0)) fail("alpha_train", "must lie in [0, 1]");
  if (!(transmission_floor > 0.0 && transmission_floor < 1.0)) fail("transmission_floor", "must lie in (0, 1)");
  arch.refnet.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"phase", phase_name(c.phase)},
       {"batch_size", c.effective_batch()},
       {"patch_size", c.patch_size},
       {"learning_rate", c.learning_rate},
       {"lr_decay", c.lr_decay},
       {"epochs", c.epochs},
       {"steps_per_epoch", c.steps_per_epoch},
       {"alpha_train", c.alpha_train},
       {"use_locnet", c.use_locnet},
       {"use_estnet_t", c.use_estnet_t},
       {"use_loss_l2", c.use_loss_l2},
       {"seed", c.seed},
       {"transmission_floor", c.transmission_floor},
       {"architecture", c.arch}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  using namespace json_util;
  constexpr std::string_view what = "train config";
  reject_unknown(j,
                 {"phase", "batch_size", "patch_size", "learning_rate", "lr_decay", "epochs", "steps_per_epoch",
                  "alpha_train", "use_locnet", "use_estnet_t", "use_loss_l2", "seed", "transmission_floor",
                  "architecture"},
                 what);
  c = TrainConfig{};
  std::string phase = "locnet";
  optional_field(j, "phase", phase, what);
  c.phase = phase_from_name(phase);
  optional_field(j, "batch_size", c.batch_size, what);
  optional_field(j, "patch_size", c.patch_size, what);
  optional_field(j, "learning_rate", c.learning_rate, what);
  optional_field(j, "lr_decay", c.lr_decay, what);
  optional_field(j, "epochs", c.epochs, what);
  optional_field(j, "steps_per_epoch", c.steps_per_epoch, what);
  optional_field(j, "alpha_train", c.alpha_train, what);
  optional_field(j, "use_locnet", c.use_locnet, what);
  optional_field(j, "use_estnet_t", c.use_estnet_t, what);
  optional_field(j, "use_loss_l2", c.use_loss_l2, what);
  optional_field(j, "seed", c.seed, what);
  optional_field(j, "transmission_floor", c.transmission_floor, what);
  if (j.contains("architecture")) c.arch = j.at("architecture").get<Architecture>();
  c.validate();
}

nlohmann::json StepLog::to_json(Phase phase) const {
  nlohmann::json j = {{"step", step}, {"epoch", epoch}, {"loss", loss}, {"value", value}, {"lr", lr}};
  if (phase == Phase::kMain) {
    j["refine"] = refine;
    j["total"] = value + refine;
  }
  return j;
}

BatchSampler::BatchSampler(std::size_t count, std::uint64_t seed) : count_(count), seed_(seed) {
  if (count == 0) throw ConfigError("batch sampler: dataset is empty");
  reshuffle();
}

void BatchSampler::reshuffle() {
  order_.resize(count_);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed_, "shuffle", pass_++));
  // Fisher-Yates with explicit draws: std::shuffle's algorithm is not
  // pinned by the standard.
  for (std::size_t i = count_; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order_[i - 1], order_[j]);
  }
  cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next(int batch) {
  std::vector<std::size_t> out;
  for (int k = 0; k < batch; ++k) {
    if (cursor_ == count_) reshuffle();
    out.push_back(order_[cursor_++]);
  }
  return out;
}

namespace {

struct Crop {
  Index y = 0, x = 0;
};

template <typename Scalar>
Tensor<Scalar> crop_at(const Tensor<Scalar>& t, Crop c, Index size) {
  if (c.y == 0 && c.x == 0 && t.height == size && t.width == size) return t;
  Tensor<Scalar> out(t.channels, size, size);
  for (Index ch = 0; ch < t.channels; ++ch)
    for (Index y = 0; y < size; ++y)
      for (Index x = 0; x < size; ++x) out(ch, y, x) = t(ch, c.y + y, c.x + x);
  return out;
}

class CropSampler {
 public:
  CropSampler(Index patch, std::uint64_t seed) : patch_(patch), rng_(derive_seed(seed, "crop")) {}
  Crop draw(const Sample& s) {
    if (s.clean.height < patch_ || s.clean.width < patch_) {
      throw ConfigError("sample '" + s.id + "' (" + to_string(s.clean.shape()) + ") is smaller than patch size " +
                        std::to_string(patch_));
    }
    Crop c;
    if (s.clean.height > patch_) c.y = static_cast<Index>(rng_() % static_cast<std::uint64_t>(s.clean.height - patch_ + 1));
    if (s.clean.width > patch_) c.x = static_cast<Index>(rng_() % static_cast<std::uint64_t>(s.clean.width - patch_ + 1));
    return c;
  }

 private:
  Index patch_;
  std::mt19937_64 rng_;
};

void require_finite(double v, const char* what, long step) {
  if (!std::isfinite(v)) {
    throw nn::NonFiniteError(std::string("non-finite ") + what + " at step " + std::to_string(step) +
                             "; check the transmission floor and learning rate");
  }
}

}  // namespace

double mean_location_loss(const nn::Network<float>& locnet, const std::vector<Sample>& data) {
  double total = 0.0;
  Index count = 0;
  for (const auto& s : data) {
    const Tensor<float> l = nets::locnet_forward(locnet, s.rainy.cast<float>());
    total += loss::loss_loc(l, s.location.cast<float>());
    count += l.size();
  }
  return count ? total / double(count) : 0.0;
}

LocNetRun train_locnet(const std::vector<Sample>& data, const TrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  if (!cfg.use_locnet) throw ConfigError("phase 'locnet' is invalid with use_locnet = false");
  if (data.empty()) throw ConfigError("phase 'locnet': dataset is empty");
  LocNetRun run{nets::build_locnet<float>(cfg.arch.locnet, derive_seed(cfg.seed, "locnet")), {}};
  auto state = nn::TrainState<float>::for_network(run.net, cfg.learning_rate);
  BatchSampler batches(data.size(), cfg.seed);
  CropSampler crops(cfg.patch_size, cfg.seed);
  const int batch = cfg.effective_batch();
  const double scale = 1.0 / double(batch * cfg.patch_size * cfg.patch_size);

  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    state.epoch = epoch;
    state.lr = nn::scheduled_lr(cfg.learning_rate, cfg.lr_decay, epoch);
    for (int s = 0; s < cfg.steps_per_epoch; ++s) {
      ++step;
      auto grads = run.net.zero_gradients();
      double sum = 0.0;
      for (std::size_t idx : batches.next(batch)) {
        const Sample& sample = data[idx];
        const Crop c = crops.draw(sample);
        const Tensor<float> image = crop_at(sample.rainy, c, cfg.patch_size).cast<float>();
        const Tensor<float> target = crop_at(sample.location, c, cfg.patch_size).cast<float>();
        auto fwd = run.net.forward(image);
        sum += loss::loss_loc(fwd.outputs[0], target);
        const Tensor<float> g = loss::loss_loc_grad(fwd.outputs[0], target, scale);
        run.net.backward_into(fwd.cache, std::span(&g, 1), grads);
      }
      StepLog log{step, epoch, "loc", sum * scale, 0.0, state.lr};
      require_finite(log.value, "location loss", step);
      nn::adam_step(run.net, state, grads);
      if (on_step) on_step(log);
      run.log.push_back(std::move(log));
    }
  }
  return run;
}

MainRun train_main(const std::vector<Sample>& data, const nn::Network<float>* locnet, const TrainConfig& cfg,
                   const StepCallback& on_step) {
  cfg.validate();
  if (data.empty()) throw ConfigError("phase 'main': dataset is empty");
  if (cfg.use_locnet && !locnet) throw ConfigError("phase 'main' needs a LocNet checkpoint; run phase 'locnet' first");

  ModelFlags flags = cfg.flags();
  flags.use_locnet = false;  // built separately below
  MainRun run{build_model(cfg.arch, flags, cfg.seed), {}};
  run.model.flags = cfg.flags();
  if (cfg.use_locnet) run.model.locnet = *locnet;
  Model<float>& m = run.model;

  std::optional<nn::TrainState<float>> st_t;
  if (m.est_t) st_t = nn::TrainState<float>::for_network(*m.est_t, cfg.learning_rate);
  auto st_r = nn::TrainState<float>::for_network(*m.est_r, cfg.learning_rate);
  auto st_f = nn::TrainState<float>::for_network(*m.refnet, cfg.learning_rate);

  // H(·) is frozen, so whole-image guides are computed once.
  std::vector<std::optional<Tensor<float>>> guides(data.size());
  BatchSampler batches(data.size(), cfg.seed);
  CropSampler crops(cfg.patch_size, cfg.seed);
  const int batch = cfg.effective_batch();
  const double scale = 1.0 / double(batch * 3 * cfg.patch_size * cfg.patch_size);

  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = nn::scheduled_lr(cfg.learning_rate, cfg.lr_decay, epoch);
    for (auto* s : {st_t ? &*st_t : nullptr, &st_r, &st_f})
      if (s) s->lr = lr, s->epoch = epoch;
    for (int s = 0; s < cfg.steps_per_epoch; ++s) {
      ++step;
      const loss::ModelLoss which = loss::select_model_loss(step, cfg.use_loss_l2);
      auto grads = MainGrads<float>::zeros(m);
      double lm = 0.0, lr_sum = 0.0;
      for (std::size_t idx : batches.next(batch)) {
        const Sample& sample = data[idx];
        const Crop c = crops.draw(sample);
        const Tensor<float> image = crop_at(sample.rainy, c, cfg.patch_size).cast<float>();
        const Tensor<float> clean = crop_at(sample.clean, c, cfg.patch_size).cast<float>();
        Tensor<float> guide;
        if (image.height == sample.rainy.height && image.width == sample.rainy.width) {
          if (!guides[idx]) guides[idx] = location_guide(m, image);
          guide = *guides[idx];
        } else {
          guide = location_guide(m, image);
        }
        const MainLoss l = main_objective(m, image, clean, guide, which, cfg.alpha_train, scale, &grads);
        lm += l.model;
        lr_sum += l.refine;
      }
      StepLog log{step, epoch, std::string(loss::name(which)), lm * scale, lr_sum * scale, lr};
      require_finite(log.value + log.refine, "training loss", step);
      if (m.est_t) nn::adam_step(*m.est_t, *st_t, grads.est_t);
      nn::adam_step(*m.est_r, st_r, grads.est_r);
      nn::adam_step(*m.refnet, st_f, grads.refnet);
      if (on_step) on_step(log);
      run.log.push_back(std::move(log));
    }
  }
  return run;
}

}  // namespace ampe
