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

// The assembled deraining model and its differentiable phase-2 objective.
//
//   L̂   = H(I)                        (0.5 everywhere without LocNet)
//   T̂   = clamp(F(I, 1−L̂, I∘(1−L̂)))   (1 everywhere without EstNet-T)
//   R̂   = G(I, L̂, I∘L̂)
//   B_m = (I − R̂) ⊘ T̂
//   B̂   = α·B_m + (1−α)·R(B_m)
//
// The refinement net sees B_m clamped to [0,1], in training and inference
// alike, so blends can be rebuilt from the saved 8-bit bm/refined images.

#include "ampe/losses.hpp"
#include "ampe/nets/estnets.hpp"
#include "ampe/nets/locnet.hpp"
#include "ampe/nets/refnet.hpp"
#include "ampe/nn/grad_check.hpp"

#include <optional>

namespace ampe {

struct ModelFlags {
  bool use_locnet = true;
  bool use_estnet_t = true;
  double transmission_floor = kDefaultTransmissionFloor;

  friend bool operator==(const ModelFlags&, const ModelFlags&) = default;
};

struct Architecture {
  nets::LocNetConfig locnet;
  Index est_channels = 16;
  Index est_resblocks = 5;
  nets::RefNetConfig refnet;

  nets::EstNetConfig estnet(nets::EstKind kind) const {
    return {kind, est_channels, est_resblocks, 9};
  }
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

void to_json(nlohmann::json& j, const ModelFlags& f);
void from_json(const nlohmann::json& j, ModelFlags& f);
void to_json(nlohmann::json& j, const Architecture& a);
void from_json(const nlohmann::json& j, Architecture& a);

/// Subnets absent from a model are those disabled by its flags (or, for a
/// LocNet-only checkpoint, everything after phase 1).
template <typename Scalar>
struct Model {
  Architecture arch;
  ModelFlags flags;
  std::optional<nn::Network<Scalar>> locnet;
  std::optional<nn::Network<Scalar>> est_t;
  std::optional<nn::Network<Scalar>> est_r;
  std::optional<nn::Network<Scalar>> refnet;

  bool complete() const {
    return (!flags.use_locnet || locnet) && (!flags.use_estnet_t || est_t) && est_r && refnet;
  }

  template <typename Other>
  Model<Other> cast() const {
    Model<Other> m;
    m.arch = arch;
    m.flags = flags;
    if (locnet) m.locnet = locnet->template cast<Other>();
    if (est_t) m.est_t = est_t->template cast<Other>();
    if (est_r) m.est_r = est_r->template cast<Other>();
    if (refnet) m.refnet = refnet->template cast<Other>();
    return m;
  }
};

/// Fresh networks for every enabled subnet, each with its own derived seed.
Model<float> build_model(const Architecture& arch, const ModelFlags& flags, std::uint64_t seed);
Model<double> build_model_double(const Architecture& arch, const ModelFlags& flags, std::uint64_t seed);

/// Location guide: LocNet output, or the constant 0.5 map when disabled.
template <typename Scalar>
Tensor<Scalar> location_guide(const Model<Scalar>& m, const Tensor<Scalar>& image) {
  if (!m.flags.use_locnet) return Tensor<Scalar>::constant(1, image.height, image.width, Scalar(0.5));
  if (!m.locnet) throw ConfigError("model has no LocNet; run phase 'locnet' first");
  return m.locnet->forward(image).outputs[0];
}

template <typename Scalar>
struct Inference {
  Tensor<Scalar> location;        // L̂
  Tensor<Scalar> transmission;    // T̂ (clamped)
  Tensor<Scalar> rain;            // R̂
  Tensor<Scalar> model_estimate;  // B_m, unclamped
  Tensor<Scalar> refined;         // R(clamp(B_m))

  Tensor<Scalar> blend(double alpha) const { return alpha_blend(clamp_unit(model_estimate), refined, alpha); }
};

/// Full inference chain. Images whose sides are not multiples of the
/// model's divisor are reflect-padded and every map is cropped back.
template <typename Scalar>
Inference<Scalar> infer(const Model<Scalar>& m, const Tensor<Scalar>& image) {
  if (!m.complete()) throw ConfigError("model is incomplete; run phase 'main' first");
  if (image.channels != 3) throw ShapeError("infer: expected a 3-channel image, got " + to_string(image.shape()));
  Index divisor = std::max(m.est_r->required_divisor(), m.refnet->required_divisor());
  if (m.locnet) divisor = std::max(divisor, m.locnet->required_divisor());
  const Tensor<Scalar> padded = reflect_pad_to_multiple(image, divisor);

  Inference<Scalar> out;
  out.location = location_guide(m, padded);
  out.rain = nets::estimate_R(*m.est_r, padded, out.location);
  out.transmission = m.flags.use_estnet_t
                         ? nets::estimate_T(*m.est_t, padded, out.location, m.flags.transmission_floor)
                         : Tensor<Scalar>::constant(3, padded.height, padded.width, Scalar(1));
  out.model_estimate = invert(padded, out.rain, out.transmission, m.flags.transmission_floor);
  out.refined = nets::refine(*m.refnet, clamp_unit(out.model_estimate));
  if (!(padded.shape() == image.shape())) {
    for (auto* t : {&out.location, &out.transmission, &out.rain, &out.model_estimate, &out.refined})
      *t = crop(*t, image.height, image.width);
  }
  return out;
}

/// Per-sample result of the phase-2 objective.
struct MainLoss {
  loss::ModelLoss which = loss::ModelLoss::kInversion;
  double model = 0.0;   // L1 or L2, sum form
  double refine = 0.0;  // L_r, sum form
  double total() const { return model + refine; }
  /// Hash of every activation/clamp pattern; lets gradient checks spot kinks.
  std::uint64_t pattern = 0;
};

template <typename Scalar>
struct MainGrads {
  nn::Gradients<Scalar> est_t, est_r, refnet;

  static MainGrads zeros(const Model<Scalar>& m) {
    MainGrads g;
    if (m.est_t) g.est_t = m.est_t->zero_gradients();
    g.est_r = m.est_r->zero_gradients();
    g.refnet = m.refnet->zero_gradients();
    return g;
  }
};

/// L_m + L_r on one sample with the location guide already computed; when
/// `grads` is given, accumulates d(scale·(L_m + L_r)) into it in a single
/// backward sweep through all three trainable nets.
template <typename Scalar>
MainLoss main_objective(const Model<Scalar>& m, const Tensor<Scalar>& image, const Tensor<Scalar>& clean,
                        const Tensor<Scalar>& guide, loss::ModelLoss which, double alpha, double scale,
                        MainGrads<Scalar>* grads) {
  const double eps = m.flags.transmission_floor;
  MainLoss result;
  result.which = which;

  const Tensor<Scalar> in_r = nets::assemble_guided_input(image, guide);
  auto fr = m.est_r->forward(in_r);
  const Tensor<Scalar>& rain = fr.outputs[0];
  result.pattern = nn::hash_combine(result.pattern, fr.cache.pattern());

  std::optional<nn::ForwardResult<Scalar>> ft;
  Tensor<Scalar> trans, trans_mask;
  if (m.flags.use_estnet_t) {
    ft = m.est_t->forward(nets::assemble_guided_input(image, nets::complement(guide)));
    trans = clamp_transmission(ft->outputs[0], eps);
    trans_mask = clamp_transmission_mask(ft->outputs[0], eps);
    result.pattern = nn::hash_combine(result.pattern, ft->cache.pattern());
    result.pattern = nn::hash_combine(result.pattern, nn::sign_pattern(trans_mask.data));
  } else {
    trans = Tensor<Scalar>::constant(3, image.height, image.width, Scalar(1));
  }

  auto lm = loss::model_loss_grad(which, clean, image, rain, trans, scale);
  result.model = lm.value;

  Tensor<Scalar> bm(image.shape());
  bm.array() = (image.array() - rain.array()) / trans.array();
  Tensor<Scalar> bm_mask(image.shape());
  bm_mask.array() = (bm.array() >= Scalar(0) && bm.array() <= Scalar(1)).template cast<Scalar>();
  result.pattern = nn::hash_combine(result.pattern, nn::sign_pattern(bm_mask.data));
  const Tensor<Scalar> bm_c = clamp_unit(bm);
  auto ff = m.refnet->forward(bm_c);
  const Tensor<Scalar>& refined = ff.outputs[0];
  result.pattern = nn::hash_combine(result.pattern, ff.cache.pattern());
  result.refine = loss::loss_refine(bm_c, refined, clean, alpha);
  if (!grads) return result;

  // d(scale·L_r)/d(blend) and its two branches.
  Tensor<Scalar> d_blend(image.shape());
  d_blend.array() = Scalar(2 * scale) *
                    (Scalar(alpha) * bm_c.array() + Scalar(1 - alpha) * refined.array() - clean.array());
  Tensor<Scalar> d_refined(image.shape());
  d_refined.array() = Scalar(1 - alpha) * d_blend.array();
  std::vector<Tensor<Scalar>> d_ref_in;
  m.refnet->backward_into(ff.cache, std::span(&d_refined, 1), grads->refnet, &d_ref_in);

  // Into B_m through the clamp, then through the division.
  Tensor<Scalar> d_bm(image.shape());
  d_bm.array() = bm_mask.array() * (Scalar(alpha) * d_blend.array() + d_ref_in[0].array());
  Tensor<Scalar> d_rain = lm.d_rain;
  d_rain.array() -= d_bm.array() / trans.array();
  m.est_r->backward_into(fr.cache, std::span(&d_rain, 1), grads->est_r);
  if (ft) {
    Tensor<Scalar> d_raw(image.shape());
    d_raw.array() = trans_mask.array() * (lm.d_trans.array() - d_bm.array() * bm.array() / trans.array());
    m.est_t->backward_into(ft->cache, std::span(&d_raw, 1), grads->est_t);
  }
  return result;
}

/// Finite-difference check of main_objective over every trainable
/// parameter of `m` (double precision only).
nn::GradCheckReport grad_check_objective(Model<double>& m, const Tensor<double>& image, const Tensor<double>& clean,
                                         const Tensor<double>& guide, loss::ModelLoss which, double alpha,
                                         const nn::GradCheckOptions& options = {});

}  // namespace ampe
