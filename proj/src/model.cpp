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
#include "ampe/model.hpp"

#include "ampe/util.hpp"

namespace ampe {

void to_json(nlohmann::json& j, const ModelFlags& f) {
  j = {{"use_locnet", f.use_locnet},
       {"use_estnet_t", f.use_estnet_t},
       {"transmission_floor", f.transmission_floor}};
}

void from_json(const nlohmann::json& j, ModelFlags& f) {
  using namespace json_util;
  reject_unknown(j, {"use_locnet", "use_estnet_t", "transmission_floor"}, "model flags");
  f = ModelFlags{};
  optional_field(j, "use_locnet", f.use_locnet, "model flags");
  optional_field(j, "use_estnet_t", f.use_estnet_t, "model flags");
  optional_field(j, "transmission_floor", f.transmission_floor, "model flags");
  if (!(f.transmission_floor > 0.0 && f.transmission_floor < 1.0))
    throw ConfigError("model flags: transmission_floor must lie in (0, 1)");
}

void to_json(nlohmann::json& j, const Architecture& a) {
  j = {{"locnet", a.locnet},
       {"estnet", {{"base_channels", a.est_channels}, {"resblocks", a.est_resblocks}}},
       {"refnet", a.refnet}};
}

void from_json(const nlohmann::json& j, Architecture& a) {
  a = Architecture{};
  try {
    if (j.contains("locnet")) j.at("locnet").get_to(a.locnet);
    if (j.contains("estnet")) {
      const auto& e = j.at("estnet");
      if (e.contains("base_channels")) e.at("base_channels").get_to(a.est_channels);
      if (e.contains("resblocks")) e.at("resblocks").get_to(a.est_resblocks);
    }
    if (j.contains("refnet")) j.at("refnet").get_to(a.refnet);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("architecture: ") + e.what());
  }
  a.refnet.validate();
}

namespace {

template <typename Scalar>
Model<Scalar> build(const Architecture& arch, const ModelFlags& flags, std::uint64_t seed) {
  Model<Scalar> m;
  m.arch = arch;
  m.flags = flags;
  if (flags.use_locnet) m.locnet = nets::build_locnet<Scalar>(arch.locnet, derive_seed(seed, "locnet"));
  if (flags.use_estnet_t)
    m.est_t = nets::build_estnet<Scalar>(arch.estnet(nets::EstKind::kTransmission), derive_seed(seed, "estnet_t"));
  m.est_r = nets::build_estnet<Scalar>(arch.estnet(nets::EstKind::kRain), derive_seed(seed, "estnet_r"));
  m.refnet = nets::build_refnet<Scalar>(arch.refnet, derive_seed(seed, "refnet"));
  return m;
}

}  // namespace

Model<float> build_model(const Architecture& arch, const ModelFlags& flags, std::uint64_t seed) {
  return build<float>(arch, flags, seed);
}

Model<double> build_model_double(const Architecture& arch, const ModelFlags& flags, std::uint64_t seed) {
  return build<double>(arch, flags, seed);
}

nn::GradCheckReport grad_check_objective(Model<double>& m, const Tensor<double>& image, const Tensor<double>& clean,
                                         const Tensor<double>& guide, loss::ModelLoss which, double alpha,
                                         const nn::GradCheckOptions& options) {
  auto grads = MainGrads<double>::zeros(m);
  main_objective(m, image, clean, guide, which, alpha, 1.0, &grads);
  std::vector<nn::CheckTarget> targets;
  auto add = [&](std::optional<nn::Network<double>>& net, const nn::Gradients<double>& g, const std::string& prefix) {
    if (!net) return;
    for (std::size_t i = 0; i < g.size(); ++i)
      targets.push_back({prefix + net->parameters()[i].path, &net->mutable_value(i), &g[i]});
  };
  add(m.est_t, grads.est_t, "estnet_t/");
  add(m.est_r, grads.est_r, "estnet_r/");
  add(m.refnet, grads.refnet, "refnet/");
  auto evaluate = [&] {
    const MainLoss l = main_objective<double>(m, image, clean, guide, which, alpha, 1.0, nullptr);
    return nn::LossSample{l.total(), l.pattern};
  };
  return nn::check_gradients(targets, evaluate, options);
}

}  // namespace ampe
