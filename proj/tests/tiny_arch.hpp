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

#include "ampe/model.hpp"

namespace ampe::testing_support {

/// Narrow, shallow variant of every subnet for fast tests.
inline Architecture tiny_architecture() {
  Architecture a;
  a.locnet.scale_factors = {4, 2};
  a.locnet.base_channels = 4;
  a.locnet.dense_growth = 2;
  a.locnet.dense_depth = 2;
  a.locnet.resblocks = 1;
  a.est_channels = 4;
  a.est_resblocks = 1;
  a.refnet.spp_factors = {1, 2, 4, 8};
  a.refnet.base_channels = 4;
  return a;
}

}  // namespace ampe::testing_support
