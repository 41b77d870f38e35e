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

#include "ampe/tensor.hpp"
#include "json.hpp"

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace ampe {

/// splitmix64 finalizer; used to derive independent RNG streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index = 0) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : stream) h = (h ^ ch) * 1099511628211ULL;
  return mix64(mix64(base ^ h) + index);
}

namespace json_util {

/// Throws ConfigError if `j` is not an object or holds a key outside `allowed`.
inline void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                           std::string_view what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError(std::string(what) + ": unknown field '" + key + "'");
  }
}

/// Reads an optional field, converting type errors into ConfigError.
template <typename T>
void optional_field(const nlohmann::json& j, const char* key, T& out, std::string_view what) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(what) + ": field '" + key + "' has the wrong type (" + e.what() + ")");
  }
}

}  // namespace json_util
}  // namespace ampe
