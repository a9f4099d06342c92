// Copyright 2026 The cinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include "cinn/errors.hpp"
#include "json.hpp"

namespace cinn {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (std::string_view k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

// Assigns j[key] to out when present; type errors become ConfigError.
template <typename V>
void read_optional(const nlohmann::json& j, const char* key, V& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace cinn
