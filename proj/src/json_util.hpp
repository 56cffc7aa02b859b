// Copyright 2026 The airlens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "airlens/io.hpp"

#include <json.hpp>

#include <cmath>
#include <span>

namespace airlens {

using Json = nlohmann::ordered_json;

// Report number: rounded, null when non-finite.
inline Json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return round_significant(v);
}

inline Json num_array(std::span<const double> v) {
  Json out = Json::array();
  for (double x : v) out.push_back(num(x));
  return out;
}

inline Json num_array(const Vector& v) {
  return num_array(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace airlens
