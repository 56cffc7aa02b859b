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

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace airlens {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Modality tag of a token position. Stored as a small integer so reports
/// and masses can index by tag; only text and visual are produced today.
enum class Modality : std::uint8_t { text = 0, visual = 1 };

inline constexpr std::size_t kModalityCount = 2;

std::string_view to_string(Modality m) noexcept;
Modality modality_from_string(std::string_view s);

/// (layer, head) coordinates of one attention head. Orders lexicographically,
/// which is also the tie-break order used by head ranking.
struct HeadId {
  std::size_t layer = 0;
  std::size_t head = 0;

  auto operator<=>(const HeadId&) const = default;
};

std::string to_string(const HeadId& id);

/// Parses "layer:head".
HeadId parse_head_id(std::string_view s);

}  // namespace airlens
