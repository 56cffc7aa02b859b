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

#include "airlens/types.hpp"

#include <span>
#include <string>
#include <string_view>

namespace airlens {

/// Background of the drawing. Cells above the diagonal that hold exactly
/// zero are not drawn, so the masked half of a causal matrix shows this.
inline constexpr std::string_view kHeatmapBackground = "#ffffff";

/// Self-contained SVG of a rectangular matrix: linear color scale from the
/// smaller of 0 and the minimum up to the maximum, token-index axis ticks,
/// and rule lines wherever the column modality changes. Output depends only
/// on the inputs, byte for byte. Throws ErrorKind::invalid_argument on empty
/// or non-finite input or mismatched labels.
std::string heatmap_svg(const Matrix& m, std::span<const Modality> labels = {},
                        std::string_view title = {});

}  // namespace airlens
