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

namespace airlens {

/// A T x T attention weight matrix for one (layer, head). Row i holds the
/// weights query position i assigns to key positions j.
///
/// Matrices produced by softmax are causal and row-stochastic. Rectified
/// matrices may be neither: reallocation breaks row sums, and shrinkage
/// toward the mean entry fills the upper triangle.
struct AttentionMatrix {
  Matrix weights;
  HeadId head{};
  bool row_stochastic = false;
  bool causal = false;

  std::size_t size() const noexcept { return static_cast<std::size_t>(weights.rows()); }
};

/// Row-wise softmax with row-max stabilisation. With `causal_mask`, entries
/// above the diagonal are excluded (treated as -inf) and come out exactly 0.
/// Throws ErrorKind::numeric naming the row when a score is not finite.
AttentionMatrix softmax_rows(const Matrix& scores, bool causal_mask);

/// Checks the causal and (optionally) row-stochastic invariants.
bool is_causal(const Matrix& a) noexcept;
bool is_row_stochastic(const Matrix& a, double tol = 1e-9) noexcept;

}  // namespace airlens
