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

#include "airlens/attention.hpp"

#include "airlens/error.hpp"

#include <cmath>

namespace airlens {

AttentionMatrix softmax_rows(const Matrix& scores, bool causal_mask) {
  AIRLENS_REQUIRE(scores.rows() == scores.cols() && scores.rows() > 0, ErrorKind::invalid_argument,
                  "softmax_rows expects a non-empty square matrix, got ", scores.rows(), "x",
                  scores.cols());
  const Eigen::Index n = scores.rows();
  AttentionMatrix out;
  out.weights = Matrix::Zero(n, n);
  out.row_stochastic = true;
  out.causal = causal_mask;

  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index last = causal_mask ? i : n - 1;
    double row_max = -INFINITY;
    for (Eigen::Index j = 0; j <= last; ++j) {
      const double s = scores(i, j);
      AIRLENS_REQUIRE(std::isfinite(s), ErrorKind::numeric, "softmax_rows: non-finite score in row ", i,
                      " (column ", j, ")");
      row_max = std::max(row_max, s);
    }
    double total = 0.0;
    for (Eigen::Index j = 0; j <= last; ++j) {
      const double e = std::exp(scores(i, j) - row_max);
      out.weights(i, j) = e;
      total += e;
    }
    out.weights.row(i).head(last + 1) /= total;
  }
  return out;
}

bool is_causal(const Matrix& a) noexcept {
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.cols(); ++j)
      if (a(i, j) != 0.0) return false;
  return true;
}

bool is_row_stochastic(const Matrix& a, double tol) noexcept {
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if ((a.row(i).array() < 0.0).any()) return false;
    if (std::abs(a.row(i).sum() - 1.0) > tol) return false;
  }
  return true;
}

}  // namespace airlens
