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

#include "airlens/model.hpp"
#include "airlens/random.hpp"

namespace testutil {

inline airlens::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                                     double stddev = 1.0) {
  airlens::Rng rng(seed);
  airlens::Matrix m(rows, cols);
  rng.fill_normal(m, stddev);
  return m;
}

// Random row-stochastic causal matrix built without the library softmax.
inline airlens::Matrix random_causal_stochastic(Eigen::Index t, std::uint64_t seed) {
  airlens::Rng rng(seed);
  airlens::Matrix a = airlens::Matrix::Zero(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j <= i; ++j) s += (a(i, j) = rng.uniform() + 1e-3);
    for (Eigen::Index j = 0; j <= i; ++j) a(i, j) /= s;
  }
  return a;
}

inline airlens::TokenSequence random_sequence(std::size_t d, std::size_t t, std::uint64_t seed,
                                              std::size_t visual_from = 0, std::size_t visual_to = 0) {
  airlens::Rng rng(seed);
  airlens::TokenSequence x;
  x.embeddings.resize(static_cast<Eigen::Index>(d), 0);
  for (std::size_t j = 0; j < t; ++j) {
    airlens::Vector e(static_cast<Eigen::Index>(d));
    rng.fill_normal(e);
    const bool visual = j >= visual_from && j < visual_to;
    x.append(e, visual ? airlens::Modality::visual : airlens::Modality::text,
             visual ? airlens::kNoToken : static_cast<std::int64_t>(j % 7));
  }
  return x;
}

}  // namespace testutil
