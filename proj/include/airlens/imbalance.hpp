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

#include "airlens/attention.hpp"
#include "airlens/model.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace airlens {

/// Total attention mass received by each modality's columns.
struct ModalityMass {
  std::array<double, kModalityCount> totals{};

  double of(Modality m) const noexcept { return totals[static_cast<std::size_t>(m)]; }
  double total() const noexcept;
};

ModalityMass modality_attention_mass(const Matrix& a, std::span<const Modality> labels);

/// Ratio of the masses received by modalities p and q. Throws
/// ErrorKind::undefined when q received no mass.
double mai(const ModalityMass& mass, Modality p, Modality q);

/// Mean over heads of one layer's matrices, the aggregate map used for
/// token-level analysis.
Matrix mean_attention(std::span<const AttentionMatrix> layer_heads);

enum class ContributionEstimator { ablation, injected };

/// Per-context-token contribution to predicting the next token.
struct ContributionProfile {
  std::vector<double> scores;
  ContributionEstimator estimator = ContributionEstimator::ablation;
  std::int64_t target_token = kNoToken;

  static ContributionProfile injected(std::vector<double> scores);
};

/// Single-token ablation estimate for the token at 1-based `target_position`
/// (i+1, with 1 <= i+1 <= T+1): c_j = max(0, log P(y | x_<=i) - log P(y | x_<=i
/// without j)). The target is the realised token when i+1 <= T and the greedy
/// prediction when i+1 = T+1. Ablation removes the token from the sequence;
/// an empty context predicts uniformly over the vocabulary.
ContributionProfile estimate_contributions(const TinyModel& model, const TokenSequence& x,
                                           std::size_t target_position);

/// Column mass received by each of the first `count` key positions.
std::vector<double> column_masses(const Matrix& a, std::size_t count);

/// TAI of context token j (0-based) over the profile's i tokens. Throws
/// ErrorKind::undefined if c_j = 0 or no attention reaches the context.
double tai(const Matrix& a, const ContributionProfile& profile, std::size_t j);

/// TAI of every context token; tokens with c_j = 0 are left empty.
std::vector<std::optional<double>> tai_all(const Matrix& a, const ContributionProfile& profile);

/// mean + population standard deviation of per-example maxima.
double tai_threshold(std::span<const double> per_example_max);

/// Indices with TAI strictly above tau, in position order.
std::vector<std::size_t> detect_imbalanced_tokens(std::span<const double> tai_values, double tau);

struct CooccurrenceHit {
  std::size_t flagged = 0;
  std::size_t labeled = 0;
  std::size_t gap = 0;
};

struct CooccurrenceStats {
  std::vector<CooccurrenceHit> hits;
  double rate = 0.0;  // hits / |labeled|, 0 when nothing is labeled
};

inline constexpr std::size_t kCooccurrenceWindow = 15;

/// Pairs each labeled index with its nearest preceding flagged index and
/// counts it when the gap is within the window.
CooccurrenceStats cooccurrence_stats(std::span<const std::size_t> flagged,
                                     std::span<const std::size_t> labeled,
                                     std::size_t window = kCooccurrenceWindow);

/// Per-token result row of an imbalance analysis.
struct TokenImbalance {
  std::size_t position = 0;
  std::int64_t token = kNoToken;
  std::optional<double> tai;
  bool flagged = false;
};

struct ImbalanceReport {
  std::vector<TokenImbalance> tokens;
  double tau = 0.0;
  std::vector<std::size_t> flagged;
  CooccurrenceStats cooccurrence;
};

/// Cosine similarity of the trailing window x window blocks of two maps.
/// Throws ErrorKind::undefined when either block has zero norm.
double attention_cosine_similarity(const Matrix& a, const Matrix& b, std::size_t output_window);

}  // namespace airlens
