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

#include <optional>
#include <span>
#include <vector>

namespace airlens {

/// Generated-token labels, as 0-based decode step indices.
struct TokenLabels {
  std::vector<std::size_t> hallucinated;
  std::vector<std::size_t> non_hallucinated;

  /// Throws ErrorKind::invalid_argument on overlap or steps past `steps`.
  void validate(std::size_t steps) const;
};

/// Forward options that remove one head's mixed output at every position.
ForwardOptions erase_head(const TinyModel& model, const HeadId& head);

/// Intact minus erased probability of each generated token, replayed with
/// teacher forcing over the trace's own tokens. One erased pass covers every
/// position because attention is causal. Throws ErrorKind::precondition when
/// the trace was not produced by this model.
std::vector<double> delta_prob_per_token(const TinyModel& model, const DecodeTrace& trace,
                                         const HeadId& head);

/// All heads at once; rows follow flat_index order.
std::vector<std::vector<double>> delta_prob_all_heads(const TinyModel& model,
                                                      const DecodeTrace& trace);

struct HeadEffect {
  HeadId head;
  double sensitivity = 0.0;
  double effect_size = 0.0;  // +-inf when degenerate
  double var_hallucinated = 0.0;
  double var_non_hallucinated = 0.0;
  double mean_hallucinated = 0.0;
  double mean_non_hallucinated = 0.0;
  std::size_t n_hallucinated = 0;
  std::size_t n_non_hallucinated = 0;
  /// Both variances are zero while S != 0: the effect size is an infinite
  /// sentinel and the head is left out of ranking.
  bool degenerate = false;
};

/// S_h and E_h from the deltas at the labeled steps (population variances).
HeadEffect sensitivity_and_effect(const HeadId& head, std::span<const double> deltas,
                                  const TokenLabels& labels);

/// Same statistic over deltas already split by label, e.g. pooled over
/// several traces.
HeadEffect effect_from_samples(const HeadId& head, std::span<const double> hallucinated,
                               std::span<const double> non_hallucinated);

struct LabeledTrace {
  DecodeTrace trace;
  TokenLabels labels;
};

/// Effects of every head with deltas pooled across the labeled traces.
std::vector<HeadEffect> attribute_heads(const TinyModel& model, std::span<const LabeledTrace> data);

/// Per-head deltas of every labeled step, pooled across traces, so label
/// assignments can be re-scored without rerunning the model.
struct PooledDeltas {
  std::vector<HeadId> heads;
  std::vector<std::vector<double>> deltas;  // [head][pooled step]
  std::vector<bool> hallucinated;           // [pooled step]
};

PooledDeltas pool_deltas(const TinyModel& model, std::span<const LabeledTrace> data);
std::vector<HeadEffect> effects_from_pool(const PooledDeltas& pool, const std::vector<bool>& hallucinated);

/// Label-shuffle baseline: each permutation reshuffles the pooled labels
/// (counts kept) and records max_h |E_h|, so the quantile bounds every head
/// at once. Degenerate effects are left out of the maxima.
struct PermutationNull {
  std::vector<double> max_abs_effect;  // one per permutation
  double quantile = 0.99;
  double threshold = 0.0;              // empirical quantile of max_abs_effect
  double observed_max = 0.0;
  HeadId observed_head;
  bool exceeded() const noexcept { return observed_max > threshold; }
};

/// Linear interpolation between order statistics (the common "type 7" rule).
double empirical_quantile(std::vector<double> values, double q);

PermutationNull permutation_null(const PooledDeltas& pool, std::size_t permutations,
                                 std::uint64_t seed, double quantile = 0.99);

enum class InsensitiveSelector { smallest_magnitude, lowest_effect };

struct RankingSummary {
  double mean_sensitivity = 0.0;
  double mean_effect_size = 0.0;  // over non-degenerate heads
  double mean_delta_hallucinated = 0.0;
  double mean_delta_non_hallucinated = 0.0;
};

struct HeadRanking {
  std::vector<HeadEffect> sensitive;    // E_h descending
  std::vector<HeadEffect> insensitive;  // selector order
  std::vector<HeadEffect> middle;
  std::vector<HeadEffect> excluded;     // degenerate effect sizes
  RankingSummary average;

  std::vector<HeadId> sensitive_heads() const;
  std::vector<HeadId> insensitive_heads() const;
};

/// Ranks by E_h descending with (layer, head) ascending on ties. The
/// insensitive set is chosen among the heads left after the top k.
HeadRanking rank_heads(std::span<const HeadEffect> effects, std::size_t k = 20,
                       InsensitiveSelector selector = InsensitiveSelector::smallest_magnitude);

}  // namespace airlens
