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

#include <set>
#include <span>
#include <vector>

namespace airlens {

struct AirConfig {
  std::set<HeadId> sensitive_heads;
  double tau_text = 0.3;
  double lambda = 0.1;  // text suppression
  double gamma = 3.5;   // visual amplification
  double xi = 0.01;     // W_QK rescale coefficient
  double beta = 0.3;    // shrinkage toward the mean entry
  double epsilon = 1e-8;
  double wqk_log_guard = 1e-3;
  /// Off by default: the rectified matrix is used for value mixing as is.
  bool renormalize_rows = false;
  /// Use ||Â||^2 + eps in the energy rescale instead of max(||Â||^2, eps).
  bool additive_epsilon = false;

  /// Throws ErrorKind::config on out-of-range hyperparameters and, when a
  /// model is given, on heads it does not have. gamma = 1 is accepted so the
  /// neutral configuration can be expressed.
  void validate(const TinyModel* model = nullptr) const;
};

struct WqkRescale {
  Matrix w_qk;
  double scale = 1.0;
  double trace_sq = 0.0;      // tr(W^2)
  double log_value = 0.0;     // log(tr(W^2) + 1e-6) after guarding
  bool guard_engaged = false;
  bool nonpositive_argument = false;  // log undefined, scale left at 1
};

/// s * W with s = 1 - xi / log(tr(W^2) + 1e-6), |log| floored at guard.
WqkRescale rescale_wqk(const Matrix& w_qk, double xi, double guard = 1e-3);

struct TextFraction {
  double fraction = 0.0;  // raw / text rows
  double raw = 0.0;       // sum over text rows and text columns
  std::size_t text_rows = 0;
};

/// Mean per-text-row attention on text keys. With no text rows the fraction
/// is 0 (text_rows == 0 tells the caller why).
TextFraction text_attention_fraction(const Matrix& a, std::span<const Modality> labels);

/// Mean over text rows of text mass / row mass; equals the text fraction for
/// row-stochastic input and stays in [0, 1] after reallocation.
double text_share(const Matrix& a, std::span<const Modality> labels);

AttentionMatrix modality_reallocate(const AttentionMatrix& a, std::span<const Modality> labels,
                                    double lambda, double gamma);

/// Zero-trace projection, Frobenius-energy rescale and shrinkage.
AttentionMatrix variance_regularize(const AttentionMatrix& a, double beta, double epsilon = 1e-8,
                                    bool additive_epsilon = false);

struct AirApplyInfo {
  bool sensitive = false;
  bool triggered = false;
  double pre_fraction = 0.0;
  double post_fraction = 0.0;  // text share after reallocation; pre value when not triggered
};

/// Algorithm body for one head. Heads outside the sensitive set come back
/// unchanged.
AttentionMatrix air_apply(const AttentionMatrix& a, std::span<const Modality> labels,
                          const AirConfig& cfg, AirApplyInfo* info = nullptr);

struct TriggerRecord {
  std::size_t step = 0;
  HeadId head;
  double pre_fraction = 0.0;
  double post_fraction = 0.0;
  bool applied = false;  // reallocation ran
};

struct RescaleRecord {
  HeadId head;
  double scale = 1.0;
  double log_value = 0.0;
  bool guard_engaged = false;
  bool nonpositive_argument = false;
};

/// Rescales W_QK of every sensitive head in place, once.
std::vector<RescaleRecord> apply_wqk_rescale(TinyModel& model, const AirConfig& cfg);

struct AirDecode {
  DecodeTrace trace;
  std::vector<TriggerRecord> triggers;  // one row per sensitive head per step
  std::vector<RescaleRecord> rescales;
};

/// Hook running air_apply on the sensitive heads; each call is appended to
/// `log` when given. The hook keeps its own copy of `cfg`.
AttentionHook air_hook(const AirConfig& cfg, std::vector<TriggerRecord>* log = nullptr);

/// Greedy decoding with AIR: W_QK rescale on a copy of the model, then
/// air_apply on sensitive heads at every step. `before` runs ahead of AIR on
/// every head (and alone when no head is sensitive).
AirDecode decode_with_air(const TinyModel& model, const TokenSequence& prompt, const AirConfig& cfg,
                          std::size_t max_new_tokens, const AttentionHook& before = {});

/// Mean MAI(text, visual) over the given heads on the last step's matrices.
double mean_text_visual_mai(const DecodeTrace& trace, std::span<const HeadId> heads,
                            std::size_t heads_per_layer);

}  // namespace airlens
