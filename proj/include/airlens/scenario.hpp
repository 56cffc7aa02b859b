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

#include "airlens/attribution.hpp"
#include "airlens/model.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace airlens {

enum class ScenarioKind { random, planted_text_bias, planted_hallucination };

std::string_view to_string(ScenarioKind k) noexcept;
ScenarioKind scenario_kind_from_string(std::string_view s);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::random;
  HeadId target{0, 0};
  /// Planting strength; 0 picks the scenario's default (text bias: the
  /// smallest swept strength that clears tau_text).
  double strength = 0.0;
  std::int64_t designated_token = 0;
  std::int64_t trigger_token = 1;
  double cue_fraction = 0.3;
  /// Text-bias sweep: stop once the planted head's text fraction exceeds this.
  double tau_text = 0.3;
  /// Label rate for random hallucination labels when nothing is planted.
  double label_rate = 0.3;
};

/// A model with an optional planted head plus what is needed to reproduce
/// its prompts and labels.
struct Scenario {
  ScenarioSpec spec;
  TinyModel model;
  std::optional<HeadId> planted;
  std::vector<std::int64_t> cue_tokens;
  double strength = 0.0;
  /// Planted head's text fraction on the reference prompt (text bias only).
  double baseline_text_fraction = 0.0;
  /// Projection off the subspace reserved for the hallucination plant;
  /// applied to visual embeddings of scenario prompts.
  Matrix reserved_projection;

  /// Prompt with the scenario's structure: hallucination prompts carry the
  /// trigger token and end on a cue token.
  TokenSequence prompt(const PromptSpec& p) const;

  /// Hallucination labels for a trace: steps that emit the designated token
  /// when it is planted, a seeded random split otherwise.
  TokenLabels labels(const DecodeTrace& trace, std::uint64_t seed) const;
};

/// Throws ErrorKind::precondition when the planted property cannot be
/// established (e.g. the text-bias sweep never clears tau_text).
Scenario build_scenario(const ModelParams& params, const ScenarioSpec& spec,
                        const PromptSpec& reference_prompt);

}  // namespace airlens
