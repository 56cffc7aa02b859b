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

#include "airlens/air.hpp"
#include "airlens/attribution.hpp"
#include "airlens/model.hpp"
#include "airlens/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace airlens {

struct PromptSettings {
  std::size_t text_before = 4;
  std::size_t visual = 24;
  std::size_t text_after = 4;
  std::size_t max_new_tokens = 16;
  std::size_t examples = 8;  // seeded prompts per simulate run
};

struct AttributionSettings {
  std::size_t k = 20;
  InsensitiveSelector selector = InsensitiveSelector::smallest_magnitude;
  double label_rate = 0.3;
  std::size_t traces = 8;
  std::size_t permutations = 100;
  double null_quantile = 0.99;
};

struct AnalysisSettings {
  std::optional<std::size_t> layer;  // unset: the last layer
  std::vector<HeadId> heatmap_heads;  // empty: the planted head, else head 0 of the analysis layer
};

struct RectifySettings {
  std::size_t prompts = 20;
};

struct TheorySettings {
  std::size_t d = 64;
  std::size_t T = 256;
  std::size_t specs = 5;
  double spread = 0.05;
  std::vector<double> trace_c{2.0, 3.0, 5.0};
  std::size_t moment_instances = 5;
  std::size_t moment_d = 4;
  std::size_t moment_samples = 200000;
  std::size_t walk_max_step = 16;
  std::size_t walk_samples = 200000;
  std::size_t propagation_samples = 100000;
  std::size_t peak_d = 256;
  std::size_t sweep_points = 101;
  double z = 3.0;
  double allowance = 0.1;
  double rho_allowance = 0.05;
};

/// Everything a run needs. Every field has a default; all seeds in a run
/// derive from `seed`.
struct RunConfig {
  std::uint64_t seed = 1;
  ModelParams model;
  std::size_t max_sequence = 256;
  PromptSettings prompt;
  AirConfig air;
  AttributionSettings attribution;
  AnalysisSettings analysis;
  ScenarioSpec scenario;
  RectifySettings rectify;
  TheorySettings theory;
  std::filesystem::path output_dir = "airlens-out";

  /// Cross-field checks; throws ErrorKind::config.
  void validate() const;

  std::size_t analysis_layer() const { return analysis.layer.value_or(model.layers - 1); }
  std::size_t prompt_length() const {
    return prompt.text_before + prompt.visual + prompt.text_after;
  }
};

/// Flat "key = value" lines with dotted section names, '#' comments and
/// blank lines. Unknown or repeated keys and malformed values throw
/// ErrorKind::config naming the line. The result is validated.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text of every key, in a fixed order; parse_config reads it back.
std::string config_to_text(const RunConfig& cfg);

/// Applies one "key = value" assignment without validating.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

std::vector<std::string> config_keys();

}  // namespace airlens
