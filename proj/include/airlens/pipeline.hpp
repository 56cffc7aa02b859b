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
#include "airlens/config.hpp"
#include "airlens/imbalance.hpp"
#include "airlens/scenario.hpp"
#include "airlens/theory.hpp"
#include "airlens/theory_mc.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace airlens {

enum class TableFormat { csv, json };
TableFormat table_format_from_string(std::string_view s);

struct RunOptions {
  TableFormat format = TableFormat::csv;
  /// Sensitive heads for rectify; set (possibly empty) when given explicitly.
  std::optional<std::vector<HeadId>> heads;
};

/// "layer:head" per line; blank lines and '#' comments are skipped.
std::vector<HeadId> parse_heads_file(std::string_view text);

/// Files of one run, name to content, written together at the end.
using Artifacts = std::map<std::string, std::string>;

/// Checks the directory, then writes every artifact atomically. Returns the
/// file names in write order.
std::vector<std::string> write_artifacts(const std::filesystem::path& dir, const Artifacts& files);

/// The scenario a config describes, with its seeds derived from cfg.seed.
Scenario scenario_for(const RunConfig& cfg);
PromptSpec prompt_for(const RunConfig& cfg, std::uint64_t stream, std::size_t index);

// ---------------------------------------------------------------------------
// simulate

/// TAI of the generated tokens of one trace. The context is the final
/// sequence without its last token, the target is that last token, and the
/// map is the mean of the analysis layer's heads at the last step.
struct ExampleImbalance {
  std::size_t prompt_length = 0;
  std::vector<TokenImbalance> tokens;  // one per generated token in the context
  std::vector<std::size_t> flagged_steps;
  TokenLabels labels;
  std::optional<double> max_tai;
  Matrix aggregate;
};

ExampleImbalance analyze_example(const TinyModel& model, const DecodeTrace& trace, std::size_t layer);

/// Sets tau from the per-example maxima and flags every example against it.
/// tau is +inf when no generated token has a defined TAI.
double flag_examples(std::vector<ExampleImbalance>& examples);

struct SimulateResult {
  Scenario scenario;
  std::vector<DecodeTrace> traces;
  std::vector<ExampleImbalance> examples;
  double tau = 0.0;
  CooccurrenceStats cooccurrence;  // pooled over examples
  std::optional<double> planted_text_fraction;  // mean over examples, first step
};

SimulateResult simulate(const RunConfig& cfg);
Artifacts simulate_artifacts(const RunConfig& cfg, const SimulateResult& r, const RunOptions& opt);

// ---------------------------------------------------------------------------
// attribute

struct AttributeResult {
  Scenario scenario;
  std::vector<LabeledTrace> data;
  std::vector<HeadEffect> effects;
  HeadRanking ranking;
  PermutationNull null;
  std::optional<std::size_t> planted_rank;  // 1-based among ranked heads
};

AttributeResult attribute(const RunConfig& cfg);
Artifacts attribute_artifacts(const RunConfig& cfg, const AttributeResult& r, const RunOptions& opt);

// ---------------------------------------------------------------------------
// rectify

struct RectifyPair {
  DecodeTrace baseline;
  AirDecode air;
  std::optional<double> mai_before;  // mean over sensitive heads; unset when empty
  std::optional<double> mai_after;
  std::vector<double> head_mai_before;  // per sensitive head
  std::vector<double> head_mai_after;
  std::size_t flagged_before = 0;
  std::size_t flagged_after = 0;
  std::size_t designated_before = 0;
  std::size_t designated_after = 0;
};

struct RectifyResult {
  Scenario scenario;
  std::vector<HeadId> heads;
  std::string heads_source;
  double tau = 0.0;
  std::vector<RectifyPair> pairs;
  std::size_t mai_decreased = 0;
  std::size_t identical_traces = 0;
};

/// Sensitive set: options.heads, else air.heads from the config, else the
/// planted head; a precondition failure when none applies.
RectifyResult rectify(const RunConfig& cfg, const RunOptions& opt);
Artifacts rectify_artifacts(const RunConfig& cfg, const RectifyResult& r, const RunOptions& opt);

// ---------------------------------------------------------------------------
// theory

struct RegimeRow {
  std::string spec;
  RegimeReport report;
};

struct TheoryReport {
  std::vector<TheoryResult> checks;
  std::vector<RegimeRow> regimes;
  std::vector<WalkSpec> specs;  // the propagation specs, also swept
  Matrix sweep;                 // points x (1 + specs): theta, then rho per spec
  bool all_agree() const;
};

/// Specs of the propagation checks: d x T, tr(W) = c sqrt(d) with c cycling
/// through theory.trace_c.
std::vector<WalkSpec> theory_specs(const RunConfig& cfg);
TheoryReport theory(const RunConfig& cfg);
Artifacts theory_artifacts(const RunConfig& cfg, const TheoryReport& r, const RunOptions& opt);

// ---------------------------------------------------------------------------

/// Whole subcommands: check the output directory, compute, write.
std::vector<std::string> run_simulate(const RunConfig& cfg, const RunOptions& opt = {});
std::vector<std::string> run_attribute(const RunConfig& cfg, const RunOptions& opt = {});
std::vector<std::string> run_rectify(const RunConfig& cfg, const RunOptions& opt = {});
std::vector<std::string> run_theory(const RunConfig& cfg, const RunOptions& opt = {});

/// Renders a matrix dump (matrix_to_csv format) to an SVG file.
void run_heatmap(const std::filesystem::path& matrix_csv, const std::filesystem::path& svg_out,
                 std::string_view title = {});

}  // namespace airlens
