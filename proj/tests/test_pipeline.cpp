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

#include "airlens/pipeline.hpp"
#include "airlens/error.hpp"
#include "airlens/io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <chrono>
#include <filesystem>

using namespace airlens;
namespace fs = std::filesystem;

namespace {

RunConfig small(std::string_view extra = {}) {
  RunConfig cfg = parse_config(std::string(
      "prompt.examples = 3\nprompt.max_new_tokens = 8\nattribution.traces = 4\nattribution.permutations = 20\n"
      "rectify.prompts = 3\n") + std::string(extra));
  return cfg;
}

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an airlens::Error");
  return ErrorKind::invalid_argument;
}

fs::path scratch(const char* name) {
  fs::path p = fs::temp_directory_path() / ("airlens_pipeline_" + std::string(name));
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("heads files parse one head per line with comments") {
  const auto heads = parse_heads_file("# sensitive\n3:0\n\n 1:2  # trailing\n");
  REQUIRE(heads.size() == 2);
  CHECK(heads[0] == HeadId{3, 0});
  CHECK(heads[1] == HeadId{1, 2});
  CHECK(parse_heads_file("# nothing\n").empty());
  CHECK(kind_of([] { parse_heads_file("3-0\n"); }) == ErrorKind::config);
}

TEST_CASE("format names") {
  CHECK(table_format_from_string("csv") == TableFormat::csv);
  CHECK(table_format_from_string("json") == TableFormat::json);
  CHECK(kind_of([] { table_format_from_string("xml"); }) == ErrorKind::config);
}

TEST_CASE("simulate writes the full artifact set and is reproducible") {
  RunConfig cfg = small();
  const SimulateResult r = simulate(cfg);
  const Artifacts a = simulate_artifacts(cfg, r, {});
  for (const char* name : {"config.txt", "model.json", "trace.json", "tai.csv", "report.json",
                           "attention_mean_l3.csv", "attention_l3_h0.csv", "heatmap_l3_h0.svg"})
    CHECK_MESSAGE(a.count(name) == 1, name);
  CHECK(a.count("tai.json") == 0);

  cfg.output_dir = "somewhere-else";
  CHECK(simulate_artifacts(cfg, simulate(cfg), {}) == a);
  CHECK(a.at("config.txt").find("output.dir") == std::string::npos);

  const auto report = nlohmann::json::parse(a.at("report.json"));
  CHECK(report["schema_version"] == kSchemaVersion);
  CHECK(report["examples"] == 3);

  RunOptions json;
  json.format = TableFormat::json;
  const Artifacts b = simulate_artifacts(cfg, r, json);
  CHECK(b.count("tai.json") == 1);
  CHECK(b.count("tai.csv") == 0);
}

TEST_CASE("per-example TAI covers generated positions only") {
  const RunConfig cfg = small();
  const SimulateResult r = simulate(cfg);
  for (const ExampleImbalance& ex : r.examples) {
    CHECK(ex.prompt_length == cfg.prompt_length());
    CHECK(ex.tokens.size() == cfg.prompt.max_new_tokens - 1);
    for (std::size_t s = 0; s < ex.tokens.size(); ++s) CHECK(ex.tokens[s].position == ex.prompt_length + s);
  }
}

TEST_CASE("a different seed changes the run") {
  RunConfig a = small(), b = small("seed = 2\n");
  CHECK(simulate_artifacts(a, simulate(a), {}).at("trace.json") !=
        simulate_artifacts(b, simulate(b), {}).at("trace.json"));
}

TEST_CASE("text-bias simulate reports the planted fraction") {
  const RunConfig cfg = small("scenario.kind = planted-text-bias\nscenario.target = 3:0\n");
  const SimulateResult r = simulate(cfg);
  REQUIRE(r.planted_text_fraction);
  CHECK(*r.planted_text_fraction > cfg.scenario.tau_text);
}

TEST_CASE("attribution recovers the planted head") {
  RunConfig cfg = small("scenario.kind = planted-hallucination-head\nscenario.target = 2:5\n");
  cfg.attribution.traces = 8;
  const AttributeResult r = attribute(cfg);
  REQUIRE(r.planted_rank);
  CHECK(*r.planted_rank == 1);
  CHECK(r.ranking.sensitive.front().head == HeadId{2, 5});
  const Artifacts a = attribute_artifacts(cfg, r, {});
  for (const char* name : {"head_effects.csv", "effect_grid.csv", "sensitive_heads.txt", "insensitive_heads.txt",
                           "attribution.json"})
    CHECK_MESSAGE(a.count(name) == 1, name);
  const auto sensitive = parse_heads_file(a.at("sensitive_heads.txt"));
  CHECK(sensitive.size() == cfg.attribution.k);
  CHECK(sensitive.front() == HeadId{2, 5});
}

TEST_CASE("k larger than the head count is a precondition error") {
  const RunConfig cfg = small("attribution.k = 33\n");
  CHECK(kind_of([&] { attribute(cfg); }) == ErrorKind::precondition);
}

TEST_CASE("rectify needs a sensitive set") {
  const RunConfig cfg = small();
  CHECK(kind_of([&] { rectify(cfg, {}); }) == ErrorKind::precondition);
}

TEST_CASE("an empty sensitive set leaves every trace unchanged") {
  const RunConfig cfg = small();
  RunOptions opt;
  opt.heads = std::vector<HeadId>{};
  const RectifyResult r = rectify(cfg, opt);
  CHECK(r.heads.empty());
  CHECK(r.identical_traces == cfg.rectify.prompts);
  for (const RectifyPair& p : r.pairs) CHECK(p.air.triggers.empty());
}

TEST_CASE("rectify lowers MAI on a text-biased head") {
  const RunConfig cfg = small("scenario.kind = planted-text-bias\nscenario.target = 3:0\n");
  const RectifyResult r = rectify(cfg, {});
  CHECK(r.heads_source == "planted");
  CHECK(r.mai_decreased == cfg.rectify.prompts);
  const Artifacts a = rectify_artifacts(cfg, r, {});
  CHECK(a.count("rectify.json") == 1);
  CHECK(a.count("triggers.csv") == 1);
}

TEST_CASE("theory report with small budgets") {
  const RunConfig cfg = small(
      "theory.d = 16\ntheory.T = 32\ntheory.specs = 2\ntheory.moment_instances = 1\ntheory.moment_samples = 2000\n"
      "theory.walk_samples = 2000\ntheory.propagation_samples = 2000\ntheory.peak_d = 32\ntheory.sweep_points = 11\n");
  const TheoryReport r = theory(cfg);
  CHECK(r.specs.size() == 2);
  CHECK(r.sweep.rows() == 11);
  CHECK(r.sweep.cols() == 3);
  REQUIRE(r.regimes.size() == 3);
  CHECK(r.regimes.back().report.regime == Regime::uniform);
  const Artifacts a = theory_artifacts(cfg, r, {});
  CHECK(a.count("theory.json") == 1);
  CHECK(a.count("theory_checks.csv") == 1);
  CHECK(a.count("rho_sweep.csv") == 1);
}

TEST_CASE("runs write into the output directory") {
  RunConfig cfg = small();
  cfg.output_dir = scratch("out");
  const auto names = run_simulate(cfg, {});
  for (const std::string& n : names) CHECK(fs::exists(fs::path(cfg.output_dir) / n));
  fs::remove_all(cfg.output_dir);
}

TEST_CASE("an unwritable output directory is an io error") {
  const fs::path file = scratch("blocker");
  write_file_atomic(file, "x");
  RunConfig cfg = small();
  cfg.output_dir = file / "sub";
  CHECK(kind_of([&] { run_simulate(cfg, {}); }) == ErrorKind::io);
  fs::remove(file);
}

TEST_CASE("heatmap from a matrix file") {
  const fs::path dir = scratch("heat");
  fs::create_directories(dir);
  write_file_atomic(dir / "m.csv", "# modality text visual\n1,0\n0.5,0.5\n");
  run_heatmap(dir / "m.csv", dir / "m.svg", "demo");
  CHECK(read_file(dir / "m.svg").find("<svg") != std::string::npos);
  write_file_atomic(dir / "ragged.csv", "1,0\n0.5\n");
  CHECK(kind_of([&] { run_heatmap(dir / "ragged.csv", dir / "r.svg", ""); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([&] { run_heatmap(dir / "missing.csv", dir / "x.svg", ""); }) == ErrorKind::io);
  fs::remove_all(dir);
}
