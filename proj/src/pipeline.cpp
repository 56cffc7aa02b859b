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
#include "airlens/heatmap.hpp"
#include "airlens/io.hpp"
#include "airlens/random.hpp"
#include "json_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace airlens {

namespace {

// Seed streams; every seed of a run derives from cfg.seed through one of these.
constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kReferenceStream = 2;
constexpr std::uint64_t kSimulateStream = 3;
constexpr std::uint64_t kLabelStream = 4;
constexpr std::uint64_t kAttributeStream = 5;
constexpr std::uint64_t kPermutationStream = 6;
constexpr std::uint64_t kRectifyStream = 7;
constexpr std::uint64_t kTheoryStream = 8;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string head_file_name(const char* prefix, const HeadId& h, const char* ext) {
  return std::string(prefix) + "_l" + std::to_string(h.layer) + "_h" + std::to_string(h.head) + ext;
}

Json heads_json(std::span<const HeadId> heads) {
  Json out = Json::array();
  for (const HeadId& h : heads) out.push_back(to_string(h));
  return out;
}

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string out;
  for (const std::string& c : cells) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out + '\n';
}

std::string str(std::size_t v) { return std::to_string(v); }
std::string str(std::int64_t v) { return std::to_string(v); }
std::string str(bool v) { return v ? "true" : "false"; }
std::string str(double v) { return format_number(v); }
std::string str(const std::optional<double>& v) { return v ? format_number(*v) : std::string{}; }

Json opt_num(const std::optional<double>& v) { return v ? num(*v) : Json(nullptr); }

// Config text minus the output directory, so runs that differ only in where
// they write stay byte-identical.
std::string provenance(const RunConfig& cfg) {
  std::istringstream in(config_to_text(cfg));
  std::string line, out;
  while (std::getline(in, line))
    if (line.rfind("output.dir", 0) != 0) out += line + '\n';
  return out;
}

Json scenario_json(const Scenario& s) {
  Json j;
  j["kind"] = std::string(to_string(s.spec.kind));
  j["planted_head"] = s.planted ? Json(to_string(*s.planted)) : Json(nullptr);
  j["strength"] = num(s.strength);
  if (s.spec.kind == ScenarioKind::planted_text_bias)
    j["reference_text_fraction"] = num(s.baseline_text_fraction);
  if (s.spec.kind == ScenarioKind::planted_hallucination) {
    j["designated_token"] = s.spec.designated_token;
    j["trigger_token"] = s.spec.trigger_token;
    j["cue_tokens"] = s.cue_tokens;
  }
  return j;
}

std::size_t count_token(const DecodeTrace& t, std::int64_t token) {
  std::size_t n = 0;
  for (const DecodeStep& s : t.steps) n += s.token == token;
  return n;
}

void apply_tau(std::vector<ExampleImbalance>& examples, double tau) {
  for (ExampleImbalance& ex : examples) {
    std::vector<double> values;
    values.reserve(ex.tokens.size());
    for (const TokenImbalance& t : ex.tokens) values.push_back(t.tai.value_or(-kInf));
    ex.flagged_steps = detect_imbalanced_tokens(values, tau);
    for (TokenImbalance& t : ex.tokens) t.flagged = false;
    for (std::size_t s : ex.flagged_steps) ex.tokens[s].flagged = true;
  }
}

Json trace_json(const DecodeTrace& t) {
  Json j;
  j["prompt_length"] = t.prompt.length();
  j["token_ids"] = t.final_sequence.token_ids;
  std::string mods;
  for (Modality m : t.final_sequence.modality) mods += m == Modality::text ? 't' : 'v';
  j["modality"] = mods;
  j["generated"] = t.tokens();
  Json probs = Json::array();
  for (const DecodeStep& s : t.steps) probs.push_back(num(s.probs[static_cast<Eigen::Index>(s.token)]));
  j["realized_probability"] = std::move(probs);
  return j;
}

}  // namespace

TableFormat table_format_from_string(std::string_view s) {
  if (s == "csv") return TableFormat::csv;
  if (s == "json") return TableFormat::json;
  detail::raise(ErrorKind::config, "unknown format '", s, "' (expected json or csv)");
}

std::vector<HeadId> parse_heads_file(std::string_view text) {
  std::vector<HeadId> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    try {
      out.push_back(parse_head_id(std::string_view(line).substr(b, e - b + 1)));
    } catch (const Error& err) {
      detail::raise(ErrorKind::config, "heads file line ", line_no, ": ", err.what());
    }
  }
  return out;
}

std::vector<std::string> write_artifacts(const std::filesystem::path& dir, const Artifacts& files) {
  ensure_writable_dir(dir);
  std::vector<std::string> names;
  for (const auto& [name, content] : files) {
    write_file_atomic(dir / name, content);
    names.push_back(name);
  }
  return names;
}

Scenario scenario_for(const RunConfig& cfg) {
  ModelParams p = cfg.model;
  p.seed = derive_seed(cfg.seed, kModelStream);
  ScenarioSpec spec = cfg.scenario;
  spec.label_rate = cfg.attribution.label_rate;
  return build_scenario(p, spec, prompt_for(cfg, kReferenceStream, 0));
}

PromptSpec prompt_for(const RunConfig& cfg, std::uint64_t stream, std::size_t index) {
  PromptSpec p;
  p.text_before = cfg.prompt.text_before;
  p.visual = cfg.prompt.visual;
  p.text_after = cfg.prompt.text_after;
  p.seed = derive_seed(derive_seed(cfg.seed, stream), index);
  return p;
}

// ---------------------------------------------------------------------------
// simulate

ExampleImbalance analyze_example(const TinyModel& model, const DecodeTrace& trace, std::size_t layer) {
  AIRLENS_REQUIRE(!trace.steps.empty(), ErrorKind::precondition, "trace has no generated tokens");
  AIRLENS_REQUIRE(layer < model.params.layers, ErrorKind::invalid_argument, "layer ", layer, " out of range");
  ExampleImbalance ex;
  ex.prompt_length = trace.prompt.length();
  const std::size_t n = trace.steps.size();
  const TokenSequence context = trace.final_sequence.prefix(ex.prompt_length + n - 1);
  const auto& attn = trace.steps.back().attention;
  const std::size_t h = model.params.heads;
  ex.aggregate = mean_attention(std::span<const AttentionMatrix>(attn).subspan(layer * h, h));
  const ContributionProfile profile = estimate_contributions(model, context, context.length() + 1);
  const auto values = tai_all(ex.aggregate, profile);
  for (std::size_t s = 0; s + 1 < n; ++s) {
    const std::size_t pos = ex.prompt_length + s;
    ex.tokens.push_back({pos, context.token_ids[pos], values[pos], false});
    if (values[pos]) ex.max_tai = std::max(ex.max_tai.value_or(-kInf), *values[pos]);
  }
  return ex;
}

double flag_examples(std::vector<ExampleImbalance>& examples) {
  std::vector<double> maxima;
  for (const ExampleImbalance& ex : examples)
    if (ex.max_tai) maxima.push_back(*ex.max_tai);
  const double tau = maxima.empty() ? kInf : tai_threshold(maxima);
  apply_tau(examples, tau);
  return tau;
}

SimulateResult simulate(const RunConfig& cfg) {
  cfg.validate();
  SimulateResult r{scenario_for(cfg), {}, {}, 0.0, {}, std::nullopt};
  const TinyModel& model = r.scenario.model;
  const std::size_t layer = cfg.analysis_layer();
  double fraction_sum = 0.0;
  for (std::size_t e = 0; e < cfg.prompt.examples; ++e) {
    const PromptSpec ps = prompt_for(cfg, kSimulateStream, e);
    DecodeTrace trace = generate_tokens(model, r.scenario.prompt(ps), cfg.prompt.max_new_tokens);
    ExampleImbalance ex = analyze_example(model, trace, layer);
    ex.labels = r.scenario.labels(trace, derive_seed(ps.seed, kLabelStream));
    if (r.scenario.spec.kind == ScenarioKind::planted_text_bias) {
      const auto& a = trace.steps.front().attention[model.flat_index(*r.scenario.planted)];
      fraction_sum += text_attention_fraction(a.weights, trace.prompt.modality).fraction;
    }
    r.traces.push_back(std::move(trace));
    r.examples.push_back(std::move(ex));
  }
  if (r.scenario.spec.kind == ScenarioKind::planted_text_bias)
    r.planted_text_fraction = fraction_sum / static_cast<double>(cfg.prompt.examples);
  r.tau = flag_examples(r.examples);
  std::size_t labeled = 0;
  for (const ExampleImbalance& ex : r.examples) {
    const CooccurrenceStats s = cooccurrence_stats(ex.flagged_steps, ex.labels.hallucinated);
    r.cooccurrence.hits.insert(r.cooccurrence.hits.end(), s.hits.begin(), s.hits.end());
    labeled += ex.labels.hallucinated.size();
  }
  r.cooccurrence.rate = labeled ? static_cast<double>(r.cooccurrence.hits.size()) / static_cast<double>(labeled) : 0.0;
  return r;
}

namespace {

std::vector<HeadId> heatmap_heads(const RunConfig& cfg, const Scenario& s) {
  if (!cfg.analysis.heatmap_heads.empty()) return cfg.analysis.heatmap_heads;
  if (s.planted) return {*s.planted};
  return {HeadId{cfg.analysis_layer(), 0}};
}

}  // namespace

Artifacts simulate_artifacts(const RunConfig& cfg, const SimulateResult& r, const RunOptions& opt) {
  Artifacts files;
  const TinyModel& model = r.scenario.model;
  files["config.txt"] = provenance(cfg);
  files["model.json"] = model_to_json(model);

  Json traces = Json::array();
  for (std::size_t e = 0; e < r.traces.size(); ++e) {
    Json t = trace_json(r.traces[e]);
    t["example"] = e;
    traces.push_back(std::move(t));
  }
  Json trace_doc;
  trace_doc["schema_version"] = kSchemaVersion;
  trace_doc["kind"] = "decode_traces";
  trace_doc["traces"] = std::move(traces);
  files["trace.json"] = dump(trace_doc);

  // TAI table: one row per generated token in each example's context.
  std::string csv = "example,step,position,token,tai,flagged,hallucinated\n";
  Json rows = Json::array();
  for (std::size_t e = 0; e < r.examples.size(); ++e) {
    const ExampleImbalance& ex = r.examples[e];
    for (std::size_t s = 0; s < ex.tokens.size(); ++s) {
      const TokenImbalance& t = ex.tokens[s];
      const auto& h = ex.labels.hallucinated;
      const bool hall = std::find(h.begin(), h.end(), s) != h.end();
      csv += csv_row({str(e), str(s), str(t.position), str(t.token), str(t.tai), str(t.flagged), str(hall)});
      rows.push_back({{"example", e}, {"step", s}, {"position", t.position}, {"token", t.token},
                      {"tai", opt_num(t.tai)}, {"flagged", t.flagged}, {"hallucinated", hall}});
    }
  }
  if (opt.format == TableFormat::csv) {
    files["tai.csv"] = csv;
  } else {
    Json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["rows"] = std::move(rows);
    files["tai.json"] = dump(doc);
  }

  Json rep;
  rep["schema_version"] = kSchemaVersion;
  rep["kind"] = "imbalance_report";
  rep["scenario"] = scenario_json(r.scenario);
  rep["analysis_layer"] = cfg.analysis_layer();
  rep["examples"] = r.examples.size();
  rep["tau"] = num(r.tau);
  Json per = Json::array();
  std::size_t flagged = 0;
  for (const ExampleImbalance& ex : r.examples) {
    flagged += ex.flagged_steps.size();
    per.push_back({{"max_tai", opt_num(ex.max_tai)},
                   {"flagged_steps", ex.flagged_steps},
                   {"hallucinated_steps", ex.labels.hallucinated}});
  }
  rep["flagged_tokens"] = flagged;
  rep["per_example"] = std::move(per);
  Json hits = Json::array();
  for (const CooccurrenceHit& h : r.cooccurrence.hits)
    hits.push_back({{"flagged", h.flagged}, {"labeled", h.labeled}, {"gap", h.gap}});
  rep["cooccurrence"] = {{"window", kCooccurrenceWindow}, {"rate", num(r.cooccurrence.rate)}, {"hits", hits}};
  if (r.planted_text_fraction) {
    rep["planted_check"] = {{"head", to_string(*r.scenario.planted)},
                            {"text_fraction", num(*r.planted_text_fraction)},
                            {"tau_text", num(cfg.scenario.tau_text)},
                            {"holds", *r.planted_text_fraction > cfg.scenario.tau_text}};
  }
  files["report.json"] = dump(rep);

  // Attention dumps and heatmaps from the first example's last step.
  const DecodeTrace& first = r.traces.front();
  const std::span<const Modality> labels(first.final_sequence.modality.data(),
                                         first.final_sequence.length() - 1);
  const std::size_t layer = cfg.analysis_layer();
  files["attention_mean_l" + std::to_string(layer) + ".csv"] = matrix_to_csv(r.examples.front().aggregate, labels);
  for (const HeadId& h : heatmap_heads(cfg, r.scenario)) {
    const Matrix& a = first.steps.back().attention[model.flat_index(h)].weights;
    files[head_file_name("attention", h, ".csv")] = matrix_to_csv(a, labels);
    files[head_file_name("heatmap", h, ".svg")] = heatmap_svg(a, labels, "layer " + std::to_string(h.layer) +
                                                                            " head " + std::to_string(h.head));
  }
  return files;
}

// ---------------------------------------------------------------------------
// attribute

AttributeResult attribute(const RunConfig& cfg) {
  cfg.validate();
  const std::size_t heads = cfg.model.layers * cfg.model.heads;
  AIRLENS_REQUIRE(cfg.attribution.k <= heads, ErrorKind::precondition, "attribution.k = ", cfg.attribution.k,
                  " exceeds the ", heads, " heads of the model");
  AttributeResult r{scenario_for(cfg), {}, {}, {}, {}, std::nullopt};
  const TinyModel& model = r.scenario.model;
  for (std::size_t e = 0; e < cfg.attribution.traces; ++e) {
    const PromptSpec ps = prompt_for(cfg, kAttributeStream, e);
    DecodeTrace trace = generate_tokens(model, r.scenario.prompt(ps), cfg.prompt.max_new_tokens);
    TokenLabels labels = r.scenario.labels(trace, derive_seed(ps.seed, kLabelStream));
    r.data.push_back({std::move(trace), std::move(labels)});
  }
  const PooledDeltas pool = pool_deltas(model, r.data);
  r.effects = effects_from_pool(pool, pool.hallucinated);
  r.ranking = rank_heads(r.effects, cfg.attribution.k, cfg.attribution.selector);
  r.null = permutation_null(pool, cfg.attribution.permutations, derive_seed(cfg.seed, kPermutationStream),
                            cfg.attribution.null_quantile);
  if (r.scenario.planted) {
    const HeadId p = *r.scenario.planted;
    const auto it = std::find_if(r.effects.begin(), r.effects.end(), [&](const HeadEffect& e) { return e.head == p; });
    if (it != r.effects.end() && !it->degenerate) {
      std::size_t rank = 1;
      for (const HeadEffect& e : r.effects)
        if (!e.degenerate && (e.effect_size > it->effect_size || (e.effect_size == it->effect_size && e.head < p)))
          ++rank;
      r.planted_rank = rank;
    }
  }
  return r;
}

namespace {

Json effect_json(const HeadEffect& e) {
  return {{"head", to_string(e.head)},
          {"layer", e.head.layer},
          {"index", e.head.head},
          {"effect_size", num(e.effect_size)},
          {"sensitivity", num(e.sensitivity)},
          {"mean_hallucinated", num(e.mean_hallucinated)},
          {"mean_non_hallucinated", num(e.mean_non_hallucinated)},
          {"var_hallucinated", num(e.var_hallucinated)},
          {"var_non_hallucinated", num(e.var_non_hallucinated)},
          {"n_hallucinated", e.n_hallucinated},
          {"n_non_hallucinated", e.n_non_hallucinated},
          {"degenerate", e.degenerate}};
}

std::string heads_text(const char* header, std::span<const HeadEffect> heads) {
  std::string out = std::string("# ") + header + "\n";
  for (const HeadEffect& e : heads) out += to_string(e.head) + "\n";
  return out;
}

}  // namespace

Artifacts attribute_artifacts(const RunConfig& cfg, const AttributeResult& r, const RunOptions& opt) {
  Artifacts files;
  files["config.txt"] = provenance(cfg);
  if (opt.format == TableFormat::csv) {
    std::string csv =
        "layer,head,effect_size,sensitivity,mean_hallucinated,mean_non_hallucinated,var_hallucinated,"
        "var_non_hallucinated,n_hallucinated,n_non_hallucinated,degenerate\n";
    for (const HeadEffect& e : r.effects)
      csv += csv_row({str(e.head.layer), str(e.head.head), str(e.effect_size), str(e.sensitivity),
                      str(e.mean_hallucinated), str(e.mean_non_hallucinated), str(e.var_hallucinated),
                      str(e.var_non_hallucinated), str(e.n_hallucinated), str(e.n_non_hallucinated),
                      str(e.degenerate)});
    files["head_effects.csv"] = csv;
  } else {
    Json doc;
    doc["schema_version"] = kSchemaVersion;
    Json rows = Json::array();
    for (const HeadEffect& e : r.effects) rows.push_back(effect_json(e));
    doc["rows"] = std::move(rows);
    files["head_effects.json"] = dump(doc);
  }

  std::string grid;
  for (std::size_t l = 0; l < cfg.model.layers; ++l) {
    for (std::size_t h = 0; h < cfg.model.heads; ++h) {
      if (h) grid += ',';
      grid += format_number(r.effects[l * cfg.model.heads + h].effect_size);
    }
    grid += '\n';
  }
  files["effect_grid.csv"] = grid;
  files["sensitive_heads.txt"] = heads_text("top-k by effect size", r.ranking.sensitive);
  files["insensitive_heads.txt"] = heads_text("insensitive selection", r.ranking.insensitive);

  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "attribution_report";
  doc["scenario"] = scenario_json(r.scenario);
  doc["k"] = cfg.attribution.k;
  doc["traces"] = r.data.size();
  std::size_t nh = 0, nn = 0;
  for (const LabeledTrace& d : r.data) {
    nh += d.labels.hallucinated.size();
    nn += d.labels.non_hallucinated.size();
  }
  doc["hallucinated_tokens"] = nh;
  doc["non_hallucinated_tokens"] = nn;
  Json sens = Json::array(), insens = Json::array(), excl = Json::array();
  for (const HeadEffect& e : r.ranking.sensitive) sens.push_back({{"head", to_string(e.head)}, {"effect_size", num(e.effect_size)}});
  for (const HeadEffect& e : r.ranking.insensitive) insens.push_back({{"head", to_string(e.head)}, {"effect_size", num(e.effect_size)}});
  for (const HeadEffect& e : r.ranking.excluded) excl.push_back(to_string(e.head));
  doc["sensitive"] = std::move(sens);
  doc["insensitive"] = std::move(insens);
  doc["excluded_degenerate"] = std::move(excl);
  doc["average"] = {{"effect_size", num(r.ranking.average.mean_effect_size)},
                    {"sensitivity", num(r.ranking.average.mean_sensitivity)},
                    {"mean_delta_hallucinated", num(r.ranking.average.mean_delta_hallucinated)},
                    {"mean_delta_non_hallucinated", num(r.ranking.average.mean_delta_non_hallucinated)}};
  doc["planted_rank"] = r.planted_rank ? Json(*r.planted_rank) : Json(nullptr);
  doc["permutation_null"] = {{"permutations", r.null.max_abs_effect.size()},
                             {"quantile", num(r.null.quantile)},
                             {"threshold", num(r.null.threshold)},
                             {"observed_max_abs_effect", num(r.null.observed_max)},
                             {"observed_head", to_string(r.null.observed_head)},
                             {"exceeded", r.null.exceeded()},
                             {"max_abs_effect", num_array(r.null.max_abs_effect)}};
  files["attribution.json"] = dump(doc);
  return files;
}

// ---------------------------------------------------------------------------
// rectify

RectifyResult rectify(const RunConfig& cfg, const RunOptions& opt) {
  cfg.validate();
  RectifyResult r;
  r.scenario = scenario_for(cfg);
  if (opt.heads) {
    r.heads = *opt.heads;
    r.heads_source = "heads-file";
  } else if (!cfg.air.sensitive_heads.empty()) {
    r.heads.assign(cfg.air.sensitive_heads.begin(), cfg.air.sensitive_heads.end());
    r.heads_source = "config";
  } else if (r.scenario.planted) {
    r.heads = {*r.scenario.planted};
    r.heads_source = "planted";
  } else {
    detail::raise(ErrorKind::precondition,
                  "no sensitive set: pass --heads, set air.heads, or use a planted scenario");
  }
  std::sort(r.heads.begin(), r.heads.end());
  r.heads.erase(std::unique(r.heads.begin(), r.heads.end()), r.heads.end());
  const TinyModel& model = r.scenario.model;
  AirConfig air = cfg.air;
  air.sensitive_heads = std::set<HeadId>(r.heads.begin(), r.heads.end());
  air.validate(&model);

  const std::size_t layer = cfg.analysis_layer();
  std::vector<ExampleImbalance> before, after;
  for (std::size_t p = 0; p < cfg.rectify.prompts; ++p) {
    const TokenSequence prompt = r.scenario.prompt(prompt_for(cfg, kRectifyStream, p));
    RectifyPair pair;
    pair.baseline = generate_tokens(model, prompt, cfg.prompt.max_new_tokens);
    pair.air = decode_with_air(model, prompt, air, cfg.prompt.max_new_tokens);
    for (const HeadId& h : r.heads) {
      const HeadId one[] = {h};
      pair.head_mai_before.push_back(mean_text_visual_mai(pair.baseline, one, cfg.model.heads));
      pair.head_mai_after.push_back(mean_text_visual_mai(pair.air.trace, one, cfg.model.heads));
    }
    if (!r.heads.empty()) {
      pair.mai_before = mean_text_visual_mai(pair.baseline, r.heads, cfg.model.heads);
      pair.mai_after = mean_text_visual_mai(pair.air.trace, r.heads, cfg.model.heads);
      r.mai_decreased += *pair.mai_after < *pair.mai_before;
    }
    r.identical_traces += pair.baseline.tokens() == pair.air.trace.tokens();
    pair.designated_before = count_token(pair.baseline, r.scenario.spec.designated_token);
    pair.designated_after = count_token(pair.air.trace, r.scenario.spec.designated_token);
    before.push_back(analyze_example(model, pair.baseline, layer));
    after.push_back(analyze_example(model, pair.air.trace, layer));
    r.pairs.push_back(std::move(pair));
  }
  // One threshold, set on the baseline runs, for both sides.
  r.tau = flag_examples(before);
  apply_tau(after, r.tau);
  for (std::size_t p = 0; p < r.pairs.size(); ++p) {
    r.pairs[p].flagged_before = before[p].flagged_steps.size();
    r.pairs[p].flagged_after = after[p].flagged_steps.size();
  }
  return r;
}

Artifacts rectify_artifacts(const RunConfig& cfg, const RectifyResult& r, const RunOptions& opt) {
  Artifacts files;
  files["config.txt"] = provenance(cfg);
  std::string csv = "prompt,step,layer,head,pre_fraction,post_fraction,triggered\n";
  Json rows = Json::array();
  std::size_t triggered = 0, records = 0, lowered = 0;
  for (std::size_t p = 0; p < r.pairs.size(); ++p)
    for (const TriggerRecord& t : r.pairs[p].air.triggers) {
      ++records;
      if (t.applied) {
        ++triggered;
        lowered += t.post_fraction < t.pre_fraction;
      }
      csv += csv_row({str(p), str(t.step), str(t.head.layer), str(t.head.head), str(t.pre_fraction),
                      str(t.post_fraction), str(t.applied)});
      rows.push_back({{"prompt", p}, {"step", t.step}, {"head", to_string(t.head)},
                      {"pre_fraction", num(t.pre_fraction)}, {"post_fraction", num(t.post_fraction)},
                      {"triggered", t.applied}});
    }
  if (opt.format == TableFormat::csv) {
    files["triggers.csv"] = csv;
  } else {
    Json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["rows"] = std::move(rows);
    files["triggers.json"] = dump(doc);
  }

  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "rectify_report";
  doc["scenario"] = scenario_json(r.scenario);
  doc["sensitive_heads"] = heads_json(r.heads);
  doc["sensitive_source"] = r.heads_source;
  doc["air"] = {{"tau_text", num(cfg.air.tau_text)}, {"lambda", num(cfg.air.lambda)},
                {"gamma", num(cfg.air.gamma)},       {"xi", num(cfg.air.xi)},
                {"beta", num(cfg.air.beta)},         {"epsilon", num(cfg.air.epsilon)}};
  doc["prompts"] = r.pairs.size();
  doc["tau"] = num(r.tau);

  Json per_head = Json::array();
  for (std::size_t k = 0; k < r.heads.size(); ++k) {
    double b = 0.0, a = 0.0;
    for (const RectifyPair& p : r.pairs) {
      b += p.head_mai_before[k];
      a += p.head_mai_after[k];
    }
    const double n = static_cast<double>(r.pairs.size());
    per_head.push_back({{"head", to_string(r.heads[k])}, {"mai_before", num(b / n)}, {"mai_after", num(a / n)}});
  }
  doc["per_head_mai"] = std::move(per_head);

  Json pairs = Json::array();
  std::size_t fb = 0, fa = 0, db = 0, da = 0;
  for (const RectifyPair& p : r.pairs) {
    fb += p.flagged_before;
    fa += p.flagged_after;
    db += p.designated_before;
    da += p.designated_after;
    pairs.push_back({{"mai_before", opt_num(p.mai_before)},
                     {"mai_after", opt_num(p.mai_after)},
                     {"flagged_before", p.flagged_before},
                     {"flagged_after", p.flagged_after},
                     {"designated_before", p.designated_before},
                     {"designated_after", p.designated_after},
                     {"tokens_before", p.baseline.tokens()},
                     {"tokens_after", p.air.trace.tokens()}});
  }
  doc["summary"] = {{"mai_decreased", r.mai_decreased},
                    {"identical_traces", r.identical_traces},
                    {"flagged_before", fb},
                    {"flagged_after", fa},
                    {"designated_token", r.scenario.spec.designated_token},
                    {"designated_before", db},
                    {"designated_after", da},
                    {"trigger_records", records},
                    {"triggered", triggered},
                    {"triggered_with_lower_fraction", lowered}};
  Json rescales = Json::array();
  if (!r.pairs.empty())
    for (const RescaleRecord& s : r.pairs.front().air.rescales)
      rescales.push_back({{"head", to_string(s.head)}, {"scale", num(s.scale)}, {"log_value", num(s.log_value)},
                          {"guard_engaged", s.guard_engaged}, {"nonpositive_argument", s.nonpositive_argument}});
  doc["wqk_rescale"] = std::move(rescales);
  doc["pairs"] = std::move(pairs);
  files["rectify.json"] = dump(doc);
  return files;
}

// ---------------------------------------------------------------------------
// theory

bool TheoryReport::all_agree() const {
  return std::all_of(checks.begin(), checks.end(), [](const TheoryResult& c) { return c.agree; });
}

std::vector<WalkSpec> theory_specs(const RunConfig& cfg) {
  const TheorySettings& t = cfg.theory;
  std::vector<WalkSpec> out;
  for (std::size_t k = 0; k < t.specs; ++k) {
    const double c = t.trace_c[k % t.trace_c.size()];
    out.push_back(random_walk_spec(t.d, t.T, derive_seed(derive_seed(cfg.seed, kTheoryStream), 100 + k),
                                   c * std::sqrt(static_cast<double>(t.d)), t.spread));
  }
  return out;
}

namespace {

std::string indexed(const char* name, std::size_t k) { return std::string(name) + "[" + std::to_string(k) + "]"; }

Matrix random_symmetric(Rng& rng, Eigen::Index d) {
  Matrix g(d, d);
  rng.fill_normal(g);
  return 0.5 * (g + g.transpose());
}

Matrix random_psd(Rng& rng, Eigen::Index d) {
  Matrix g(d, d);
  rng.fill_normal(g);
  return g * g.transpose() / static_cast<double>(d) + 0.1 * Matrix::Identity(d, d);
}

}  // namespace

TheoryReport theory(const RunConfig& cfg) {
  cfg.validate();
  const TheorySettings& t = cfg.theory;
  const std::uint64_t base = derive_seed(cfg.seed, kTheoryStream);
  TheoryReport r;
  const auto add = [&](std::string name, double analytic, double estimate, double se, std::size_t n,
                       double allowance) {
    r.checks.push_back(compare(std::move(name), analytic, estimate, se, n, allowance, t.z));
  };

  // Gaussian quadratic-form moments.
  Rng rng(derive_seed(base, 1));
  const auto md = static_cast<Eigen::Index>(t.moment_d);
  for (std::size_t k = 0; k < t.moment_instances; ++k) {
    const Matrix w = random_symmetric(rng, md);
    const Matrix sigma = random_psd(rng, md);
    Vector mu(md), a(md), probe(md);
    rng.fill_normal(mu, 0.5);
    rng.fill_normal(a);
    rng.fill_normal(probe);
    const QuadraticMoments m = gaussian_quadratic_moments(w, sigma, mu, a);
    const QuadraticMomentsMC mc = mc_gaussian_quadratic(w, sigma, mu, a, probe, t.moment_samples, derive_seed(base, 200 + k));
    add(indexed("gaussian.quadratic", k), m.quadratic, mc.quadratic.mean(), mc.quadratic.se_mean(), t.moment_samples, 0.0);
    add(indexed("gaussian.second_moment", k), probe.dot(m.second_moment * probe), mc.probe.mean(), mc.probe.se_mean(),
        t.moment_samples, 0.0);
    add(indexed("gaussian.cubic", k), m.cubic, mc.cubic.mean(), mc.cubic.se_mean(), t.moment_samples, 0.0);
    add(indexed("gaussian.quartic", k), m.quartic, mc.quartic.mean(), mc.quartic.se_mean(), t.moment_samples, 0.0);
  }

  // Walk moments, x_1 = 0.
  for (std::size_t k = 0; k < t.specs; ++k) {
    const Matrix w = random_symmetric(rng, md);
    const Matrix sigma = random_psd(rng, md);
    const std::size_t i = 1 + rng.index(t.walk_max_step);
    const std::size_t j = i + rng.index(t.walk_max_step - i + 1);
    const WalkMoments m = walk_quadratic_moments(w, sigma, i, j);
    const WalkMomentsMC mc = mc_walk_moments(w, sigma, i, j, t.walk_samples, derive_seed(base, 300 + k));
    const std::string tag = "[" + std::to_string(k) + "](i=" + std::to_string(i) + ",j=" + std::to_string(j) + ")";
    add("walk.quadratic" + tag, m.quadratic, mc.quadratic.mean(), mc.quadratic.se_mean(), t.walk_samples, 0.0);
    add("walk.quartic_same" + tag, m.quartic_same, mc.quartic_same.mean(), mc.quartic_same.se_mean(), t.walk_samples, 0.0);
    add("walk.quartic_cross" + tag, m.quartic_cross, mc.quartic_cross.mean(), mc.quartic_cross.se_mean(), t.walk_samples, 0.0);
    add("walk.mixed" + tag, m.mixed, mc.mixed.mean(), mc.mixed.se_mean(), t.walk_samples, 0.0);
  }

  // Propagation statistic: leading-order terms, exact moments, rho.
  static constexpr double kThetas[] = {0.25, 0.5, 0.75, 0.375, 0.625};
  r.specs = theory_specs(cfg);
  for (std::size_t k = 0; k < r.specs.size(); ++k) {
    const WalkSpec& s = r.specs[k];
    const std::size_t i = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(kThetas[k % 5] * static_cast<double>(t.T))), 1, t.T);
    const std::string tag = "[" + std::to_string(k) + "](i=" + std::to_string(i) + ")";
    const std::size_t n = t.propagation_samples;
    const PropagationMC mc = mc_propagation(s, i, n, derive_seed(base, 400 + k));
    const MeanVariance pub = lemma2_mu_v(s, i);
    const MeanVariance exact = propagation_moments_exact(s, i);
    add("propagation.mean.leading" + tag, pub.mean, mc.value.mean(), mc.value.se_mean(), n, t.allowance);
    add("propagation.variance.leading" + tag, pub.variance, mc.value.variance(), mc.value.se_variance(), n, t.allowance);
    add("propagation.mean.exact" + tag, exact.mean, mc.value.mean(), mc.value.se_mean(), n, 0.0);
    add("propagation.variance.exact" + tag, exact.variance, mc.value.variance(), mc.value.se_variance(), n, 0.0);
    TheoryResult rho = monte_carlo_rho(s, i, n, derive_seed(base, 500 + k), t.rho_allowance);
    rho.check = "rho.leading" + tag;
    r.checks.push_back(rho);
    add("rho.exact_moments" + tag, rho_index(exact.mean, exact.variance), mc.rho(), mc.rho_se(), n, t.rho_allowance);
    r.regimes.push_back({indexed("propagation", k), classify_regime(s)});
  }
  r.regimes.push_back({"zero-trace", classify_regime(random_walk_spec(t.d, t.T, derive_seed(base, 600), 0.0, t.spread))});

  // Localized peak against theta*.
  for (std::size_t k = 0; k < t.specs; ++k) {
    const double c = t.trace_c[k % t.trace_c.size()];
    const double dd = static_cast<double>(t.peak_d);
    const WalkSpec s = random_walk_spec(t.peak_d, t.T, derive_seed(base, 700 + k), c * std::sqrt(dd), t.spread);
    add("peak[" + std::to_string(k) + "](c=" + format_number(c) + ")", peak_theta(s.trace_w(), t.peak_d),
        numeric_peak(s), 0.0, 0, 0.02);
  }

  // rho(theta) sweep per propagation spec.
  r.sweep = Matrix(static_cast<Eigen::Index>(t.sweep_points), static_cast<Eigen::Index>(1 + r.specs.size()));
  for (std::size_t k = 0; k < r.specs.size(); ++k) {
    const auto pts = rho_sweep(r.specs[k], t.sweep_points);
    for (std::size_t p = 0; p < pts.size(); ++p) {
      r.sweep(static_cast<Eigen::Index>(p), 0) = pts[p].theta;
      r.sweep(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k + 1)) = pts[p].rho;
    }
  }
  return r;
}

Artifacts theory_artifacts(const RunConfig& cfg, const TheoryReport& r, const RunOptions& opt) {
  Artifacts files;
  files["config.txt"] = provenance(cfg);
  Json rows = Json::array();
  std::string csv = "check,analytic,estimate,standard_error,samples,z,allowance,agree\n";
  for (const TheoryResult& c : r.checks) {
    csv += csv_row({c.check, str(c.analytic), str(c.estimate), str(c.standard_error), str(c.samples), str(c.z),
                    str(c.allowance), str(c.agree)});
    rows.push_back({{"check", c.check}, {"analytic", num(c.analytic)}, {"estimate", num(c.estimate)},
                    {"standard_error", num(c.standard_error)}, {"samples", c.samples}, {"z", num(c.z)},
                    {"allowance", num(c.allowance)}, {"agree", c.agree}});
  }
  if (opt.format == TableFormat::csv) {
    files["theory_checks.csv"] = csv;
  } else {
    Json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["rows"] = rows;
    files["theory_checks.json"] = dump(doc);
  }

  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "theory_report";
  doc["all_agree"] = r.all_agree();
  Json failed = Json::array();
  for (const TheoryResult& c : r.checks)
    if (!c.agree) failed.push_back(c.check);
  doc["disagreeing_checks"] = std::move(failed);
  Json specs = Json::array();
  for (const WalkSpec& s : r.specs)
    specs.push_back({{"d", s.d}, {"T", s.T}, {"trace_w", num(s.trace_w())}, {"trace_w2", num(s.trace_w2())}});
  doc["propagation_specs"] = std::move(specs);
  Json regimes = Json::array();
  for (const RegimeRow& g : r.regimes)
    regimes.push_back({{"spec", g.spec},
                       {"regime", std::string(to_string(g.report.regime))},
                       {"trace_w", num(g.report.trace_w)},
                       {"trace_w2", num(g.report.trace_w2)},
                       {"theta_star", num(g.report.theta_star)}});
  doc["regimes"] = std::move(regimes);
  doc["checks"] = std::move(rows);
  files["theory.json"] = dump(doc);

  std::string sweep = "theta";
  for (std::size_t k = 0; k < r.specs.size(); ++k) sweep += ",rho_" + std::to_string(k);
  sweep += '\n';
  for (Eigen::Index p = 0; p < r.sweep.rows(); ++p) {
    for (Eigen::Index c = 0; c < r.sweep.cols(); ++c) {
      if (c) sweep += ',';
      sweep += format_number(r.sweep(p, c));
    }
    sweep += '\n';
  }
  files["rho_sweep.csv"] = sweep;
  return files;
}

// ---------------------------------------------------------------------------

std::vector<std::string> run_simulate(const RunConfig& cfg, const RunOptions& opt) {
  ensure_writable_dir(cfg.output_dir);
  return write_artifacts(cfg.output_dir, simulate_artifacts(cfg, simulate(cfg), opt));
}

std::vector<std::string> run_attribute(const RunConfig& cfg, const RunOptions& opt) {
  ensure_writable_dir(cfg.output_dir);
  return write_artifacts(cfg.output_dir, attribute_artifacts(cfg, attribute(cfg), opt));
}

std::vector<std::string> run_rectify(const RunConfig& cfg, const RunOptions& opt) {
  ensure_writable_dir(cfg.output_dir);
  return write_artifacts(cfg.output_dir, rectify_artifacts(cfg, rectify(cfg, opt), opt));
}

std::vector<std::string> run_theory(const RunConfig& cfg, const RunOptions& opt) {
  ensure_writable_dir(cfg.output_dir);
  return write_artifacts(cfg.output_dir, theory_artifacts(cfg, theory(cfg), opt));
}

void run_heatmap(const std::filesystem::path& matrix_csv, const std::filesystem::path& svg_out,
                 std::string_view title) {
  const std::string text = read_file(matrix_csv);
  std::vector<Modality> labels;
  const Matrix m = matrix_from_csv(text, &labels);
  const std::string svg = heatmap_svg(m, labels, title);
  if (svg_out.has_parent_path()) ensure_writable_dir(svg_out.parent_path());
  write_file_atomic(svg_out, svg);
}

}  // namespace airlens
