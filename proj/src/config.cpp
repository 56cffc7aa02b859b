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

#include "airlens/config.hpp"
#include "airlens/error.hpp"
#include "airlens/io.hpp"

#include <charconv>
#include <functional>
#include <set>
#include <sstream>

namespace airlens {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_integer(std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  AIRLENS_REQUIRE(ec == std::errc{} && ptr == v.data() + v.size() && !v.empty(), ErrorKind::config,
                  "'", v, "' is not a non-negative integer");
  return out;
}

double parse_double(std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  AIRLENS_REQUIRE(ec == std::errc{} && ptr == v.data() + v.size() && !v.empty() && std::isfinite(out),
                  ErrorKind::config, "'", v, "' is not a finite number");
  return out;
}

bool parse_bool(std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  detail::raise(ErrorKind::config, "'", v, "' is not true or false");
}

template <class T, class F>
std::vector<T> parse_list(std::string_view v, F item) {
  std::vector<T> out;
  if (trim(v).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    out.push_back(item(trim(v.substr(start, comma == std::string_view::npos ? v.npos : comma - start))));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

HeadId parse_head(std::string_view v) {
  try {
    return parse_head_id(v);
  } catch (const Error& e) {
    detail::raise(ErrorKind::config, e.what());
  }
}

std::string fmt(double v) { return format_number(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(std::size_t v) { return std::to_string(v); }

std::string fmt_heads(const std::vector<HeadId>& heads) {
  std::string out;
  for (const HeadId& h : heads) out += (out.empty() ? "" : ",") + to_string(h);
  return out;
}

struct Field {
  std::string_view key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define AIRLENS_SIZE(k, member)                                                       \
  Field{k, [](RunConfig& c, std::string_view v) { c.member = parse_integer<std::size_t>(v); }, \
        [](const RunConfig& c) { return fmt(static_cast<std::size_t>(c.member)); }}
#define AIRLENS_DOUBLE(k, member)                                                          \
  Field{k, [](RunConfig& c, std::string_view v) { c.member = parse_double(v); },          \
        [](const RunConfig& c) { return fmt(c.member); }}
#define AIRLENS_BOOL(k, member)                                                            \
  Field{k, [](RunConfig& c, std::string_view v) { c.member = parse_bool(v); },            \
        [](const RunConfig& c) { return fmt(c.member); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      Field{"seed", [](RunConfig& c, std::string_view v) { c.seed = parse_integer<std::uint64_t>(v); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      AIRLENS_SIZE("model.d", model.d),
      AIRLENS_SIZE("model.layers", model.layers),
      AIRLENS_SIZE("model.heads", model.heads),
      AIRLENS_SIZE("model.vocab", model.vocab),
      AIRLENS_BOOL("model.layer_norm", model.layer_norm),
      Field{"model.activation",
            [](RunConfig& c, std::string_view v) {
              try {
                c.model.activation = activation_from_string(v);
              } catch (const Error& e) {
                detail::raise(ErrorKind::config, e.what());
              }
            },
            [](const RunConfig& c) { return std::string(to_string(c.model.activation)); }},
      AIRLENS_SIZE("model.max_sequence", max_sequence),
      AIRLENS_SIZE("prompt.text_before", prompt.text_before),
      AIRLENS_SIZE("prompt.visual", prompt.visual),
      AIRLENS_SIZE("prompt.text_after", prompt.text_after),
      AIRLENS_SIZE("prompt.max_new_tokens", prompt.max_new_tokens),
      AIRLENS_SIZE("prompt.examples", prompt.examples),
      AIRLENS_DOUBLE("air.tau_text", air.tau_text),
      AIRLENS_DOUBLE("air.lambda", air.lambda),
      AIRLENS_DOUBLE("air.gamma", air.gamma),
      AIRLENS_DOUBLE("air.xi", air.xi),
      AIRLENS_DOUBLE("air.beta", air.beta),
      AIRLENS_DOUBLE("air.epsilon", air.epsilon),
      AIRLENS_DOUBLE("air.wqk_log_guard", air.wqk_log_guard),
      AIRLENS_BOOL("air.renormalize_rows", air.renormalize_rows),
      AIRLENS_BOOL("air.additive_epsilon", air.additive_epsilon),
      Field{"air.heads",
            [](RunConfig& c, std::string_view v) {
              const auto heads = parse_list<HeadId>(v, parse_head);
              c.air.sensitive_heads = std::set<HeadId>(heads.begin(), heads.end());
            },
            [](const RunConfig& c) {
              return fmt_heads(std::vector<HeadId>(c.air.sensitive_heads.begin(), c.air.sensitive_heads.end()));
            }},
      AIRLENS_SIZE("attribution.k", attribution.k),
      Field{"attribution.selector",
            [](RunConfig& c, std::string_view v) {
              if (v == "smallest-magnitude")
                c.attribution.selector = InsensitiveSelector::smallest_magnitude;
              else if (v == "lowest-effect")
                c.attribution.selector = InsensitiveSelector::lowest_effect;
              else
                detail::raise(ErrorKind::config, "'", v, "' is not smallest-magnitude or lowest-effect");
            },
            [](const RunConfig& c) {
              return std::string(c.attribution.selector == InsensitiveSelector::smallest_magnitude
                                     ? "smallest-magnitude"
                                     : "lowest-effect");
            }},
      AIRLENS_DOUBLE("attribution.label_rate", attribution.label_rate),
      AIRLENS_SIZE("attribution.traces", attribution.traces),
      AIRLENS_SIZE("attribution.permutations", attribution.permutations),
      AIRLENS_DOUBLE("attribution.null_quantile", attribution.null_quantile),
      Field{"analysis.layer",
            [](RunConfig& c, std::string_view v) {
              if (v == "last")
                c.analysis.layer.reset();
              else
                c.analysis.layer = parse_integer<std::size_t>(v);
            },
            [](const RunConfig& c) { return c.analysis.layer ? fmt(*c.analysis.layer) : std::string("last"); }},
      Field{"analysis.heatmap_heads",
            [](RunConfig& c, std::string_view v) { c.analysis.heatmap_heads = parse_list<HeadId>(v, parse_head); },
            [](const RunConfig& c) { return fmt_heads(c.analysis.heatmap_heads); }},
      Field{"scenario.kind",
            [](RunConfig& c, std::string_view v) {
              try {
                c.scenario.kind = scenario_kind_from_string(v);
              } catch (const Error& e) {
                detail::raise(ErrorKind::config, e.what());
              }
            },
            [](const RunConfig& c) { return std::string(to_string(c.scenario.kind)); }},
      Field{"scenario.target", [](RunConfig& c, std::string_view v) { c.scenario.target = parse_head(v); },
            [](const RunConfig& c) { return to_string(c.scenario.target); }},
      AIRLENS_DOUBLE("scenario.strength", scenario.strength),
      Field{"scenario.designated_token",
            [](RunConfig& c, std::string_view v) {
              c.scenario.designated_token = static_cast<std::int64_t>(parse_integer<std::uint32_t>(v));
            },
            [](const RunConfig& c) { return std::to_string(c.scenario.designated_token); }},
      Field{"scenario.trigger_token",
            [](RunConfig& c, std::string_view v) {
              c.scenario.trigger_token = static_cast<std::int64_t>(parse_integer<std::uint32_t>(v));
            },
            [](const RunConfig& c) { return std::to_string(c.scenario.trigger_token); }},
      AIRLENS_DOUBLE("scenario.cue_fraction", scenario.cue_fraction),
      AIRLENS_DOUBLE("scenario.tau_text", scenario.tau_text),
      AIRLENS_SIZE("rectify.prompts", rectify.prompts),
      AIRLENS_SIZE("theory.d", theory.d),
      AIRLENS_SIZE("theory.T", theory.T),
      AIRLENS_SIZE("theory.specs", theory.specs),
      AIRLENS_DOUBLE("theory.spread", theory.spread),
      Field{"theory.trace_c",
            [](RunConfig& c, std::string_view v) { c.theory.trace_c = parse_list<double>(v, parse_double); },
            [](const RunConfig& c) {
              std::string out;
              for (double x : c.theory.trace_c) out += (out.empty() ? "" : ",") + fmt(x);
              return out;
            }},
      AIRLENS_SIZE("theory.moment_instances", theory.moment_instances),
      AIRLENS_SIZE("theory.moment_d", theory.moment_d),
      AIRLENS_SIZE("theory.moment_samples", theory.moment_samples),
      AIRLENS_SIZE("theory.walk_max_step", theory.walk_max_step),
      AIRLENS_SIZE("theory.walk_samples", theory.walk_samples),
      AIRLENS_SIZE("theory.propagation_samples", theory.propagation_samples),
      AIRLENS_SIZE("theory.peak_d", theory.peak_d),
      AIRLENS_SIZE("theory.sweep_points", theory.sweep_points),
      AIRLENS_DOUBLE("theory.z", theory.z),
      AIRLENS_DOUBLE("theory.allowance", theory.allowance),
      AIRLENS_DOUBLE("theory.rho_allowance", theory.rho_allowance),
      Field{"output.dir", [](RunConfig& c, std::string_view v) { c.output_dir = std::string(v); },
            [](const RunConfig& c) { return c.output_dir.string(); }},
  };
  return table;
}

#undef AIRLENS_SIZE
#undef AIRLENS_DOUBLE
#undef AIRLENS_BOOL

const Field* find_field(std::string_view key) {
  for (const Field& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

}  // namespace

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  const Field* f = find_field(key);
  AIRLENS_REQUIRE(f != nullptr, ErrorKind::config, "unknown key '", key, "'");
  try {
    f->set(cfg, trim(value));
  } catch (const Error& e) {
    detail::raise(ErrorKind::config, key, ": ", e.what());
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.emplace_back(f.key);
  return out;
}

void RunConfig::validate() const {
  const auto need = [](bool ok, const auto&... msg) {
    if (!ok) detail::raise(ErrorKind::config, msg...);
  };
  need(model.d >= 1 && model.layers >= 1 && model.heads >= 1, "model.d, model.layers and model.heads must be positive");
  need(model.d % model.heads == 0, "model.heads = ", model.heads, " does not divide model.d = ", model.d);
  need(model.vocab >= 2, "model.vocab must be at least 2");
  need(prompt.text_before + prompt.text_after >= 1, "prompts need at least one text token");
  need(prompt.max_new_tokens >= 1, "prompt.max_new_tokens must be positive");
  need(prompt.examples >= 1, "prompt.examples must be positive");
  need(prompt_length() + prompt.max_new_tokens <= max_sequence, "prompt of ", prompt_length(), " plus ",
       prompt.max_new_tokens, " new tokens exceeds model.max_sequence = ", max_sequence);
  air.validate(nullptr);
  for (const HeadId& h : air.sensitive_heads)
    need(h.layer < model.layers && h.head < model.heads, "air.heads lists ", to_string(h), ", not in the model");
  need(attribution.k >= 1, "attribution.k must be positive");
  need(attribution.label_rate > 0.0 && attribution.label_rate < 1.0, "attribution.label_rate must lie in (0, 1)");
  need(attribution.traces >= 1, "attribution.traces must be positive");
  need(attribution.permutations >= 1, "attribution.permutations must be positive");
  need(attribution.null_quantile > 0.0 && attribution.null_quantile < 1.0,
       "attribution.null_quantile must lie in (0, 1)");
  need(!analysis.layer || *analysis.layer < model.layers, "analysis.layer = ", analysis.layer.value_or(0),
       " but the model has ", model.layers, " layers");
  for (const HeadId& h : analysis.heatmap_heads)
    need(h.layer < model.layers && h.head < model.heads, "analysis.heatmap_heads lists ", to_string(h),
         ", not in the model");
  need(scenario.target.layer < model.layers && scenario.target.head < model.heads, "scenario.target ",
       to_string(scenario.target), " is not in the model");
  need(scenario.strength >= 0.0, "scenario.strength must be non-negative");
  need(scenario.designated_token < static_cast<std::int64_t>(model.vocab) &&
           scenario.trigger_token < static_cast<std::int64_t>(model.vocab),
       "scenario tokens must be vocabulary ids");
  need(scenario.cue_fraction > 0.0 && scenario.cue_fraction < 1.0, "scenario.cue_fraction must lie in (0, 1)");
  need(rectify.prompts >= 1, "rectify.prompts must be positive");
  need(theory.d >= 1 && theory.T >= 2 && theory.specs >= 1, "theory.d, theory.T and theory.specs must be positive (T >= 2)");
  need(theory.spread >= 0.0, "theory.spread must be non-negative");
  need(!theory.trace_c.empty(), "theory.trace_c must list at least one value");
  for (double c : theory.trace_c) need(c > 0.0, "theory.trace_c values must be positive");
  need(theory.moment_instances >= 1 && theory.moment_d >= 1, "theory.moment_instances and theory.moment_d must be positive");
  need(theory.moment_samples >= 2 && theory.walk_samples >= 2, "sample counts must be at least 2");
  need(theory.propagation_samples >= 1000, "theory.propagation_samples must be at least 1000");
  need(theory.walk_max_step >= 1, "theory.walk_max_step must be positive");
  need(theory.peak_d >= 1, "theory.peak_d must be positive");
  need(theory.sweep_points >= 2, "theory.sweep_points must be at least 2");
  need(theory.z > 0.0 && theory.allowance >= 0.0 && theory.rho_allowance >= 0.0,
       "theory.z must be positive and allowances non-negative");
  need(!output_dir.empty(), "output.dir must not be empty");
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::set<std::string, std::less<>> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    AIRLENS_REQUIRE(eq != std::string_view::npos, ErrorKind::config, "line ", line_no, ": expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    AIRLENS_REQUIRE(seen.insert(std::string(key)).second, ErrorKind::config, "line ", line_no, ": key '", key,
                    "' appears twice");
    try {
      set_config_value(cfg, key, line.substr(eq + 1));
    } catch (const Error& e) {
      detail::raise(ErrorKind::config, "line ", line_no, ": ", e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    detail::raise(ErrorKind::config, "cannot read config: ", e.what());
  }
  return parse_config(text);
}

std::string config_to_text(const RunConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(cfg);
    out += '\n';
  }
  return out;
}

}  // namespace airlens
