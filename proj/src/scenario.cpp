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

#include "airlens/scenario.hpp"

#include "airlens/air.hpp"
#include "airlens/error.hpp"
#include "airlens/random.hpp"

#include <algorithm>
#include <cmath>

namespace airlens {

std::string_view to_string(ScenarioKind k) noexcept {
  switch (k) {
    case ScenarioKind::planted_text_bias:
      return "planted-text-bias";
    case ScenarioKind::planted_hallucination:
      return "planted-hallucination-head";
    case ScenarioKind::random:
      break;
  }
  return "random";
}

ScenarioKind scenario_kind_from_string(std::string_view s) {
  if (s == "random") return ScenarioKind::random;
  if (s == "planted-text-bias") return ScenarioKind::planted_text_bias;
  if (s == "planted-hallucination-head") return ScenarioKind::planted_hallucination;
  detail::raise(ErrorKind::config, "unknown scenario '", s,
                "' (expected random, planted-text-bias or planted-hallucination-head)");
}

namespace {

constexpr std::uint64_t kPlantStream = 0x706c616e74ULL;

Vector random_unit(Rng& rng, Eigen::Index d) {
  Vector v(d);
  rng.fill_normal(v);
  return v.normalized();
}

void plant_text_bias(Scenario& s, const PromptSpec& reference) {
  TinyModel& m = s.model;
  const auto d = static_cast<Eigen::Index>(m.dim());
  Rng rng(derive_seed(m.params.seed, kPlantStream));
  // Text tokens share a common offset, so the mean text embedding has a
  // clear direction that visual tokens lack.
  const Vector offset = 2.0 * random_unit(rng, d);
  m.embedding_table.rowwise() += offset.transpose();
  const Vector dir = m.embedding_table.colwise().mean().transpose().normalized();
  const Matrix base = m.head(s.spec.target).w_qk;
  const Matrix boost = dir * dir.transpose();

  std::vector<double> sweep;
  if (s.spec.strength > 0.0)
    sweep.push_back(s.spec.strength);
  else
    for (double v = 1.0; v <= 64.0; v *= 2.0) sweep.push_back(v);

  const TokenSequence prompt = make_prompt(m, reference);
  const std::size_t k = m.flat_index(s.spec.target);
  for (double strength : sweep) {
    m.head(s.spec.target).w_qk = base + strength * boost;
    const ForwardResult r = forward_decode_step(m, prompt);
    const double f = text_attention_fraction(r.attention[k].weights, prompt.modality).fraction;
    s.strength = strength;
    s.baseline_text_fraction = f;
    if (f > s.spec.tau_text) return;
  }
  detail::raise(ErrorKind::precondition, "text-bias plant on head ", to_string(s.spec.target),
                " reached text fraction ", s.baseline_text_fraction, ", not above tau_text = ",
                s.spec.tau_text);
}

void plant_hallucination(Scenario& s) {
  TinyModel& m = s.model;
  const auto d = static_cast<Eigen::Index>(m.dim());
  const auto dh = static_cast<Eigen::Index>(m.head_dim());
  const auto vocab = static_cast<std::int64_t>(m.vocab());
  const ScenarioSpec& spec = s.spec;
  AIRLENS_REQUIRE(spec.designated_token >= 0 && spec.designated_token < vocab &&
                      spec.trigger_token >= 0 && spec.trigger_token < vocab &&
                      spec.designated_token != spec.trigger_token,
                  ErrorKind::config, "designated and trigger tokens must be distinct vocabulary ids");
  AIRLENS_REQUIRE(vocab >= 4, ErrorKind::config, "hallucination scenario needs a vocabulary of at least 4");
  Rng rng(derive_seed(m.params.seed, kPlantStream + 1));

  // Cue tokens: a seeded subset of the vocabulary, never the designated or
  // trigger token.
  std::vector<std::int64_t> pool;
  for (std::int64_t t = 0; t < vocab; ++t)
    if (t != spec.designated_token && t != spec.trigger_token) pool.push_back(t);
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.index(i)]);
  const auto n_cue = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(spec.cue_fraction * static_cast<double>(vocab))));
  s.cue_tokens.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(n_cue, pool.size())));
  std::sort(s.cue_tokens.begin(), s.cue_tokens.end());

  // q, k and r span a subspace reserved for the plant. It sits inside the
  // planted head's output slice and is orthogonal to the all-ones vector, so
  // layer norm only rescales it. Every other weight is projected off it, which
  // leaves the planted head as the only path that moves it between positions.
  AIRLENS_REQUIRE(dh >= 4, ErrorKind::config,
                  "hallucination scenario needs a head dimension of at least 4");
  const Eigen::Index row0 = static_cast<Eigen::Index>(spec.target.head) * dh;
  std::vector<Vector> basis;
  for (int i = 0; i < 3; ++i) {
    Vector seg(dh);
    rng.fill_normal(seg);
    seg.array() -= seg.mean();
    Vector v = Vector::Zero(d);
    v.segment(row0, dh) = seg;
    for (const Vector& b : basis) v -= v.dot(b) * b;
    basis.push_back(v.normalized());
  }
  const Vector& q = basis[0];
  const Vector& k = basis[1];
  const Vector& r = basis[2];
  Matrix reserved(d, 3);
  reserved << q, k, r;
  s.reserved_projection = Matrix::Identity(d, d) - reserved * reserved.transpose();
  const Matrix& pi = s.reserved_projection;

  const double kappa = 3.0;
  const double strength = spec.strength > 0.0 ? spec.strength : 4.0;
  s.strength = strength;
  m.embedding_table = m.embedding_table * pi;
  m.embedding_table.row(spec.trigger_token) += kappa * k.transpose();
  for (std::int64_t c : s.cue_tokens) m.embedding_table.row(c) += kappa * q.transpose();
  for (LayerWeights& layer : m.layers) {
    for (HeadWeights& h : layer.heads) {
      h.w_qk = pi * h.w_qk * pi;
      h.w_v = pi * h.w_v * pi;
    }
    layer.w_f1 = layer.w_f1 * pi;
    layer.w_f2 = pi * layer.w_f2;
  }
  m.readout = pi * m.readout;

  // Attention on the trigger is all or nothing at this strength, and the
  // designated logit reads only what the head writes: zero when it does not
  // fire, well above the rest when it does.
  HeadWeights& h = m.head(spec.target);
  h.w_qk = strength * std::sqrt(static_cast<double>(d)) * q * k.transpose();
  h.w_v = strength * r * k.transpose();
  m.readout.col(spec.designated_token) = strength * r;
}

}  // namespace

Scenario build_scenario(const ModelParams& params, const ScenarioSpec& spec,
                        const PromptSpec& reference_prompt) {
  Scenario s;
  s.spec = spec;
  s.model = build_model(params);
  if (spec.kind == ScenarioKind::random) return s;
  AIRLENS_REQUIRE(s.model.valid_head(spec.target), ErrorKind::config, "planted head ",
                  to_string(spec.target), " does not exist in the model");
  s.planted = spec.target;
  if (spec.kind == ScenarioKind::planted_text_bias)
    plant_text_bias(s, reference_prompt);
  else
    plant_hallucination(s);
  s.model.validate();
  return s;
}

TokenSequence Scenario::prompt(const PromptSpec& p) const {
  TokenSequence x = make_prompt(model, p);
  if (spec.kind != ScenarioKind::planted_hallucination || cue_tokens.empty()) return x;
  x.embeddings = reserved_projection * x.embeddings;
  const auto text = x.positions(Modality::text);
  AIRLENS_REQUIRE(text.size() >= 2, ErrorKind::precondition,
                  "hallucination prompts need at least two text positions");
  Rng rng(derive_seed(p.seed, kPlantStream + 2));
  const std::size_t trigger_at = text[rng.index(text.size() - 1)];
  const std::int64_t cue = cue_tokens[rng.index(cue_tokens.size())];
  const auto set = [&](std::size_t pos, std::int64_t token) {
    x.embeddings.col(static_cast<Eigen::Index>(pos)) = model.embedding(token);
    x.token_ids[pos] = token;
  };
  set(trigger_at, spec.trigger_token);
  set(text.back(), cue);
  return x;
}

TokenLabels Scenario::labels(const DecodeTrace& trace, std::uint64_t seed) const {
  TokenLabels out;
  if (spec.kind == ScenarioKind::planted_hallucination) {
    for (std::size_t st = 0; st < trace.steps.size(); ++st)
      (trace.steps[st].token == spec.designated_token ? out.hallucinated : out.non_hallucinated)
          .push_back(st);
    return out;
  }
  Rng rng(derive_seed(seed, kPlantStream + 3));
  for (std::size_t st = 0; st < trace.steps.size(); ++st)
    (rng.uniform() < spec.label_rate ? out.hallucinated : out.non_hallucinated).push_back(st);
  return out;
}

}  // namespace airlens
