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

#include "airlens/attribution.hpp"

#include "airlens/error.hpp"
#include "airlens/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

namespace airlens {

void TokenLabels::validate(std::size_t steps) const {
  for (std::size_t s : hallucinated)
    AIRLENS_REQUIRE(s < steps, ErrorKind::invalid_argument, "hallucinated label at step ", s,
                    " but the trace has ", steps, " steps");
  for (std::size_t s : non_hallucinated) {
    AIRLENS_REQUIRE(s < steps, ErrorKind::invalid_argument, "non-hallucinated label at step ", s,
                    " but the trace has ", steps, " steps");
    AIRLENS_REQUIRE(std::find(hallucinated.begin(), hallucinated.end(), s) == hallucinated.end(),
                    ErrorKind::invalid_argument, "step ", s, " is labeled both ways");
  }
}

ForwardOptions erase_head(const TinyModel& model, const HeadId& head) {
  AIRLENS_REQUIRE(model.valid_head(head), ErrorKind::invalid_argument, "head ", to_string(head),
                  " is out of range for ", model.params.layers, " layers x ", model.params.heads,
                  " heads");
  ForwardOptions opt;
  opt.erased.push_back(head);
  return opt;
}

namespace {

// Teacher-forced input: the final sequence without its last token, whose
// column p-1 predicts the token at position p.
TokenSequence replay_input(const DecodeTrace& trace) {
  AIRLENS_REQUIRE(!trace.steps.empty(), ErrorKind::precondition, "trace has no generated tokens");
  AIRLENS_REQUIRE(trace.final_sequence.length() == trace.prompt.length() + trace.steps.size(),
                  ErrorKind::precondition, "trace length does not match its steps");
  return trace.final_sequence.prefix(trace.final_sequence.length() - 1);
}

std::vector<double> realised_probs(const Matrix& logits, const DecodeTrace& trace) {
  std::vector<double> out(trace.steps.size());
  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    const Vector p = probabilities_at(logits, trace.position_of_step(s) - 1);
    const auto y = trace.steps[s].token;
    AIRLENS_REQUIRE(y >= 0 && y < p.size(), ErrorKind::precondition, "step ", s, " token ", y,
                    " is outside the model vocabulary");
    out[s] = p[y];
  }
  return out;
}

std::vector<double> intact_probs(const TinyModel& model, const DecodeTrace& trace,
                                 const TokenSequence& input) {
  const ForwardResult r = forward_decode_step(model, input);
  std::vector<double> out = realised_probs(r.logits, trace);
  for (std::size_t s = 0; s < out.size(); ++s) {
    const auto y = trace.steps[s].token;
    AIRLENS_REQUIRE(trace.steps[s].probs.size() == r.logits.rows() &&
                        std::abs(trace.steps[s].probs[y] - out[s]) <= 1e-9,
                    ErrorKind::precondition, "trace step ", s,
                    " does not replay under this model (was it produced with an intervention?)");
  }
  return out;
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_variance(std::span<const double> v, double m) {
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size());
}

}  // namespace

std::vector<double> delta_prob_per_token(const TinyModel& model, const DecodeTrace& trace,
                                         const HeadId& head) {
  const ForwardOptions opt = erase_head(model, head);
  const TokenSequence input = replay_input(trace);
  const std::vector<double> intact = intact_probs(model, trace, input);
  const std::vector<double> erased = realised_probs(forward_decode_step(model, input, opt).logits, trace);
  std::vector<double> out(intact.size());
  for (std::size_t s = 0; s < out.size(); ++s) out[s] = intact[s] - erased[s];
  return out;
}

std::vector<std::vector<double>> delta_prob_all_heads(const TinyModel& model,
                                                      const DecodeTrace& trace) {
  const TokenSequence input = replay_input(trace);
  const std::vector<double> intact = intact_probs(model, trace, input);
  std::vector<std::vector<double>> out;
  out.reserve(model.head_count());
  for (const HeadId& id : model.all_heads()) {
    const std::vector<double> erased =
        realised_probs(forward_decode_step(model, input, erase_head(model, id)).logits, trace);
    std::vector<double> d(intact.size());
    for (std::size_t s = 0; s < d.size(); ++s) d[s] = intact[s] - erased[s];
    out.push_back(std::move(d));
  }
  return out;
}

HeadEffect effect_from_samples(const HeadId& head, std::span<const double> hallucinated,
                               std::span<const double> non_hallucinated) {
  AIRLENS_REQUIRE(!hallucinated.empty() && !non_hallucinated.empty(), ErrorKind::precondition,
                  "effect size needs hallucinated and non-hallucinated tokens (got ",
                  hallucinated.size(), " and ", non_hallucinated.size(), ")");
  HeadEffect e;
  e.head = head;
  e.n_hallucinated = hallucinated.size();
  e.n_non_hallucinated = non_hallucinated.size();
  e.mean_hallucinated = mean(hallucinated);
  e.mean_non_hallucinated = mean(non_hallucinated);
  e.var_hallucinated = population_variance(hallucinated, e.mean_hallucinated);
  e.var_non_hallucinated = population_variance(non_hallucinated, e.mean_non_hallucinated);
  e.sensitivity = e.mean_hallucinated - e.mean_non_hallucinated;
  const double denom = std::sqrt(e.var_hallucinated + e.var_non_hallucinated);
  if (denom > 0.0) {
    e.effect_size = e.sensitivity / denom;
  } else if (e.sensitivity == 0.0) {
    e.effect_size = 0.0;
  } else {
    e.degenerate = true;
    e.effect_size = std::copysign(std::numeric_limits<double>::infinity(), e.sensitivity);
  }
  return e;
}

HeadEffect sensitivity_and_effect(const HeadId& head, std::span<const double> deltas,
                                  const TokenLabels& labels) {
  labels.validate(deltas.size());
  std::vector<double> h, n;
  for (std::size_t s : labels.hallucinated) h.push_back(deltas[s]);
  for (std::size_t s : labels.non_hallucinated) n.push_back(deltas[s]);
  return effect_from_samples(head, h, n);
}

PooledDeltas pool_deltas(const TinyModel& model, std::span<const LabeledTrace> data) {
  AIRLENS_REQUIRE(!data.empty(), ErrorKind::precondition, "no labeled traces to attribute");
  PooledDeltas pool;
  pool.heads = model.all_heads();
  pool.deltas.resize(pool.heads.size());
  for (const LabeledTrace& item : data) {
    item.labels.validate(item.trace.steps.size());
    std::vector<int> state(item.trace.steps.size(), -1);
    for (std::size_t s : item.labels.hallucinated) state[s] = 1;
    for (std::size_t s : item.labels.non_hallucinated) state[s] = 0;
    const auto deltas = delta_prob_all_heads(model, item.trace);
    for (std::size_t s = 0; s < state.size(); ++s) {
      if (state[s] < 0) continue;  // unlabeled steps take no part
      pool.hallucinated.push_back(state[s] == 1);
      for (std::size_t k = 0; k < pool.heads.size(); ++k) pool.deltas[k].push_back(deltas[k][s]);
    }
  }
  return pool;
}

std::vector<HeadEffect> effects_from_pool(const PooledDeltas& pool, const std::vector<bool>& hallucinated) {
  std::vector<HeadEffect> out;
  out.reserve(pool.heads.size());
  std::vector<double> h, n;
  for (std::size_t k = 0; k < pool.heads.size(); ++k) {
    AIRLENS_REQUIRE(pool.deltas[k].size() == hallucinated.size(), ErrorKind::invalid_argument,
                    "label vector does not match the pooled deltas");
    h.clear();
    n.clear();
    for (std::size_t s = 0; s < hallucinated.size(); ++s)
      (hallucinated[s] ? h : n).push_back(pool.deltas[k][s]);
    out.push_back(effect_from_samples(pool.heads[k], h, n));
  }
  return out;
}

std::vector<HeadEffect> attribute_heads(const TinyModel& model, std::span<const LabeledTrace> data) {
  const PooledDeltas pool = pool_deltas(model, data);
  return effects_from_pool(pool, pool.hallucinated);
}

double empirical_quantile(std::vector<double> values, double q) {
  AIRLENS_REQUIRE(!values.empty(), ErrorKind::invalid_argument, "quantile of an empty sample");
  AIRLENS_REQUIRE(q >= 0.0 && q <= 1.0, ErrorKind::invalid_argument, "quantile ", q, " outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

std::pair<double, HeadId> max_abs_effect(std::span<const HeadEffect> effects) {
  std::pair<double, HeadId> best{0.0, HeadId{}};
  for (const HeadEffect& e : effects)
    if (!e.degenerate && std::abs(e.effect_size) > best.first) best = {std::abs(e.effect_size), e.head};
  return best;
}

}  // namespace

PermutationNull permutation_null(const PooledDeltas& pool, std::size_t permutations,
                                 std::uint64_t seed, double quantile) {
  AIRLENS_REQUIRE(permutations >= 1, ErrorKind::precondition, "need at least one permutation");
  PermutationNull out;
  out.quantile = quantile;
  std::tie(out.observed_max, out.observed_head) = max_abs_effect(effects_from_pool(pool, pool.hallucinated));
  Rng rng(seed);
  std::vector<bool> labels = pool.hallucinated;
  out.max_abs_effect.reserve(permutations);
  for (std::size_t p = 0; p < permutations; ++p) {
    for (std::size_t i = labels.size(); i > 1; --i) {
      const std::size_t j = rng.index(i);
      const bool tmp = labels[i - 1];
      labels[i - 1] = labels[j];
      labels[j] = tmp;
    }
    out.max_abs_effect.push_back(max_abs_effect(effects_from_pool(pool, labels)).first);
  }
  out.threshold = empirical_quantile(out.max_abs_effect, quantile);
  return out;
}

std::vector<HeadId> HeadRanking::sensitive_heads() const {
  std::vector<HeadId> out;
  for (const auto& e : sensitive) out.push_back(e.head);
  return out;
}

std::vector<HeadId> HeadRanking::insensitive_heads() const {
  std::vector<HeadId> out;
  for (const auto& e : insensitive) out.push_back(e.head);
  return out;
}

HeadRanking rank_heads(std::span<const HeadEffect> effects, std::size_t k,
                       InsensitiveSelector selector) {
  AIRLENS_REQUIRE(k >= 1, ErrorKind::precondition, "k must be at least 1");
  AIRLENS_REQUIRE(k <= effects.size(), ErrorKind::precondition, "k = ", k, " exceeds the ",
                  effects.size(), " available heads");
  HeadRanking r;
  std::vector<HeadEffect> rankable;
  for (const auto& e : effects) (e.degenerate ? r.excluded : rankable).push_back(e);
  AIRLENS_REQUIRE(k <= rankable.size(), ErrorKind::precondition, "k = ", k, " exceeds the ",
                  rankable.size(), " heads with a finite effect size");

  std::sort(rankable.begin(), rankable.end(), [](const HeadEffect& a, const HeadEffect& b) {
    if (a.effect_size != b.effect_size) return a.effect_size > b.effect_size;
    return a.head < b.head;
  });
  r.sensitive.assign(rankable.begin(), rankable.begin() + static_cast<std::ptrdiff_t>(k));

  std::vector<HeadEffect> rest(rankable.begin() + static_cast<std::ptrdiff_t>(k), rankable.end());
  std::sort(rest.begin(), rest.end(), [selector](const HeadEffect& a, const HeadEffect& b) {
    const double ka = selector == InsensitiveSelector::smallest_magnitude ? std::abs(a.effect_size)
                                                                          : a.effect_size;
    const double kb = selector == InsensitiveSelector::smallest_magnitude ? std::abs(b.effect_size)
                                                                          : b.effect_size;
    if (ka != kb) return ka < kb;
    return a.head < b.head;
  });
  const std::size_t n_insensitive = std::min(k, rest.size());
  r.insensitive.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_insensitive));
  r.middle.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_insensitive), rest.end());
  std::sort(r.middle.begin(), r.middle.end(),
            [](const HeadEffect& a, const HeadEffect& b) { return a.head < b.head; });

  double es = 0.0;
  for (const auto& e : effects) {
    r.average.mean_sensitivity += e.sensitivity;
    r.average.mean_delta_hallucinated += e.mean_hallucinated;
    r.average.mean_delta_non_hallucinated += e.mean_non_hallucinated;
  }
  for (const auto& e : rankable) es += e.effect_size;
  const auto n = static_cast<double>(effects.size());
  r.average.mean_sensitivity /= n;
  r.average.mean_delta_hallucinated /= n;
  r.average.mean_delta_non_hallucinated /= n;
  r.average.mean_effect_size = es / static_cast<double>(rankable.size());
  return r;
}

}  // namespace airlens
