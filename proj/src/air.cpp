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

#include "airlens/air.hpp"

#include "airlens/error.hpp"
#include "airlens/imbalance.hpp"

#include <cmath>

namespace airlens {

void AirConfig::validate(const TinyModel* model) const {
  AIRLENS_REQUIRE(std::isfinite(tau_text), ErrorKind::config, "air.tau_text must be finite");
  AIRLENS_REQUIRE(lambda >= 0.0 && lambda <= 1.0, ErrorKind::config, "air.lambda = ", lambda,
                  " is outside [0, 1]");
  AIRLENS_REQUIRE(std::isfinite(gamma) && gamma >= 1.0, ErrorKind::config, "air.gamma = ", gamma,
                  " must be at least 1");
  AIRLENS_REQUIRE(beta >= 0.0 && beta <= 1.0, ErrorKind::config, "air.beta = ", beta,
                  " is outside [0, 1]");
  AIRLENS_REQUIRE(std::isfinite(xi), ErrorKind::config, "air.xi must be finite");
  AIRLENS_REQUIRE(epsilon > 0.0, ErrorKind::config, "air.epsilon must be positive");
  AIRLENS_REQUIRE(wqk_log_guard > 0.0, ErrorKind::config, "air.wqk_log_guard must be positive");
  if (model)
    for (const auto& h : sensitive_heads)
      AIRLENS_REQUIRE(model->valid_head(h), ErrorKind::config, "sensitive head ", to_string(h),
                      " does not exist in the model");
}

WqkRescale rescale_wqk(const Matrix& w_qk, double xi, double guard) {
  AIRLENS_REQUIRE(w_qk.allFinite(), ErrorKind::invalid_argument, "w_qk has non-finite entries");
  AIRLENS_REQUIRE(guard > 0.0, ErrorKind::invalid_argument, "log guard must be positive");
  WqkRescale r;
  r.trace_sq = (w_qk * w_qk).trace();
  const double arg = r.trace_sq + 1e-6;
  if (arg <= 0.0) {
    r.nonpositive_argument = true;
    r.w_qk = w_qk;
    return r;
  }
  r.log_value = std::log(arg);
  if (std::abs(r.log_value) < guard) {
    r.guard_engaged = true;
    r.log_value = r.log_value < 0.0 ? -guard : guard;
  }
  r.scale = 1.0 - xi / r.log_value;
  r.w_qk = r.scale * w_qk;
  return r;
}

TextFraction text_attention_fraction(const Matrix& a, std::span<const Modality> labels) {
  AIRLENS_REQUIRE(labels.size() == static_cast<std::size_t>(a.cols()) && a.rows() == a.cols(),
                  ErrorKind::invalid_argument, "labels have length ", labels.size(), ", matrix is ",
                  a.rows(), "x", a.cols());
  TextFraction f;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (labels[static_cast<std::size_t>(i)] != Modality::text) continue;
    ++f.text_rows;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (labels[static_cast<std::size_t>(j)] == Modality::text) f.raw += a(i, j);
  }
  if (f.text_rows > 0) f.fraction = f.raw / static_cast<double>(f.text_rows);
  return f;
}

double text_share(const Matrix& a, std::span<const Modality> labels) {
  AIRLENS_REQUIRE(labels.size() == static_cast<std::size_t>(a.cols()) && a.rows() == a.cols(),
                  ErrorKind::invalid_argument, "labels have length ", labels.size(), ", matrix is ",
                  a.rows(), "x", a.cols());
  double sum = 0.0;
  std::size_t rows = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (labels[static_cast<std::size_t>(i)] != Modality::text) continue;
    double text = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (labels[static_cast<std::size_t>(j)] == Modality::text) text += a(i, j);
    const double total = a.row(i).sum();
    if (total == 0.0) continue;
    sum += text / total;
    ++rows;
  }
  return rows == 0 ? 0.0 : sum / static_cast<double>(rows);
}

AttentionMatrix modality_reallocate(const AttentionMatrix& a, std::span<const Modality> labels,
                                    double lambda, double gamma) {
  AIRLENS_REQUIRE(labels.size() == static_cast<std::size_t>(a.weights.cols()),
                  ErrorKind::invalid_argument, "labels have length ", labels.size(),
                  ", matrix has ", a.weights.cols(), " columns");
  AttentionMatrix out = a;
  for (Eigen::Index j = 0; j < out.weights.cols(); ++j)
    out.weights.col(j) *= labels[static_cast<std::size_t>(j)] == Modality::text ? lambda : gamma;
  out.row_stochastic = lambda == 1.0 && gamma == 1.0 && a.row_stochastic;
  return out;
}

AttentionMatrix variance_regularize(const AttentionMatrix& a, double beta, double epsilon,
                                    bool additive_epsilon) {
  const Matrix& m = a.weights;
  AIRLENS_REQUIRE(m.rows() == m.cols() && m.rows() > 0, ErrorKind::invalid_argument,
                  "variance regularisation needs a square matrix, got ", m.rows(), "x", m.cols());
  AIRLENS_REQUIRE(beta >= 0.0 && beta <= 1.0, ErrorKind::invalid_argument, "beta = ", beta,
                  " is outside [0, 1]");
  AIRLENS_REQUIRE(epsilon > 0.0, ErrorKind::invalid_argument, "epsilon must be positive");
  const auto n = static_cast<double>(m.rows());

  // Projection onto zero trace; the identity has the sequence length as side.
  Matrix hat = m;
  hat.diagonal().array() -= m.trace() / n;

  const double hat_sq = hat.squaredNorm();
  const double denom = additive_epsilon ? hat_sq + epsilon : std::max(hat_sq, epsilon);
  Matrix tilde = hat * std::sqrt(m.squaredNorm() / denom);

  const double mean = tilde.mean();
  Matrix star = (1.0 - beta) * tilde;
  star.array() += beta * mean;

  AttentionMatrix out;
  out.head = a.head;
  out.causal = is_causal(star);
  out.row_stochastic = is_row_stochastic(star);
  out.weights = std::move(star);
  return out;
}

AttentionMatrix air_apply(const AttentionMatrix& a, std::span<const Modality> labels,
                          const AirConfig& cfg, AirApplyInfo* info) {
  AirApplyInfo local;
  AirApplyInfo& inf = info ? *info : local;
  inf = AirApplyInfo{};
  if (!cfg.sensitive_heads.contains(a.head)) return a;
  inf.sensitive = true;
  inf.pre_fraction = text_attention_fraction(a.weights, labels).fraction;
  inf.post_fraction = inf.pre_fraction;

  AttentionMatrix prime = a;
  if (inf.pre_fraction > cfg.tau_text) {
    inf.triggered = true;
    prime = modality_reallocate(a, labels, cfg.lambda, cfg.gamma);
    inf.post_fraction = text_share(prime.weights, labels);
  }
  AttentionMatrix star = variance_regularize(prime, cfg.beta, cfg.epsilon, cfg.additive_epsilon);
  if (cfg.renormalize_rows) {
    for (Eigen::Index i = 0; i < star.weights.rows(); ++i) {
      const double s = star.weights.row(i).sum();
      if (s != 0.0) star.weights.row(i) /= s;
    }
    star.row_stochastic = is_row_stochastic(star.weights);
  }
  return star;
}

std::vector<RescaleRecord> apply_wqk_rescale(TinyModel& model, const AirConfig& cfg) {
  std::vector<RescaleRecord> out;
  for (const HeadId& id : cfg.sensitive_heads) {
    AIRLENS_REQUIRE(model.valid_head(id), ErrorKind::config, "sensitive head ", to_string(id),
                    " does not exist in the model");
    HeadWeights& h = model.head(id);
    WqkRescale r = rescale_wqk(h.w_qk, cfg.xi, cfg.wqk_log_guard);
    h.w_qk = std::move(r.w_qk);
    out.push_back({id, r.scale, r.log_value, r.guard_engaged, r.nonpositive_argument});
  }
  return out;
}

AttentionHook air_hook(const AirConfig& cfg, std::vector<TriggerRecord>* log) {
  return [cfg, log](const HookContext& ctx, AttentionMatrix& a) {
    if (!cfg.sensitive_heads.contains(ctx.head)) return;
    AirApplyInfo info;
    a = air_apply(a, ctx.sequence.modality, cfg, &info);
    if (log) log->push_back({ctx.step, ctx.head, info.pre_fraction, info.post_fraction, info.triggered});
  };
}

AirDecode decode_with_air(const TinyModel& model, const TokenSequence& prompt, const AirConfig& cfg,
                          std::size_t max_new_tokens, const AttentionHook& before) {
  cfg.validate(&model);
  AirDecode result;
  if (cfg.sensitive_heads.empty()) {
    result.trace = generate_tokens(model, prompt, max_new_tokens, before);
    return result;
  }
  TinyModel rectified = model;
  result.rescales = apply_wqk_rescale(rectified, cfg);
  AttentionHook hook = air_hook(cfg, &result.triggers);
  if (before)
    hook = [before, air = std::move(hook)](const HookContext& ctx, AttentionMatrix& a) {
      before(ctx, a);
      air(ctx, a);
    };
  result.trace = generate_tokens(rectified, prompt, max_new_tokens, hook);
  return result;
}

double mean_text_visual_mai(const DecodeTrace& trace, std::span<const HeadId> heads,
                            std::size_t heads_per_layer) {
  AIRLENS_REQUIRE(!trace.steps.empty(), ErrorKind::precondition, "trace has no steps");
  AIRLENS_REQUIRE(!heads.empty(), ErrorKind::precondition, "no heads to average over");
  const DecodeStep& last = trace.steps.back();
  const TokenSequence& seq = trace.final_sequence;
  const std::span<const Modality> labels(seq.modality.data(), seq.length() - 1);
  double sum = 0.0;
  for (const HeadId& id : heads) {
    const std::size_t k = id.layer * heads_per_layer + id.head;
    AIRLENS_REQUIRE(k < last.attention.size(), ErrorKind::invalid_argument, "head ", to_string(id),
                    " is not in the trace");
    sum += mai(modality_attention_mass(last.attention[k].weights, labels), Modality::text,
               Modality::visual);
  }
  return sum / static_cast<double>(heads.size());
}

}  // namespace airlens
