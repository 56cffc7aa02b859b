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

#include "airlens/imbalance.hpp"

#include "airlens/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace airlens {

double ModalityMass::total() const noexcept {
  return std::accumulate(totals.begin(), totals.end(), 0.0);
}

ModalityMass modality_attention_mass(const Matrix& a, std::span<const Modality> labels) {
  AIRLENS_REQUIRE(labels.size() == static_cast<std::size_t>(a.cols()), ErrorKind::invalid_argument,
                  "modality labels have length ", labels.size(), ", attention has ", a.cols(),
                  " columns");
  ModalityMass mass;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    mass.totals[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] += a.col(j).sum();
  return mass;
}

double mai(const ModalityMass& mass, Modality p, Modality q) {
  const double denom = mass.of(q);
  AIRLENS_REQUIRE(denom > 0.0, ErrorKind::undefined, "MAI(", to_string(p), ", ", to_string(q),
                  ") is undefined: ", to_string(q), " received no attention mass");
  return mass.of(p) / denom;
}

Matrix mean_attention(std::span<const AttentionMatrix> layer_heads) {
  AIRLENS_REQUIRE(!layer_heads.empty(), ErrorKind::invalid_argument, "no attention matrices to average");
  Matrix sum = layer_heads.front().weights;
  for (std::size_t k = 1; k < layer_heads.size(); ++k) {
    AIRLENS_REQUIRE(layer_heads[k].weights.rows() == sum.rows() &&
                        layer_heads[k].weights.cols() == sum.cols(),
                    ErrorKind::invalid_argument, "attention matrices differ in shape");
    sum += layer_heads[k].weights;
  }
  return sum / static_cast<double>(layer_heads.size());
}

ContributionProfile ContributionProfile::injected(std::vector<double> scores) {
  for (double s : scores)
    AIRLENS_REQUIRE(std::isfinite(s) && s >= 0.0, ErrorKind::invalid_argument,
                    "contribution scores must be finite and non-negative");
  ContributionProfile p;
  p.scores = std::move(scores);
  p.estimator = ContributionEstimator::injected;
  return p;
}

ContributionProfile estimate_contributions(const TinyModel& model, const TokenSequence& x,
                                           std::size_t target_position) {
  x.validate();
  const std::size_t t = x.length();
  AIRLENS_REQUIRE(target_position >= 2 && target_position <= t + 1, ErrorKind::precondition,
                  "target position ", target_position, " leaves no context (sequence length ", t, ")");
  const std::size_t context_len = target_position - 1;
  const TokenSequence context = x.prefix(context_len);

  const Vector full = forward_decode_step(model, context).next_token_probs;
  std::int64_t target = kNoToken;
  if (target_position <= t) {
    target = x.token_ids[target_position - 1];
    AIRLENS_REQUIRE(target >= 0, ErrorKind::precondition, "target position ", target_position,
                    " holds a visual token with no vocabulary id");
  } else {
    target = static_cast<std::int64_t>(argmax(full));
  }
  const double full_log = std::log(full[target]);

  ContributionProfile profile;
  profile.estimator = ContributionEstimator::ablation;
  profile.target_token = target;
  profile.scores.resize(context_len);
  for (std::size_t j = 0; j < context_len; ++j) {
    double ablated_log = 0.0;
    if (context_len == 1) {
      ablated_log = -std::log(static_cast<double>(model.vocab()));
    } else {
      ablated_log = std::log(forward_decode_step(model, context.without(j)).next_token_probs[target]);
    }
    profile.scores[j] = std::max(0.0, full_log - ablated_log);
  }
  return profile;
}

std::vector<double> column_masses(const Matrix& a, std::size_t count) {
  AIRLENS_REQUIRE(count <= static_cast<std::size_t>(a.cols()), ErrorKind::invalid_argument,
                  "requested ", count, " columns from a matrix with ", a.cols());
  std::vector<double> out(count);
  for (std::size_t j = 0; j < count; ++j) out[j] = a.col(static_cast<Eigen::Index>(j)).sum();
  return out;
}

namespace {

struct TaiTotals {
  std::vector<double> mass;
  double mass_total = 0.0;
  double contribution_total = 0.0;
};

TaiTotals tai_totals(const Matrix& a, const ContributionProfile& profile) {
  const std::size_t i = profile.scores.size();
  AIRLENS_REQUIRE(i >= 1, ErrorKind::invalid_argument, "contribution profile is empty");
  AIRLENS_REQUIRE(static_cast<std::size_t>(a.cols()) >= i, ErrorKind::invalid_argument,
                  "attention covers ", a.cols(), " keys, profile has ", i, " tokens");
  TaiTotals t;
  t.mass = column_masses(a, i);
  t.mass_total = std::accumulate(t.mass.begin(), t.mass.end(), 0.0);
  t.contribution_total = std::accumulate(profile.scores.begin(), profile.scores.end(), 0.0);
  AIRLENS_REQUIRE(t.mass_total > 0.0, ErrorKind::undefined, "no attention mass reaches the context");
  return t;
}

}  // namespace

double tai(const Matrix& a, const ContributionProfile& profile, std::size_t j) {
  AIRLENS_REQUIRE(j < profile.scores.size(), ErrorKind::invalid_argument, "token ", j,
                  " outside the profile's ", profile.scores.size(), " context tokens");
  const TaiTotals t = tai_totals(a, profile);
  const double c = profile.scores[j];
  AIRLENS_REQUIRE(c > 0.0, ErrorKind::undefined, "TAI of token ", j,
                  " is undefined: its contribution is zero");
  return (t.mass[j] / t.mass_total) * (t.contribution_total / c);
}

std::vector<std::optional<double>> tai_all(const Matrix& a, const ContributionProfile& profile) {
  const TaiTotals t = tai_totals(a, profile);
  std::vector<std::optional<double>> out(profile.scores.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double c = profile.scores[j];
    if (c > 0.0) out[j] = (t.mass[j] / t.mass_total) * (t.contribution_total / c);
  }
  return out;
}

double tai_threshold(std::span<const double> per_example_max) {
  AIRLENS_REQUIRE(!per_example_max.empty(), ErrorKind::precondition,
                  "TAI threshold needs at least one example");
  const double n = static_cast<double>(per_example_max.size());
  const double mean = std::accumulate(per_example_max.begin(), per_example_max.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : per_example_max) ss += (v - mean) * (v - mean);
  return mean + std::sqrt(ss / n);
}

std::vector<std::size_t> detect_imbalanced_tokens(std::span<const double> tai_values, double tau) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < tai_values.size(); ++k)
    if (tai_values[k] > tau) out.push_back(k);
  return out;
}

CooccurrenceStats cooccurrence_stats(std::span<const std::size_t> flagged,
                                     std::span<const std::size_t> labeled, std::size_t window) {
  AIRLENS_REQUIRE(std::is_sorted(flagged.begin(), flagged.end()) &&
                      std::is_sorted(labeled.begin(), labeled.end()),
                  ErrorKind::precondition, "co-occurrence indices must be sorted ascending");
  CooccurrenceStats stats;
  for (std::size_t t : labeled) {
    auto it = std::lower_bound(flagged.begin(), flagged.end(), t);  // first f >= t
    if (it == flagged.begin()) continue;
    const std::size_t f = *std::prev(it);
    if (t - f <= window) stats.hits.push_back({f, t, t - f});
  }
  stats.rate = labeled.empty() ? 0.0
                               : static_cast<double>(stats.hits.size()) /
                                     static_cast<double>(labeled.size());
  return stats;
}

double attention_cosine_similarity(const Matrix& a, const Matrix& b, std::size_t output_window) {
  const auto w = static_cast<Eigen::Index>(output_window);
  AIRLENS_REQUIRE(w >= 1 && a.rows() >= w && a.cols() >= w && b.rows() >= w && b.cols() >= w,
                  ErrorKind::invalid_argument, "output window ", output_window,
                  " exceeds the attention maps");
  const Matrix sa = a.bottomRightCorner(w, w);
  const Matrix sb = b.bottomRightCorner(w, w);
  const double na = sa.norm();
  const double nb = sb.norm();
  AIRLENS_REQUIRE(na > 0.0 && nb > 0.0, ErrorKind::undefined,
                  "cosine similarity undefined for a zero-norm attention block");
  return std::clamp(sa.cwiseProduct(sb).sum() / (na * nb), -1.0, 1.0);
}

}  // namespace airlens
