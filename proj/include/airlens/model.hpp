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

#include "airlens/attention.hpp"
#include "airlens/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace airlens {

inline constexpr std::int64_t kNoToken = -1;

/// Embedded tokens (column j is token j) with per-position modality tags.
/// Visual positions carry token id kNoToken: they have no vocabulary entry.
struct TokenSequence {
  Matrix embeddings;  // d x T
  std::vector<Modality> modality;
  std::vector<std::int64_t> token_ids;

  std::size_t length() const noexcept { return modality.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(embeddings.rows()); }

  /// Throws ErrorKind::invalid_argument if shapes disagree or T or d is 0.
  void validate() const;

  void append(const Vector& embedding, Modality m, std::int64_t token_id);
  TokenSequence prefix(std::size_t n) const;
  /// The sequence with position j removed.
  TokenSequence without(std::size_t j) const;
  std::vector<std::size_t> positions(Modality m) const;
};

struct HeadWeights {
  Matrix w_qk;  // fused W_Q^T W_K, d x d
  Matrix w_v;   // d x d; head h writes rows [h*dh, (h+1)*dh) of the layer output
};

enum class Activation { relu, gelu, tanh };

std::string_view to_string(Activation a) noexcept;
Activation activation_from_string(std::string_view s);

struct LayerWeights {
  std::vector<HeadWeights> heads;
  Matrix w_f1;  // d x d
  Matrix w_f2;  // d x d
  Activation activation = Activation::relu;
};

struct ModelParams {
  std::size_t d = 32;
  std::size_t layers = 4;
  std::size_t heads = 8;
  std::size_t vocab = 64;
  std::uint64_t seed = 0;
  bool layer_norm = true;
  Activation activation = Activation::relu;
};

/// Weights of an L-layer, H-head causal transformer with a linear readout.
struct TinyModel {
  ModelParams params;
  std::vector<LayerWeights> layers;
  Matrix readout;          // d x V
  Matrix embedding_table;  // V x d

  std::size_t dim() const noexcept { return params.d; }
  std::size_t head_dim() const noexcept { return params.d / params.heads; }
  std::size_t head_count() const noexcept { return params.layers * params.heads; }
  std::size_t vocab() const noexcept { return params.vocab; }

  const HeadWeights& head(const HeadId& id) const;
  HeadWeights& head(const HeadId& id);
  bool valid_head(const HeadId& id) const noexcept {
    return id.layer < params.layers && id.head < params.heads;
  }
  /// Flat index layer * H + head used for attention sets.
  std::size_t flat_index(const HeadId& id) const noexcept { return id.layer * params.heads + id.head; }
  std::vector<HeadId> all_heads() const;

  Vector embedding(std::int64_t token) const;

  /// Throws ErrorKind::invalid_argument on inconsistent shapes, H not dividing
  /// d, or non-finite weights.
  void validate() const;
};

/// Deterministic initialisation: weight entries are i.i.d. N(0, 1/d), the
/// embedding table is N(0, 1) so layer-0 inputs share the per-coordinate scale
/// of layer-normalised hidden states.
TinyModel build_model(const ModelParams& params);

/// Attention of one head on input columns `x` (d x T): causal softmax of
/// x^T W_QK x / sqrt(d).
AttentionMatrix compute_head_attention(const Matrix& x, const Matrix& w_qk);
AttentionMatrix compute_head_attention(const TokenSequence& x, const HeadWeights& head);

struct HookContext {
  HeadId head;
  const TokenSequence& sequence;
  std::size_t step;
};

/// Receives each head's attention matrix before value mixing and may rewrite
/// it in place.
using AttentionHook = std::function<void(const HookContext&, AttentionMatrix&)>;

struct ForwardOptions {
  /// Replace the computed matrix of a head before value mixing.
  std::map<HeadId, AttentionMatrix> overrides;
  /// Heads whose mixed output is zeroed before concatenation.
  std::vector<HeadId> erased;
  AttentionHook hook;
  std::size_t step = 0;
};

struct ForwardResult {
  Vector next_token_probs;                 // softmax of the last position's logits
  Matrix logits;                           // V x T, every position
  Matrix hidden;                           // d x T final hidden state
  std::vector<AttentionMatrix> attention;  // L*H, flat_index order; the matrices actually used
};

/// One full pass over `x`. Throws ErrorKind::invalid_argument on override
/// shape mismatches and ErrorKind::numeric (naming the layer) on non-finite
/// activations.
ForwardResult forward_decode_step(const TinyModel& model, const TokenSequence& x,
                                  const ForwardOptions& options = {});

/// Softmax over the columns of a V x T logit matrix.
Vector probabilities_at(const Matrix& logits, std::size_t position);

struct DecodeStep {
  std::int64_t token = kNoToken;
  Vector probs;
  std::vector<AttentionMatrix> attention;
};

struct DecodeTrace {
  TokenSequence prompt;
  std::vector<DecodeStep> steps;
  TokenSequence final_sequence;

  std::vector<std::int64_t> tokens() const;
  /// Sequence position (0-based) of the token generated at `step`.
  std::size_t position_of_step(std::size_t step) const noexcept { return prompt.length() + step; }
};

enum class Decoder { greedy };

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(const Vector& v);

/// Greedy autoregressive generation. Generated tokens are text and embed via
/// the embedding table. `hook`, when set, sees every head's matrix at every
/// step; `erased` heads are zeroed throughout.
DecodeTrace generate_tokens(const TinyModel& model, const TokenSequence& prompt,
                            std::size_t max_new_tokens, const AttentionHook& hook = {},
                            const std::vector<HeadId>& erased = {},
                            Decoder decoder = Decoder::greedy);

/// Layout of a synthetic multimodal prompt: leading text, a block of visual
/// tokens, trailing text (system prompt, image, instruction).
struct PromptSpec {
  std::size_t text_before = 4;
  std::size_t visual = 24;
  std::size_t text_after = 4;
  std::uint64_t seed = 0;
};

/// Visual embeddings are drawn N(0, I); text tokens are uniform vocabulary ids.
TokenSequence make_prompt(const TinyModel& model, const PromptSpec& spec);

}  // namespace airlens
