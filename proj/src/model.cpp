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

#include "airlens/model.hpp"

#include "airlens/error.hpp"
#include "airlens/random.hpp"

#include <algorithm>
#include <cmath>

namespace airlens {

// ---------------------------------------------------------------------------
// TokenSequence

void TokenSequence::validate() const {
  AIRLENS_REQUIRE(embeddings.rows() > 0, ErrorKind::invalid_argument, "token sequence has d = 0");
  AIRLENS_REQUIRE(!modality.empty(), ErrorKind::invalid_argument, "token sequence is empty");
  AIRLENS_REQUIRE(static_cast<std::size_t>(embeddings.cols()) == modality.size() &&
                      token_ids.size() == modality.size(),
                  ErrorKind::invalid_argument, "token sequence has ", embeddings.cols(),
                  " embedding columns, ", modality.size(), " modality tags and ", token_ids.size(),
                  " token ids");
}

void TokenSequence::append(const Vector& embedding, Modality m, std::int64_t token_id) {
  AIRLENS_REQUIRE(embeddings.cols() == 0 || embedding.size() == embeddings.rows(),
                  ErrorKind::invalid_argument, "appended embedding has dimension ", embedding.size(),
                  ", sequence has ", embeddings.rows());
  const Eigen::Index t = embeddings.cols();
  embeddings.conservativeResize(embedding.size(), t + 1);
  embeddings.col(t) = embedding;
  modality.push_back(m);
  token_ids.push_back(token_id);
}

TokenSequence TokenSequence::prefix(std::size_t n) const {
  AIRLENS_REQUIRE(n <= length(), ErrorKind::invalid_argument, "prefix of length ", n,
                  " requested from a sequence of length ", length());
  TokenSequence out;
  out.embeddings = embeddings.leftCols(static_cast<Eigen::Index>(n));
  out.modality.assign(modality.begin(), modality.begin() + static_cast<std::ptrdiff_t>(n));
  out.token_ids.assign(token_ids.begin(), token_ids.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

TokenSequence TokenSequence::without(std::size_t j) const {
  AIRLENS_REQUIRE(j < length(), ErrorKind::invalid_argument, "position ", j,
                  " out of range for length ", length());
  const auto t = static_cast<Eigen::Index>(length());
  const auto jj = static_cast<Eigen::Index>(j);
  TokenSequence out;
  out.embeddings.resize(embeddings.rows(), t - 1);
  out.embeddings.leftCols(jj) = embeddings.leftCols(jj);
  out.embeddings.rightCols(t - 1 - jj) = embeddings.rightCols(t - 1 - jj);
  out.modality = modality;
  out.modality.erase(out.modality.begin() + jj);
  out.token_ids = token_ids;
  out.token_ids.erase(out.token_ids.begin() + jj);
  return out;
}

std::vector<std::size_t> TokenSequence::positions(Modality m) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < modality.size(); ++i)
    if (modality[i] == m) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// TinyModel

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::gelu: return "gelu";
    case Activation::tanh: return "tanh";
  }
  return "relu";
}

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "gelu") return Activation::gelu;
  if (s == "tanh") return Activation::tanh;
  detail::raise(ErrorKind::invalid_argument, "unknown activation '", s, "'");
}

const HeadWeights& TinyModel::head(const HeadId& id) const {
  AIRLENS_REQUIRE(valid_head(id), ErrorKind::invalid_argument, "head ", to_string(id),
                  " out of range for ", params.layers, " layers x ", params.heads, " heads");
  return layers[id.layer].heads[id.head];
}

HeadWeights& TinyModel::head(const HeadId& id) {
  return const_cast<HeadWeights&>(std::as_const(*this).head(id));
}

std::vector<HeadId> TinyModel::all_heads() const {
  std::vector<HeadId> out;
  out.reserve(head_count());
  for (std::size_t l = 0; l < params.layers; ++l)
    for (std::size_t h = 0; h < params.heads; ++h) out.push_back({l, h});
  return out;
}

Vector TinyModel::embedding(std::int64_t token) const {
  AIRLENS_REQUIRE(token >= 0 && static_cast<std::size_t>(token) < params.vocab,
                  ErrorKind::invalid_argument, "token id ", token, " outside vocabulary of size ",
                  params.vocab);
  return embedding_table.row(token).transpose();
}

void TinyModel::validate() const {
  const auto d = static_cast<Eigen::Index>(params.d);
  const auto v = static_cast<Eigen::Index>(params.vocab);
  AIRLENS_REQUIRE(params.d >= 1 && params.layers >= 1 && params.heads >= 1 && params.vocab >= 1,
                  ErrorKind::invalid_argument, "model needs d, L, H, V >= 1");
  AIRLENS_REQUIRE(params.d % params.heads == 0, ErrorKind::invalid_argument, "H = ", params.heads,
                  " does not divide d = ", params.d);
  AIRLENS_REQUIRE(layers.size() == params.layers, ErrorKind::invalid_argument, "model has ",
                  layers.size(), " layers, expected ", params.layers);
  const auto square = [&](const Matrix& m, const char* what, std::size_t l) {
    AIRLENS_REQUIRE(m.rows() == d && m.cols() == d, ErrorKind::invalid_argument, what, " of layer ",
                    l, " is ", m.rows(), "x", m.cols(), ", expected ", d, "x", d);
    AIRLENS_REQUIRE(m.allFinite(), ErrorKind::numeric, what, " of layer ", l,
                    " has non-finite entries");
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    AIRLENS_REQUIRE(layers[l].heads.size() == params.heads, ErrorKind::invalid_argument, "layer ", l,
                    " has ", layers[l].heads.size(), " heads, expected ", params.heads);
    for (const auto& h : layers[l].heads) {
      square(h.w_qk, "w_qk", l);
      square(h.w_v, "w_v", l);
    }
    square(layers[l].w_f1, "w_f1", l);
    square(layers[l].w_f2, "w_f2", l);
  }
  AIRLENS_REQUIRE(readout.rows() == d && readout.cols() == v, ErrorKind::invalid_argument,
                  "readout is ", readout.rows(), "x", readout.cols(), ", expected ", d, "x", v);
  AIRLENS_REQUIRE(embedding_table.rows() == v && embedding_table.cols() == d,
                  ErrorKind::invalid_argument, "embedding table is ", embedding_table.rows(), "x",
                  embedding_table.cols(), ", expected ", v, "x", d);
  AIRLENS_REQUIRE(readout.allFinite() && embedding_table.allFinite(), ErrorKind::numeric,
                  "readout or embedding table has non-finite entries");
}

TinyModel build_model(const ModelParams& params) {
  TinyModel m;
  m.params = params;
  AIRLENS_REQUIRE(params.d >= 1 && params.heads >= 1 && params.d % params.heads == 0,
                  ErrorKind::invalid_argument, "H = ", params.heads, " must divide d = ", params.d);
  AIRLENS_REQUIRE(params.layers >= 1 && params.vocab >= 1, ErrorKind::invalid_argument,
                  "model needs L >= 1 and V >= 1");
  const auto d = static_cast<Eigen::Index>(params.d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.d));
  Rng rng(params.seed);

  m.layers.resize(params.layers);
  for (auto& layer : m.layers) {
    layer.activation = params.activation;
    layer.heads.resize(params.heads);
    for (auto& h : layer.heads) {
      h.w_qk.resize(d, d);
      rng.fill_normal(h.w_qk, scale);
      h.w_v.resize(d, d);
      rng.fill_normal(h.w_v, scale);
    }
    layer.w_f1.resize(d, d);
    rng.fill_normal(layer.w_f1, scale);
    layer.w_f2.resize(d, d);
    rng.fill_normal(layer.w_f2, scale);
  }
  m.readout.resize(d, static_cast<Eigen::Index>(params.vocab));
  rng.fill_normal(m.readout, scale);
  m.embedding_table.resize(static_cast<Eigen::Index>(params.vocab), d);
  rng.fill_normal(m.embedding_table, 1.0);
  return m;
}

// ---------------------------------------------------------------------------
// Forward pass

AttentionMatrix compute_head_attention(const Matrix& x, const Matrix& w_qk) {
  AIRLENS_REQUIRE(x.cols() > 0, ErrorKind::invalid_argument, "attention over an empty sequence");
  AIRLENS_REQUIRE(w_qk.rows() == x.rows() && w_qk.cols() == x.rows(), ErrorKind::invalid_argument,
                  "w_qk is ", w_qk.rows(), "x", w_qk.cols(), " but tokens have d = ", x.rows());
  const Matrix scores = (x.transpose() * (w_qk * x)) / std::sqrt(static_cast<double>(x.rows()));
  return softmax_rows(scores, /*causal_mask=*/true);
}

AttentionMatrix compute_head_attention(const TokenSequence& x, const HeadWeights& head) {
  x.validate();
  return compute_head_attention(x.embeddings, head.w_qk);
}

namespace {

void layer_norm_columns(Matrix& m) {
  constexpr double kEps = 1e-5;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    auto col = m.col(c);
    const double mean = col.mean();
    col.array() -= mean;
    const double var = col.squaredNorm() / static_cast<double>(col.size());
    col /= std::sqrt(var + kEps);
  }
}

void activate(Matrix& m, Activation a) {
  switch (a) {
    case Activation::relu:
      m = m.cwiseMax(0.0);
      break;
    case Activation::tanh:
      m = m.array().tanh();
      break;
    case Activation::gelu: {
      constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
      m = (0.5 * m.array() * (1.0 + (k * (m.array() + 0.044715 * m.array().cube())).tanh())).matrix();
      break;
    }
  }
}

}  // namespace

Vector probabilities_at(const Matrix& logits, std::size_t position) {
  AIRLENS_REQUIRE(position < static_cast<std::size_t>(logits.cols()), ErrorKind::invalid_argument,
                  "position ", position, " out of range for ", logits.cols(), " positions");
  const Vector z = logits.col(static_cast<Eigen::Index>(position));
  Vector p = (z.array() - z.maxCoeff()).exp();
  return p / p.sum();
}

ForwardResult forward_decode_step(const TinyModel& model, const TokenSequence& x,
                                  const ForwardOptions& options) {
  x.validate();
  AIRLENS_REQUIRE(x.dim() == model.dim(), ErrorKind::invalid_argument, "sequence has d = ", x.dim(),
                  ", model has d = ", model.dim());
  for (const auto& id : options.erased)
    AIRLENS_REQUIRE(model.valid_head(id), ErrorKind::invalid_argument, "erased head ",
                    to_string(id), " is out of range");

  const auto t = static_cast<Eigen::Index>(x.length());
  const auto dh = static_cast<Eigen::Index>(model.head_dim());
  ForwardResult result;
  result.attention.reserve(model.head_count());

  Matrix hidden = x.embeddings;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const LayerWeights& layer = model.layers[l];
    Matrix mixed = Matrix::Zero(hidden.rows(), t);
    for (std::size_t h = 0; h < layer.heads.size(); ++h) {
      const HeadId id{l, h};
      const HeadWeights& w = layer.heads[h];
      AttentionMatrix a;
      if (auto it = options.overrides.find(id); it != options.overrides.end()) {
        a = it->second;
        AIRLENS_REQUIRE(a.weights.rows() == t && a.weights.cols() == t, ErrorKind::invalid_argument,
                        "override for head ", to_string(id), " is ", a.weights.rows(), "x",
                        a.weights.cols(), ", sequence length is ", t);
      } else {
        a = compute_head_attention(hidden, w.w_qk);
      }
      a.head = id;
      if (options.hook) options.hook(HookContext{id, x, options.step}, a);
      AIRLENS_REQUIRE(a.weights.rows() == t && a.weights.cols() == t, ErrorKind::invalid_argument,
                      "hook returned a ", a.weights.rows(), "x", a.weights.cols(),
                      " matrix for head ", to_string(id));

      const bool erased =
          std::find(options.erased.begin(), options.erased.end(), id) != options.erased.end();
      if (!erased) {
        const auto rows = static_cast<Eigen::Index>(h) * dh;
        const Matrix values = w.w_v.middleRows(rows, dh) * hidden;  // dh x T
        mixed.middleRows(rows, dh).noalias() = values * a.weights.transpose();
      }
      result.attention.push_back(std::move(a));
    }

    Matrix z = mixed + hidden;
    if (model.params.layer_norm) layer_norm_columns(z);
    Matrix ff = layer.w_f1 * z;
    activate(ff, layer.activation);
    hidden = layer.w_f2 * ff + z;
    if (model.params.layer_norm) layer_norm_columns(hidden);
    AIRLENS_REQUIRE(hidden.allFinite(), ErrorKind::numeric, "non-finite activations in layer ", l);
  }

  result.logits = model.readout.transpose() * hidden;
  result.next_token_probs = probabilities_at(result.logits, x.length() - 1);
  result.hidden = std::move(hidden);
  return result;
}

// ---------------------------------------------------------------------------
// Decoding

std::vector<std::int64_t> DecodeTrace::tokens() const {
  std::vector<std::int64_t> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.token);
  return out;
}

std::size_t argmax(const Vector& v) {
  AIRLENS_REQUIRE(v.size() > 0, ErrorKind::invalid_argument, "argmax of an empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<std::size_t>(best);
}

DecodeTrace generate_tokens(const TinyModel& model, const TokenSequence& prompt,
                            std::size_t max_new_tokens, const AttentionHook& hook,
                            const std::vector<HeadId>& erased, Decoder /*decoder*/) {
  AIRLENS_REQUIRE(max_new_tokens >= 1, ErrorKind::precondition, "max_new_tokens must be >= 1");
  prompt.validate();
  DecodeTrace trace;
  trace.prompt = prompt;
  trace.steps.reserve(max_new_tokens);

  TokenSequence seq = prompt;
  ForwardOptions options;
  options.hook = hook;
  options.erased = erased;
  for (std::size_t step = 0; step < max_new_tokens; ++step) {
    options.step = step;
    ForwardResult r = forward_decode_step(model, seq, options);
    const auto token = static_cast<std::int64_t>(argmax(r.next_token_probs));
    seq.append(model.embedding(token), Modality::text, token);
    trace.steps.push_back(DecodeStep{token, std::move(r.next_token_probs), std::move(r.attention)});
  }
  trace.final_sequence = std::move(seq);
  return trace;
}

TokenSequence make_prompt(const TinyModel& model, const PromptSpec& spec) {
  const std::size_t total = spec.text_before + spec.visual + spec.text_after;
  AIRLENS_REQUIRE(total >= 1, ErrorKind::invalid_argument, "prompt must contain at least one token");
  Rng rng(derive_seed(spec.seed, 0x70726f6d7074ULL));
  TokenSequence seq;
  seq.embeddings.resize(static_cast<Eigen::Index>(model.dim()), 0);
  const auto add_text = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      const auto token = static_cast<std::int64_t>(rng.index(model.vocab()));
      seq.append(model.embedding(token), Modality::text, token);
    }
  };
  add_text(spec.text_before);
  for (std::size_t k = 0; k < spec.visual; ++k) {
    Vector e(static_cast<Eigen::Index>(model.dim()));
    rng.fill_normal(e);
    seq.append(e, Modality::visual, kNoToken);
  }
  add_text(spec.text_after);
  return seq;
}

}  // namespace airlens
