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

#include "airlens/attention.hpp"
#include "airlens/error.hpp"
#include "airlens/model.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace airlens;

TEST_CASE("softmax over zero scores is uniform over the causal prefix") {
  const AttentionMatrix a = softmax_rows(Matrix::Zero(3, 3), true);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(a.weights(i, j) == doctest::Approx(j <= i ? 1.0 / (i + 1) : 0.0));
  CHECK(a.row_stochastic);
  CHECK(a.causal);
}

TEST_CASE("softmax reproduces the 1:3 exp ratio") {
  Matrix s(2, 2);
  s << 0.0, std::log(3.0), 0.0, std::log(3.0);
  const AttentionMatrix a = softmax_rows(s, false);
  CHECK(a.weights(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(a.weights(0, 1) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("softmax on random scores is stochastic with an exactly zero upper triangle") {
  const AttentionMatrix a = softmax_rows(testutil::random_matrix(5, 5, 7, 3.0), true);
  for (int i = 0; i < 5; ++i) {
    CHECK(std::abs(a.weights.row(i).sum() - 1.0) <= 1e-9);
    for (int j = i + 1; j < 5; ++j) CHECK(a.weights(i, j) == 0.0);
  }
  CHECK(is_causal(a.weights));
  CHECK(is_row_stochastic(a.weights));
}

TEST_CASE("softmax survives large scores and rejects non-finite rows") {
  Matrix s(2, 2);
  s << 1000.0, -1000.0, 800.0, 1000.0;
  const AttentionMatrix a = softmax_rows(s, false);
  CHECK(a.weights.allFinite());
  s(1, 0) = std::nan("");
  try {
    softmax_rows(s, false);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
}

TEST_CASE("head attention: zero W_QK is uniform, T=1 is [[1]]") {
  const TokenSequence x = testutil::random_sequence(4, 6, 3);
  const AttentionMatrix a = compute_head_attention(x.embeddings, Matrix::Zero(4, 4));
  for (int i = 0; i < 6; ++i) CHECK(a.weights(i, 0) == doctest::Approx(1.0 / (i + 1)));
  const AttentionMatrix one = compute_head_attention(x.prefix(1).embeddings, Matrix::Identity(4, 4));
  CHECK(one.weights.rows() == 1);
  CHECK(one.weights(0, 0) == 1.0);
  CHECK_THROWS_AS(compute_head_attention(x.embeddings, Matrix::Zero(3, 3)), Error);
}

TEST_CASE("head attention matches a straight-line reference") {
  const TokenSequence x = testutil::random_sequence(4, 6, 3);
  const Matrix w = testutil::random_matrix(4, 4, 33);
  const AttentionMatrix a = compute_head_attention(x.embeddings, w);
  for (int i = 0; i < 6; ++i) {
    std::vector<double> e(static_cast<std::size_t>(i) + 1);
    double z = 0.0;
    for (int j = 0; j <= i; ++j) {
      double s = 0.0;
      for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q) s += x.embeddings(p, i) * w(p, q) * x.embeddings(q, j);
      e[static_cast<std::size_t>(j)] = std::exp(s / 2.0);
      z += e[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < 6; ++j) {
      const double ref = j <= i ? e[static_cast<std::size_t>(j)] / z : 0.0;
      CHECK(std::abs(a.weights(i, j) - ref) <= 1e-9);
    }
  }
}

namespace {

TinyModel zero_model(std::size_t vocab) {
  ModelParams p;
  p.d = 4;
  p.layers = 1;
  p.heads = 1;
  p.vocab = vocab;
  TinyModel m = build_model(p);
  for (auto& l : m.layers) {
    for (auto& h : l.heads) {
      h.w_qk.setZero();
      h.w_v.setZero();
    }
    l.w_f1.setZero();
    l.w_f2.setZero();
  }
  m.readout.setZero();
  return m;
}

TinyModel small_model(std::size_t layers = 2, std::size_t heads = 2, std::size_t d = 8,
                      std::uint64_t seed = 11) {
  ModelParams p;
  p.d = d;
  p.layers = layers;
  p.heads = heads;
  p.vocab = 16;
  p.seed = seed;
  return build_model(p);
}

}  // namespace

TEST_CASE("all-zero model predicts uniformly") {
  const TinyModel m = zero_model(10);
  TokenSequence x = testutil::random_sequence(4, 3, 1);
  x.embeddings.setZero();
  const ForwardResult r = forward_decode_step(m, x);
  for (Eigen::Index v = 0; v < 10; ++v) CHECK(r.next_token_probs[v] == doctest::Approx(0.1));
}

TEST_CASE("self-override is the identity and the result has L*H matrices") {
  const TinyModel m = small_model();
  const TokenSequence x = testutil::random_sequence(8, 5, 2);
  const ForwardResult base = forward_decode_step(m, x);
  CHECK(base.attention.size() == 4);
  CHECK(std::abs(base.next_token_probs.sum() - 1.0) <= 1e-9);
  ForwardOptions opt;
  for (const auto& a : base.attention) opt.overrides.emplace(a.head, a);
  const ForwardResult again = forward_decode_step(m, x, opt);
  CHECK((again.next_token_probs - base.next_token_probs).cwiseAbs().maxCoeff() <= 1e-12);
  for (const auto& a : base.attention) {
    CHECK(is_causal(a.weights));
    CHECK(is_row_stochastic(a.weights));
  }
}

TEST_CASE("override shape mismatch is rejected") {
  const TinyModel m = small_model();
  const TokenSequence x = testutil::random_sequence(8, 5, 2);
  ForwardOptions opt;
  opt.overrides.emplace(HeadId{0, 0}, AttentionMatrix{Matrix::Identity(4, 4), {0, 0}, true, true});
  CHECK_THROWS_AS(forward_decode_step(m, x, opt), Error);
}

TEST_CASE("model construction is bitwise deterministic") {
  const TinyModel a = small_model(2, 2, 8, 5);
  const TinyModel b = small_model(2, 2, 8, 5);
  const TinyModel c = small_model(2, 2, 8, 6);
  CHECK(a.readout == b.readout);
  CHECK(a.layers[1].heads[1].w_qk == b.layers[1].heads[1].w_qk);
  CHECK(a.embedding_table == b.embedding_table);
  CHECK(a.readout != c.readout);
}

TEST_CASE("H must divide d") {
  ModelParams p;
  p.d = 6;
  p.heads = 4;
  CHECK_THROWS_AS(build_model(p), Error);
}

TEST_CASE("generation: one step, determinism, identity hook") {
  const TinyModel m = small_model();
  const TokenSequence x = testutil::random_sequence(8, 5, 9);
  CHECK(generate_tokens(m, x, 1).steps.size() == 1);
  const DecodeTrace a = generate_tokens(m, x, 6);
  const DecodeTrace b = generate_tokens(m, x, 6);
  const DecodeTrace c = generate_tokens(m, x, 6, [](const HookContext&, AttentionMatrix&) {});
  CHECK(a.tokens() == b.tokens());
  CHECK(a.tokens() == c.tokens());
  for (std::size_t s = 0; s < a.steps.size(); ++s) {
    CHECK(a.steps[s].probs == b.steps[s].probs);
    CHECK(a.steps[s].probs == c.steps[s].probs);
    CHECK(a.steps[s].attention.front().size() == 5 + s);
  }
  CHECK(a.final_sequence.length() == 11);
  CHECK(a.final_sequence.modality.back() == Modality::text);
  CHECK_THROWS_AS(generate_tokens(m, x, 0), Error);
}

TEST_CASE("scaling the readout leaves greedy tokens unchanged") {
  TinyModel m = small_model(2, 2, 8, 4);
  const TokenSequence x = testutil::random_sequence(8, 6, 4);
  const auto base = generate_tokens(m, x, 8).tokens();
  m.readout *= 3.7;
  CHECK(generate_tokens(m, x, 8).tokens() == base);
}

TEST_CASE("prompts carry the requested modality layout") {
  const TinyModel m = small_model();
  PromptSpec spec{2, 5, 3, 17};
  const TokenSequence x = make_prompt(m, spec);
  CHECK(x.length() == 10);
  CHECK(x.positions(Modality::visual).size() == 5);
  CHECK(x.modality[1] == Modality::text);
  CHECK(x.modality[2] == Modality::visual);
  CHECK(x.token_ids[3] == kNoToken);
  CHECK(x.token_ids[9] >= 0);
}
