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

#include "airlens/types.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace airlens {

/// Where the walk starts: x_1 = 0 (so Cov(x_i) = (i-1) Sigma, the convention
/// under which the closed-form moments hold) or x_1 ~ N(0, Sigma) as in the
/// assumption's text (Cov(x_i) = i Sigma).
enum class WalkConvention { x1_zero, x1_gaussian };

std::string_view to_string(WalkConvention c) noexcept;
WalkConvention walk_convention_from_string(std::string_view s);

struct WalkSpec {
  std::size_t d = 0;
  std::size_t T = 0;
  Matrix sigma;
  Matrix w_qk;
  bool symmetrized = true;
  WalkConvention convention = WalkConvention::x1_zero;

  /// Throws ErrorKind::invalid_argument on bad shapes, asymmetric Sigma
  /// (beyond 1e-12) or a negative eigenvalue below -1e-10.
  void validate() const;
  /// (W_QK + W_QK^T)/2 when symmetrized, W_QK otherwise.
  Matrix effective_w_qk() const;
  /// W = W_QK Sigma.
  Matrix w() const;
  double trace_w() const;
  double trace_w2() const;
  /// Variance multiplier of x_i (1-based): i-1 or i.
  double step_count(std::size_t i) const;
};

/// Seeded spec: Sigma = (G G'/d + I/2) scaled to trace d, W_QK = S + alpha I
/// with S symmetric, entries of variance spread^2/d. alpha is 0 unless
/// `trace_w` is given, in which case it is chosen so tr(W_QK Sigma) hits it.
WalkSpec random_walk_spec(std::size_t d, std::size_t T, std::uint64_t seed,
                          std::optional<double> trace_w = std::nullopt, double spread = 1.0);

/// Symmetric square root with eigenvalues below 1e-10 clamped to zero.
/// Throws ErrorKind::invalid_argument when Sigma is not PSD.
Matrix psd_sqrt(const Matrix& sigma);

/// One walk as a d x T matrix.
Matrix sample_walk(const WalkSpec& spec, std::uint64_t seed);

/// Taylor coefficients of softmax at the origin: row i of gamma is
/// e_i/T - 1/T^2, gamma0 is 1/T everywhere.
struct SoftmaxLinearization {
  Matrix gamma;
  Vector gamma0;

  /// The clipped affine approximation max(0, min(1, <gamma^i, w> + gamma0^i)).
  Vector approximate(const Vector& omega) const;
};

SoftmaxLinearization softmax_linearization(std::size_t T);

/// Moments of quadratic forms of x ~ N(mu, Sigma) with symmetric W.
struct QuadraticMoments {
  double quadratic = 0.0;  // E[x'Wx]
  Matrix second_moment;    // E[xx']
  double cubic = 0.0;      // E[a'Wx x'Wx]
  double quartic = 0.0;    // E[x'Wx x'Wx]
};

/// Throws ErrorKind::invalid_argument for asymmetric W (callers symmetrise).
QuadraticMoments gaussian_quadratic_moments(const Matrix& w, const Matrix& sigma, const Vector& mu,
                                            const Vector& a);

/// Walk moments for 1 <= i <= j.
struct WalkMoments {
  double quadratic = 0.0;      // E[x_i'Wx_i]
  double quartic_same = 0.0;   // E[(x_i'Wx_i)^2]
  double quartic_cross = 0.0;  // E[x_i'Wx_i x_j'Wx_j]
  double mixed = 0.0;          // E[x_i'Wx_j x_j'Wx_j]
};

/// Exact moments of the walk (derived by splitting x_j = x_i + independent
/// increment). With c_i the step count: c_i t1, c_i^2 (2 t2 + t1^2),
/// 2 c_i^2 t2 + c_i c_j t1^2 and c_i c_j (2 t2 + t1^2), where t1 = tr(W Sigma)
/// and t2 = tr(W Sigma W Sigma).
WalkMoments walk_quadratic_moments(const Matrix& w, const Matrix& sigma, std::size_t i,
                                   std::size_t j,
                                   WalkConvention convention = WalkConvention::x1_zero);

/// The closed-form polynomials in circulation: (i-1) t1,
/// (i^2-2i+2)(2t2+t1^2), (i^2+ij-3i-j+4) t2 + (i^2-2i+2) t1^2 and
/// (ij-i-j+2)(2t2+t1^2). Only the first matches a Gaussian walk.
WalkMoments polynomial_walk_moments(const Matrix& w, const Matrix& sigma, std::size_t i,
                                   std::size_t j);

struct MeanVariance {
  double mean = 0.0;
  double variance = 0.0;
};

/// Leading-order mean and variance:
/// mu = (i/T - 1/2) tr(W)/sqrt(d), v = (2 i^2/T^2 + 7/12) tr(W^2)/d.
MeanVariance lemma2_mu_v(const WalkSpec& spec, std::size_t i);

/// Exact finite-T mean and variance of <gamma^i, omega> + gamma0^i for
/// omega = X' W_QK x_T / sqrt(d), using the symmetrised W_QK.
MeanVariance propagation_moments_exact(const WalkSpec& spec, std::size_t i);

/// Leading-order variance implied by the exact moments,
/// (2 (theta - 1/2)^2 + 1/12) tr(W^2)/d. The v of lemma2_mu_v lacks the -2 theta
/// cross term.
double corrected_leading_variance(const WalkSpec& spec, std::size_t i);

/// 1/2 [erf((1 - mu)/sqrt(2v)) + erf(mu/sqrt(2v))]; throws for v <= 0.
double rho_index(double mu, double v);

/// Closed-form propagation probability at theta.
double rho_theta(double trace_w, double trace_w2, std::size_t d, double theta);
double rho_theta(const WalkSpec& spec, double theta);

/// theta* = 1/2 + sqrt(d) / (2 tr(W)).
double peak_theta(double trace_w, std::size_t d);

/// Argmax of rho over a uniform grid of `points` values in [0, 1].
double numeric_peak(const WalkSpec& spec, std::size_t points = 100001);

struct RhoPoint {
  double theta = 0.0;
  double rho = 0.0;
};

std::vector<RhoPoint> rho_sweep(const WalkSpec& spec, std::size_t points = 101);

struct RowStats {
  double variance = 0.0;
  double entropy = 0.0;
};

/// Variance of row entries around 1/T and Shannon entropy (0 log 0 = 0).
/// Throws ErrorKind::precondition when the row is not a distribution.
RowStats row_variance_entropy(const Matrix& a, std::size_t row);

enum class Regime { localized, uniform, indeterminate };

std::string_view to_string(Regime r) noexcept;

struct RegimeReport {
  Regime regime = Regime::indeterminate;
  double trace_w = 0.0;
  double trace_w2 = 0.0;
  double theta_star = 0.0;  // NaN when tr(W) = 0
};

RegimeReport classify_regime(const WalkSpec& spec, double uniform_tolerance = 0.1);

}  // namespace airlens
