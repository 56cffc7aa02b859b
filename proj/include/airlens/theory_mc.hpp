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

#include "airlens/theory.hpp"

#include <string>

namespace airlens {

/// Streaming mean and central moments up to order four; partial results
/// merge exactly, so block-seeded runs give the same answer however the
/// blocks are scheduled.
class SampleStats {
 public:
  void add(double x);
  void merge(const SampleStats& other);

  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  /// Population variance.
  double variance() const noexcept;
  double fourth_central_moment() const noexcept;
  double se_mean() const noexcept;
  /// Standard error of the variance estimate, sqrt((m4 - var^2)/n).
  double se_variance() const noexcept;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double m3_ = 0.0;
  double m4_ = 0.0;
};

/// Analytic value against a Monte Carlo estimate; agree means
/// |analytic - estimate| <= z * SE + allowance.
struct TheoryResult {
  std::string check;
  double analytic = 0.0;
  double estimate = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
  double z = 3.0;
  double allowance = 0.0;
  bool agree = false;
};

TheoryResult compare(std::string check, double analytic, double estimate, double standard_error,
                     std::size_t samples, double allowance = 0.0, double z = 3.0);

/// Samples per independently seeded block.
inline constexpr std::size_t kMonteCarloBlock = 8192;

struct QuadraticMomentsMC {
  SampleStats quadratic;
  SampleStats probe;  // (b'x)^2, whose mean is b' E[xx'] b
  SampleStats cubic;
  SampleStats quartic;
};

/// x ~ N(mu, Sigma) sampled as mu + Sigma^{1/2} z.
QuadraticMomentsMC mc_gaussian_quadratic(const Matrix& w, const Matrix& sigma, const Vector& mu,
                                         const Vector& a, const Vector& probe, std::size_t samples,
                                         std::uint64_t seed);

struct WalkMomentsMC {
  SampleStats quadratic;
  SampleStats quartic_same;
  SampleStats quartic_cross;
  SampleStats mixed;
};

/// Samples (x_i, x_j) of the walk: x_i from its marginal, x_j = x_i plus the
/// independent sum of the j - i intervening steps.
WalkMomentsMC mc_walk_moments(const Matrix& w, const Matrix& sigma, std::size_t i, std::size_t j,
                              std::size_t samples, std::uint64_t seed,
                              WalkConvention convention = WalkConvention::x1_zero);

struct PropagationMC {
  SampleStats value;        // <gamma^i, omega> + gamma0^i
  std::size_t in_range = 0;  // value in [0, 1]

  double rho() const noexcept;
  double rho_se() const noexcept;
};

/// Samples <gamma^i, omega> + gamma0^i with omega = X' W_QK x_T / sqrt(d).
/// Only x_i, x_T and the column sum of X enter, so each sample draws those
/// three jointly Gaussian vectors exactly instead of the whole walk.
PropagationMC mc_propagation(const WalkSpec& spec, std::size_t i, std::size_t samples,
                             std::uint64_t seed);

/// Same statistic from full walks via sample_walk; slow, kept as a check on
/// the three-point sampler.
PropagationMC mc_propagation_full_walks(const WalkSpec& spec, std::size_t i, std::size_t samples,
                                        std::uint64_t seed);

/// Empirical rho against rho_theta(i/T), allowance 0.05 by default.
TheoryResult monte_carlo_rho(const WalkSpec& spec, std::size_t i, std::size_t samples,
                             std::uint64_t seed, double allowance = 0.05);

}  // namespace airlens
