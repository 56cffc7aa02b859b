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

#include "airlens/theory_mc.hpp"

#include "airlens/error.hpp"
#include "airlens/random.hpp"

#include <cmath>

namespace airlens {

void SampleStats::add(double x) {
  SampleStats one;
  one.n_ = 1;
  one.mean_ = x;
  merge(one);
}

void SampleStats::merge(const SampleStats& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(o.n_);
  const double n = na + nb;
  const double delta = o.mean_ - mean_;
  const double d2 = delta * delta;
  const double m2 = m2_ + o.m2_ + d2 * na * nb / n;
  const double m3 = m3_ + o.m3_ + d2 * delta * na * nb * (na - nb) / (n * n) +
                    3.0 * delta * (na * o.m2_ - nb * m2_) / n;
  const double m4 = m4_ + o.m4_ + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                    6.0 * d2 * (na * na * o.m2_ + nb * nb * m2_) / (n * n) +
                    4.0 * delta * (na * o.m3_ - nb * m3_) / n;
  mean_ += delta * nb / n;
  m2_ = m2;
  m3_ = m3;
  m4_ = m4;
  n_ += o.n_;
}

double SampleStats::variance() const noexcept {
  return n_ == 0 ? 0.0 : m2_ / static_cast<double>(n_);
}

double SampleStats::fourth_central_moment() const noexcept {
  return n_ == 0 ? 0.0 : m4_ / static_cast<double>(n_);
}

double SampleStats::se_mean() const noexcept {
  return n_ < 2 ? 0.0 : std::sqrt(m2_ / static_cast<double>(n_ - 1) / static_cast<double>(n_));
}

double SampleStats::se_variance() const noexcept {
  if (n_ < 2) return 0.0;
  const double v = variance();
  return std::sqrt(std::max(0.0, fourth_central_moment() - v * v) / static_cast<double>(n_));
}

TheoryResult compare(std::string check, double analytic, double estimate, double standard_error,
                     std::size_t samples, double allowance, double z) {
  TheoryResult r;
  r.check = std::move(check);
  r.analytic = analytic;
  r.estimate = estimate;
  r.standard_error = standard_error;
  r.samples = samples;
  r.z = z;
  r.allowance = allowance;
  r.agree = std::abs(analytic - estimate) <= z * standard_error + allowance;
  return r;
}

namespace {

// Runs body(rng, count) over fixed-size blocks, each with its own stream.
template <typename Acc, typename Body>
Acc run_blocks(std::size_t samples, std::uint64_t seed, Body body) {
  AIRLENS_REQUIRE(samples >= 1, ErrorKind::invalid_argument, "Monte Carlo needs samples >= 1");
  Acc total;
  for (std::size_t start = 0, block = 0; start < samples; start += kMonteCarloBlock, ++block) {
    Rng rng(derive_seed(seed, block));
    Acc part;
    body(rng, std::min(kMonteCarloBlock, samples - start), part);
    total.merge(part);
  }
  return total;
}

}  // namespace

namespace {

struct QuadAcc {
  QuadraticMomentsMC r;
  void merge(const QuadAcc& o) {
    r.quadratic.merge(o.r.quadratic);
    r.probe.merge(o.r.probe);
    r.cubic.merge(o.r.cubic);
    r.quartic.merge(o.r.quartic);
  }
};

struct WalkAcc {
  WalkMomentsMC r;
  void merge(const WalkAcc& o) {
    r.quadratic.merge(o.r.quadratic);
    r.quartic_same.merge(o.r.quartic_same);
    r.quartic_cross.merge(o.r.quartic_cross);
    r.mixed.merge(o.r.mixed);
  }
};

struct PropAcc {
  PropagationMC r;
  void merge(const PropAcc& o) {
    r.value.merge(o.r.value);
    r.in_range += o.r.in_range;
  }
  void add(double v) {
    r.value.add(v);
    if (v >= 0.0 && v <= 1.0) ++r.in_range;
  }
};

}  // namespace

QuadraticMomentsMC mc_gaussian_quadratic(const Matrix& w, const Matrix& sigma, const Vector& mu,
                                         const Vector& a, const Vector& probe, std::size_t samples,
                                         std::uint64_t seed) {
  const Eigen::Index d = w.rows();
  AIRLENS_REQUIRE(w.cols() == d && sigma.rows() == d && mu.size() == d && a.size() == d &&
                      probe.size() == d,
                  ErrorKind::invalid_argument, "inconsistent dimensions for the quadratic-form oracle");
  const Matrix root = psd_sqrt(sigma);
  const Vector wa = w.transpose() * a;
  return run_blocks<QuadAcc>(samples, seed, [&](Rng& rng, std::size_t n, QuadAcc& acc) {
           Vector z(d);
           for (std::size_t s = 0; s < n; ++s) {
             rng.fill_normal(z);
             const Vector x = mu + root * z;
             const double q = x.dot(w * x);
             const double b = probe.dot(x);
             acc.r.quadratic.add(q);
             acc.r.probe.add(b * b);
             acc.r.cubic.add(wa.dot(x) * q);
             acc.r.quartic.add(q * q);
           }
         }).r;
}

WalkMomentsMC mc_walk_moments(const Matrix& w, const Matrix& sigma, std::size_t i, std::size_t j,
                              std::size_t samples, std::uint64_t seed, WalkConvention convention) {
  AIRLENS_REQUIRE(i >= 1 && i <= j, ErrorKind::invalid_argument, "walk moments need 1 <= i <= j");
  const Eigen::Index d = w.rows();
  const Matrix root = psd_sqrt(sigma);
  const double off = convention == WalkConvention::x1_zero ? 1.0 : 0.0;
  const double si = std::sqrt(static_cast<double>(i) - off);
  const double sj = std::sqrt(static_cast<double>(j - i));
  return run_blocks<WalkAcc>(samples, seed, [&](Rng& rng, std::size_t n, WalkAcc& acc) {
           Vector z(d);
           for (std::size_t s = 0; s < n; ++s) {
             rng.fill_normal(z);
             const Vector xi = si * (root * z);
             rng.fill_normal(z);
             const Vector xj = xi + sj * (root * z);
             const Vector wxj = w * xj;
             const double qi = xi.dot(w * xi);
             const double qj = xj.dot(wxj);
             acc.r.quadratic.add(qi);
             acc.r.quartic_same.add(qi * qi);
             acc.r.quartic_cross.add(qi * qj);
             acc.r.mixed.add(xi.dot(wxj) * qj);
           }
         }).r;
}

double PropagationMC::rho() const noexcept {
  const auto n = value.count();
  return n == 0 ? 0.0 : static_cast<double>(in_range) / static_cast<double>(n);
}

double PropagationMC::rho_se() const noexcept {
  const auto n = value.count();
  if (n == 0) return 0.0;
  const double p = rho();
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

PropagationMC mc_propagation(const WalkSpec& spec, std::size_t i, std::size_t samples,
                             std::uint64_t seed) {
  spec.validate();
  AIRLENS_REQUIRE(i >= 1 && i <= spec.T, ErrorKind::invalid_argument, "token index ", i,
                  " outside 1..", spec.T);
  const std::size_t n_tok = spec.T;
  const double t = static_cast<double>(n_tok);

  // Per coordinate of a standard walk, (u_i, sum_j u_j, u_T) is Gaussian with
  // Cov(u_j, u_k) = c_min(j, k).
  std::vector<double> c(n_tok);
  for (std::size_t k = 0; k < n_tok; ++k) c[k] = spec.step_count(k + 1);
  double ci_sum = 0.0, sum_sum = 0.0, last_sum = 0.0;
  for (std::size_t j = 0; j < n_tok; ++j) {
    ci_sum += std::min(c[i - 1], c[j]);
    last_sum += c[j];
    for (std::size_t k = 0; k < n_tok; ++k) sum_sum += std::min(c[j], c[k]);
  }
  Matrix k3(3, 3);
  k3 << c[i - 1], ci_sum, c[i - 1], ci_sum, sum_sum, last_sum, c[i - 1], last_sum, c[n_tok - 1];
  const Matrix k_root = psd_sqrt(k3);

  const Matrix root = psd_sqrt(spec.sigma);
  const Matrix b = root * spec.w_qk * root;  // the actual W_QK: omega is what attention sees
  const auto d = static_cast<Eigen::Index>(spec.d);
  const double inv_root_d = 1.0 / std::sqrt(static_cast<double>(spec.d));

  return run_blocks<PropAcc>(samples, seed, [&](Rng& rng, std::size_t n, PropAcc& acc) {
           Matrix z(3, d);
           for (std::size_t s = 0; s < n; ++s) {
             rng.fill_normal(z);
             const Matrix u = k_root * z;  // rows: u_i, sum, u_T
             const Vector by = b * u.row(2).transpose();
             const double v = (u.row(0).dot(by) / t - u.row(1).dot(by) / (t * t)) * inv_root_d + 1.0 / t;
             acc.add(v);
           }
         }).r;
}

PropagationMC mc_propagation_full_walks(const WalkSpec& spec, std::size_t i, std::size_t samples,
                                        std::uint64_t seed) {
  spec.validate();
  AIRLENS_REQUIRE(i >= 1 && i <= spec.T, ErrorKind::invalid_argument, "token index ", i,
                  " outside 1..", spec.T);
  const SoftmaxLinearization lin = softmax_linearization(spec.T);
  const double inv_root_d = 1.0 / std::sqrt(static_cast<double>(spec.d));
  PropAcc acc;
  for (std::size_t s = 0; s < samples; ++s) {
    const Matrix x = sample_walk(spec, derive_seed(seed, s));
    const Vector omega = x.transpose() * (spec.w_qk * x.col(x.cols() - 1)) * inv_root_d;
    const auto row = static_cast<Eigen::Index>(i - 1);
    acc.add(lin.gamma.row(row).dot(omega) + lin.gamma0[row]);
  }
  return acc.r;
}

TheoryResult monte_carlo_rho(const WalkSpec& spec, std::size_t i, std::size_t samples,
                             std::uint64_t seed, double allowance) {
  AIRLENS_REQUIRE(samples >= 1000, ErrorKind::precondition, "monte_carlo_rho needs at least 1000 samples");
  const PropagationMC mc = mc_propagation(spec, i, samples, seed);
  const double theta = static_cast<double>(i) / static_cast<double>(spec.T);
  double analytic = 1.0;
  if (spec.trace_w2() > 0.0) analytic = rho_theta(spec, theta);
  return compare("rho(i=" + std::to_string(i) + ")", analytic, mc.rho(), mc.rho_se(), samples,
                 allowance);
}

}  // namespace airlens
