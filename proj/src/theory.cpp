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

#include "airlens/theory.hpp"

#include "airlens/error.hpp"
#include "airlens/random.hpp"

#include <cmath>
#include <limits>

namespace airlens {

std::string_view to_string(WalkConvention c) noexcept {
  return c == WalkConvention::x1_zero ? "x1-deterministic-zero" : "x1-gaussian";
}

WalkConvention walk_convention_from_string(std::string_view s) {
  if (s == "x1-deterministic-zero") return WalkConvention::x1_zero;
  if (s == "x1-gaussian") return WalkConvention::x1_gaussian;
  detail::raise(ErrorKind::config, "unknown walk convention '", s, "'");
}

std::string_view to_string(Regime r) noexcept {
  switch (r) {
    case Regime::localized:
      return "localized";
    case Regime::uniform:
      return "uniform";
    case Regime::indeterminate:
      break;
  }
  return "indeterminate";
}

void WalkSpec::validate() const {
  AIRLENS_REQUIRE(d >= 1 && T >= 1, ErrorKind::invalid_argument, "walk needs d >= 1 and T >= 1");
  const auto dd = static_cast<Eigen::Index>(d);
  AIRLENS_REQUIRE(sigma.rows() == dd && sigma.cols() == dd && w_qk.rows() == dd && w_qk.cols() == dd,
                  ErrorKind::invalid_argument, "Sigma and W_QK must be ", d, "x", d);
  AIRLENS_REQUIRE(sigma.allFinite() && w_qk.allFinite(), ErrorKind::invalid_argument,
                  "walk matrices must be finite");
  psd_sqrt(sigma);
}

Matrix WalkSpec::effective_w_qk() const {
  return symmetrized ? Matrix(0.5 * (w_qk + w_qk.transpose())) : w_qk;
}

Matrix WalkSpec::w() const { return effective_w_qk() * sigma; }

double WalkSpec::trace_w() const { return w().trace(); }

double WalkSpec::trace_w2() const {
  const Matrix m = w();
  return (m * m).trace();
}

double WalkSpec::step_count(std::size_t i) const {
  return convention == WalkConvention::x1_zero ? static_cast<double>(i) - 1.0
                                               : static_cast<double>(i);
}

WalkSpec random_walk_spec(std::size_t d, std::size_t T, std::uint64_t seed,
                          std::optional<double> trace_w, double spread) {
  AIRLENS_REQUIRE(d >= 1 && T >= 2, ErrorKind::invalid_argument, "walk spec needs d >= 1 and T >= 2");
  const auto n = static_cast<Eigen::Index>(d);
  const double dd = static_cast<double>(d);
  Rng rng(seed);
  Matrix g(n, n), h(n, n);
  rng.fill_normal(g);
  rng.fill_normal(h);
  WalkSpec s;
  s.d = d;
  s.T = T;
  s.sigma = h * h.transpose() / dd + 0.5 * Matrix::Identity(n, n);
  s.sigma = 0.5 * (s.sigma + s.sigma.transpose()).eval();
  s.sigma *= dd / s.sigma.trace();
  s.w_qk = spread * (g + g.transpose()) / std::sqrt(2.0 * dd);
  if (trace_w) {
    const double alpha = (*trace_w - (s.w_qk * s.sigma).trace()) / s.sigma.trace();
    s.w_qk += alpha * Matrix::Identity(n, n);
  }
  s.validate();
  return s;
}

Matrix psd_sqrt(const Matrix& sigma) {
  AIRLENS_REQUIRE(sigma.rows() == sigma.cols(), ErrorKind::invalid_argument,
                  "covariance must be square");
  AIRLENS_REQUIRE((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
                  ErrorKind::invalid_argument, "covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  Vector values = eig.eigenvalues();
  AIRLENS_REQUIRE(values.minCoeff() >= -1e-10, ErrorKind::invalid_argument,
                  "covariance is not positive semi-definite (eigenvalue ", values.minCoeff(), ")");
  for (Eigen::Index k = 0; k < values.size(); ++k) values[k] = values[k] < 1e-10 ? 0.0 : std::sqrt(values[k]);
  return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix sample_walk(const WalkSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Matrix root = psd_sqrt(spec.sigma);
  const auto d = static_cast<Eigen::Index>(spec.d);
  Rng rng(seed);
  Matrix x(d, static_cast<Eigen::Index>(spec.T));
  Vector z(d);
  Vector cur = Vector::Zero(d);
  if (spec.convention == WalkConvention::x1_gaussian) {
    rng.fill_normal(z);
    cur = root * z;
  }
  x.col(0) = cur;
  for (Eigen::Index t = 1; t < x.cols(); ++t) {
    rng.fill_normal(z);
    cur += root * z;
    x.col(t) = cur;
  }
  return x;
}

Vector SoftmaxLinearization::approximate(const Vector& omega) const {
  AIRLENS_REQUIRE(omega.size() == gamma.cols(), ErrorKind::invalid_argument, "omega has length ",
                  omega.size(), ", expected ", gamma.cols());
  return (gamma * omega + gamma0).cwiseMax(0.0).cwiseMin(1.0);
}

SoftmaxLinearization softmax_linearization(std::size_t T) {
  AIRLENS_REQUIRE(T >= 1, ErrorKind::invalid_argument, "T must be at least 1");
  const auto n = static_cast<Eigen::Index>(T);
  const double t = static_cast<double>(T);
  SoftmaxLinearization lin;
  lin.gamma = Matrix::Constant(n, n, -1.0 / (t * t));
  lin.gamma.diagonal().array() += 1.0 / t;
  lin.gamma0 = Vector::Constant(n, 1.0 / t);
  return lin;
}

namespace {

void require_symmetric(const Matrix& w) {
  AIRLENS_REQUIRE(w.rows() == w.cols(), ErrorKind::invalid_argument, "W must be square");
  AIRLENS_REQUIRE((w - w.transpose()).cwiseAbs().maxCoeff() <= 1e-12, ErrorKind::invalid_argument,
                  "W must be symmetric; symmetrise it first");
}

struct Traces {
  double t1 = 0.0;
  double t2 = 0.0;
};

Traces traces(const Matrix& w, const Matrix& sigma) {
  require_symmetric(w);
  AIRLENS_REQUIRE(sigma.rows() == w.rows() && sigma.cols() == w.cols(), ErrorKind::invalid_argument,
                  "W and Sigma differ in shape");
  const Matrix ws = w * sigma;
  return {ws.trace(), (ws * ws).trace()};
}

}  // namespace

QuadraticMoments gaussian_quadratic_moments(const Matrix& w, const Matrix& sigma, const Vector& mu,
                                            const Vector& a) {
  const Traces t = traces(w, sigma);
  AIRLENS_REQUIRE(mu.size() == w.rows() && a.size() == w.rows(), ErrorKind::invalid_argument,
                  "mu and a must have length ", w.rows());
  const double mwm = mu.dot(w * mu);
  const double mwswm = mu.dot(w * sigma * w * mu);
  QuadraticMoments m;
  m.quadratic = t.t1 + mwm;
  m.second_moment = sigma + mu * mu.transpose();
  m.cubic = 2.0 * a.dot(w * sigma * w * mu) + a.dot(w * mu) * (t.t1 + mwm);
  m.quartic = 2.0 * t.t2 + t.t1 * t.t1 + 4.0 * mwswm + 2.0 * t.t1 * mwm + mwm * mwm;
  return m;
}

WalkMoments walk_quadratic_moments(const Matrix& w, const Matrix& sigma, std::size_t i,
                                   std::size_t j, WalkConvention convention) {
  AIRLENS_REQUIRE(i >= 1 && i <= j, ErrorKind::invalid_argument, "walk moments need 1 <= i <= j (got i = ",
                  i, ", j = ", j, ")");
  const Traces t = traces(w, sigma);
  const double off = convention == WalkConvention::x1_zero ? 1.0 : 0.0;
  const double ci = static_cast<double>(i) - off;
  const double cj = static_cast<double>(j) - off;
  WalkMoments m;
  m.quadratic = ci * t.t1;
  m.quartic_same = ci * ci * (2.0 * t.t2 + t.t1 * t.t1);
  m.quartic_cross = 2.0 * ci * ci * t.t2 + ci * cj * t.t1 * t.t1;
  m.mixed = ci * cj * (2.0 * t.t2 + t.t1 * t.t1);
  return m;
}

WalkMoments polynomial_walk_moments(const Matrix& w, const Matrix& sigma, std::size_t i,
                                   std::size_t j) {
  AIRLENS_REQUIRE(i >= 1 && i <= j, ErrorKind::invalid_argument, "walk moments need 1 <= i <= j (got i = ",
                  i, ", j = ", j, ")");
  const Traces t = traces(w, sigma);
  const double a = static_cast<double>(i);
  const double b = static_cast<double>(j);
  const double same = a * a - 2.0 * a + 2.0;
  WalkMoments m;
  m.quadratic = (a - 1.0) * t.t1;
  m.quartic_same = same * (2.0 * t.t2 + t.t1 * t.t1);
  m.quartic_cross = (a * a + a * b - 3.0 * a - b + 4.0) * t.t2 + same * t.t1 * t.t1;
  m.mixed = (a * b - a - b + 2.0) * (2.0 * t.t2 + t.t1 * t.t1);
  return m;
}

namespace {

void require_index(const WalkSpec& spec, std::size_t i) {
  AIRLENS_REQUIRE(i >= 1 && i <= spec.T, ErrorKind::invalid_argument, "token index ", i,
                  " outside 1..", spec.T);
}

}  // namespace

MeanVariance lemma2_mu_v(const WalkSpec& spec, std::size_t i) {
  spec.validate();
  require_index(spec, i);
  const double theta = static_cast<double>(i) / static_cast<double>(spec.T);
  const double d = static_cast<double>(spec.d);
  return {(theta - 0.5) * spec.trace_w() / std::sqrt(d),
          (2.0 * theta * theta + 7.0 / 12.0) * spec.trace_w2() / d};
}

MeanVariance propagation_moments_exact(const WalkSpec& spec, std::size_t i) {
  spec.validate();
  require_index(spec, i);
  const std::size_t n = spec.T;
  const double t = static_cast<double>(n);
  std::vector<double> g(n, -1.0 / (t * t));
  g[i - 1] += 1.0 / t;
  std::vector<double> c(n);
  for (std::size_t k = 0; k < n; ++k) c[k] = spec.step_count(k + 1);
  const double c_last = c[n - 1];

  // Cov(u_j'Bu_T, u_k'Bu_T) = c_min (c_max + c_T) tr(B^2) for a standard walk u.
  double mean = 0.0;
  double quad = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    mean += g[j] * c[j];
    double row = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double lo = std::min(c[j], c[k]);
      const double hi = std::max(c[j], c[k]);
      row += g[k] * lo * (hi + c_last);
    }
    quad += g[j] * row;
  }
  const double d = static_cast<double>(spec.d);
  return {mean * spec.trace_w() / std::sqrt(d) + 1.0 / t, quad * spec.trace_w2() / d};
}

double corrected_leading_variance(const WalkSpec& spec, std::size_t i) {
  spec.validate();
  require_index(spec, i);
  const double theta = static_cast<double>(i) / static_cast<double>(spec.T);
  return (2.0 * (theta - 0.5) * (theta - 0.5) + 1.0 / 12.0) * spec.trace_w2() /
         static_cast<double>(spec.d);
}

double rho_index(double mu, double v) {
  AIRLENS_REQUIRE(v > 0.0 && std::isfinite(v), ErrorKind::invalid_argument,
                  "rho needs a positive variance (got ", v, ")");
  const double s = std::sqrt(2.0 * v);
  return 0.5 * (std::erf((1.0 - mu) / s) + std::erf(mu / s));
}

double rho_theta(double trace_w, double trace_w2, std::size_t d, double theta) {
  AIRLENS_REQUIRE(trace_w2 > 0.0, ErrorKind::invalid_argument, "rho(theta) needs tr(W^2) > 0");
  AIRLENS_REQUIRE(theta >= 0.0 && theta <= 1.0, ErrorKind::invalid_argument, "theta = ", theta,
                  " outside [0, 1]");
  const double scale = std::sqrt(trace_w2) * std::sqrt(4.0 * theta * theta + 7.0 / 6.0);
  const double shift = (theta - 0.5) * trace_w;
  const double r = 0.5 * (std::erf(shift / scale) - std::erf((shift - std::sqrt(static_cast<double>(d))) / scale));
  return std::clamp(r, 0.0, 1.0);
}

double rho_theta(const WalkSpec& spec, double theta) {
  spec.validate();
  return rho_theta(spec.trace_w(), spec.trace_w2(), spec.d, theta);
}

double peak_theta(double trace_w, std::size_t d) {
  if (trace_w == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return 0.5 + std::sqrt(static_cast<double>(d)) / (2.0 * trace_w);
}

double numeric_peak(const WalkSpec& spec, std::size_t points) {
  AIRLENS_REQUIRE(points >= 2, ErrorKind::invalid_argument, "grid needs at least two points");
  spec.validate();
  const double t1 = spec.trace_w();
  const double t2 = spec.trace_w2();
  double best_theta = 0.0;
  double best = -1.0;
  for (std::size_t k = 0; k < points; ++k) {
    const double theta = static_cast<double>(k) / static_cast<double>(points - 1);
    const double r = rho_theta(t1, t2, spec.d, theta);
    if (r > best) {
      best = r;
      best_theta = theta;
    }
  }
  return best_theta;
}

std::vector<RhoPoint> rho_sweep(const WalkSpec& spec, std::size_t points) {
  AIRLENS_REQUIRE(points >= 2, ErrorKind::invalid_argument, "sweep needs at least two points");
  spec.validate();
  const double t1 = spec.trace_w();
  const double t2 = spec.trace_w2();
  std::vector<RhoPoint> out(points);
  for (std::size_t k = 0; k < points; ++k) {
    const double theta = static_cast<double>(k) / static_cast<double>(points - 1);
    out[k] = {theta, rho_theta(t1, t2, spec.d, theta)};
  }
  return out;
}

RowStats row_variance_entropy(const Matrix& a, std::size_t row) {
  AIRLENS_REQUIRE(row < static_cast<std::size_t>(a.rows()), ErrorKind::invalid_argument, "row ", row,
                  " out of range");
  const auto r = a.row(static_cast<Eigen::Index>(row));
  AIRLENS_REQUIRE(r.minCoeff() >= 0.0 && std::abs(r.sum() - 1.0) <= 1e-9, ErrorKind::precondition,
                  "row ", row, " is not a probability distribution");
  const double t = static_cast<double>(r.size());
  RowStats s;
  for (Eigen::Index j = 0; j < r.size(); ++j) {
    const double p = r[j];
    s.variance += (p - 1.0 / t) * (p - 1.0 / t);
    if (p > 0.0) s.entropy -= p * std::log(p);
  }
  s.variance /= t;
  return s;
}

RegimeReport classify_regime(const WalkSpec& spec, double uniform_tolerance) {
  spec.validate();
  RegimeReport r;
  r.trace_w = spec.trace_w();
  r.trace_w2 = spec.trace_w2();
  AIRLENS_REQUIRE(r.trace_w2 > 0.0, ErrorKind::invalid_argument, "regime needs tr(W^2) > 0");
  r.theta_star = peak_theta(r.trace_w, spec.d);
  const double root_d = std::sqrt(static_cast<double>(spec.d));
  if (std::abs(r.trace_w) >= root_d && r.theta_star > 0.0 && r.theta_star < 1.0)
    r.regime = Regime::localized;
  else if (std::abs(r.trace_w) <= uniform_tolerance * root_d)
    r.regime = Regime::uniform;
  return r;
}

}  // namespace airlens
