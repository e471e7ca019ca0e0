/*
 * Copyright 2026 The clipsgd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "clipsgd/problems.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "clipsgd/clip.hpp"
#include "clipsgd/error.hpp"

namespace clipsgd {

// ---------------------------------------------------------------------------
// Problem

void Problem::check_dim(const Point& x) const {
  if (x.dim() != meta_.dim) {
    throw InvalidInput(name() + ": point has dimension " +
                       std::to_string(x.dim()) + ", problem has " +
                       std::to_string(meta_.dim));
  }
}

double Problem::value(const Point& x) const {
  check_dim(x);
  return do_value(x);
}

Point Problem::grad(const Point& x) const {
  check_dim(x);
  return do_grad(x);
}

Point Problem::sample_grad(const Point& x, KeyedRng& rng) const {
  check_dim(x);
  return do_sample_grad(x, rng);
}

double Problem::variance_at(const Point& x) const {
  check_dim(x);
  return do_variance_at(x);
}

std::optional<Point> Problem::expected_clipped_grad_exact(const Point& x,
                                                          double c) const {
  check_dim(x);
  return do_expected_clipped_grad(x, c);
}

std::optional<Point> Problem::do_expected_clipped_grad(const Point& x,
                                                       double c) const {
  if (deterministic()) return clip(do_grad(x), c);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// QuadraticProblem

namespace {

ProblemMeta quadratic_meta(const std::vector<double>& h, const Point& center) {
  if (h.empty() || h.size() != center.dim()) {
    throw InvalidInput("quadratic: curvature and center must share a "
                       "positive dimension");
  }
  for (double v : h) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidInput("quadratic: curvature must be finite and >= 0");
    }
  }
  if (!center.all_finite()) throw InvalidInput("quadratic: non-finite center");
  ProblemMeta m;
  m.dim = h.size();
  m.L = *std::max_element(h.begin(), h.end());
  m.L0 = m.L;
  m.L1 = 0.0;
  m.mu = *std::min_element(h.begin(), h.end());
  m.sigma_sq = 0.0;
  m.f_star = 0.0;
  m.x_star = center;
  return m;
}

}  // namespace

QuadraticProblem::QuadraticProblem(std::vector<double> curvature, Point center)
    : Problem(quadratic_meta(curvature, center)),
      curvature_(std::move(curvature)),
      center_(std::move(center)) {}

QuadraticProblem QuadraticProblem::isotropic(std::size_t dim, double L) {
  return QuadraticProblem(std::vector<double>(dim, L), Point(dim));
}

double QuadraticProblem::do_value(const Point& x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < x.dim(); ++i) {
    const double d = x[i] - center_[i];
    s += curvature_[i] * d * d;
  }
  return 0.5 * s;
}

Point QuadraticProblem::do_grad(const Point& x) const {
  Point g(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) {
    g[i] = curvature_[i] * (x[i] - center_[i]);
  }
  return g;
}

Point QuadraticProblem::do_sample_grad(const Point& x, KeyedRng&) const {
  return do_grad(x);
}

double QuadraticProblem::do_variance_at(const Point&) const { return 0.0; }

// ---------------------------------------------------------------------------
// BernoulliShiftQuadratic

namespace {

ProblemMeta bernoulli_meta(double a, double p) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw InvalidInput("bernoulli_shift: a must be finite and > 0");
  }
  if (!(p > 0.0 && p < 0.5)) {
    throw InvalidInput("bernoulli_shift: p must lie in (0, 1/2)");
  }
  ProblemMeta m;
  m.dim = 1;
  m.L0 = 1.0;
  m.L1 = 0.0;
  m.L = 1.0;
  m.mu = 1.0;
  m.sigma_sq = p * (1.0 - p) * a * a;
  m.x_star = Point{-p * a};
  m.f_star = 0.5 * p * (1.0 - p) * a * a;
  return m;
}

}  // namespace

BernoulliShiftQuadratic::BernoulliShiftQuadratic(double a, double p)
    : Problem(bernoulli_meta(a, p)), a_(a), p_(p) {}

double BernoulliShiftQuadratic::do_value(const Point& x) const {
  const double v = x[0];
  return 0.5 * (p_ * (v + a_) * (v + a_) + (1.0 - p_) * v * v);
}

Point BernoulliShiftQuadratic::do_grad(const Point& x) const {
  return Point{x[0] + p_ * a_};
}

Point BernoulliShiftQuadratic::do_sample_grad(const Point& x,
                                              KeyedRng& rng) const {
  return Point{rng.uniform() < p_ ? x[0] + a_ : x[0]};
}

double BernoulliShiftQuadratic::do_variance_at(const Point&) const {
  return meta_.sigma_sq;
}

std::optional<Point> BernoulliShiftQuadratic::do_expected_clipped_grad(
    const Point& x, double c) const {
  const double v = x[0];
  return Point{(1.0 - p_) * clip_scalar(v, c) + p_ * clip_scalar(v + a_, c)};
}

// ---------------------------------------------------------------------------
// ChiSquareQuadratic

namespace {

ProblemMeta chi_square_meta(std::size_t dim, double L) {
  if (dim == 0) throw InvalidInput("chi_square: dim must be positive");
  if (!(L > 0.0) || !std::isfinite(L)) {
    throw InvalidInput("chi_square: L must be finite and > 0");
  }
  ProblemMeta m;
  m.dim = dim;
  m.L0 = L;
  m.L1 = 0.0;
  m.L = L;
  m.mu = L;
  m.sigma_sq = 2.0 * static_cast<double>(dim);
  m.x_star = Point(dim, -1.0 / L);
  m.f_star = -static_cast<double>(dim) / (2.0 * L);
  return m;
}

}  // namespace

ChiSquareQuadratic::ChiSquareQuadratic(std::size_t dim, double L)
    : Problem(chi_square_meta(dim, L)), L_(L) {}

double ChiSquareQuadratic::do_value(const Point& x) const {
  double sq = 0.0;
  double lin = 0.0;
  for (double v : x.coords()) {
    sq += v * v;
    lin += v;
  }
  return 0.5 * L_ * sq + lin;
}

Point ChiSquareQuadratic::do_grad(const Point& x) const {
  Point g(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) g[i] = L_ * x[i] + 1.0;
  return g;
}

Point ChiSquareQuadratic::do_sample_grad(const Point& x, KeyedRng& rng) const {
  Point g(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) {
    const double z = rng.normal();
    g[i] = L_ * x[i] + z * z;
  }
  return g;
}

double ChiSquareQuadratic::do_variance_at(const Point&) const {
  return meta_.sigma_sq;
}

// ---------------------------------------------------------------------------
// LogisticRegressionProblem

namespace {

// log(1 + exp(-m)) without overflow.
double softplus_neg(double m) {
  return std::log1p(std::exp(-std::abs(m))) + std::max(0.0, -m);
}

// 1 / (1 + exp(m)).
double sigmoid_neg(double m) {
  if (m >= 0.0) {
    const double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}

ProblemMeta logistic_meta(const Dataset& data, const LogisticOptions& opt) {
  if (data.n() == 0) throw InvalidInput("logistic: empty dataset");
  if (data.dim == 0) throw InvalidInput("logistic: dataset has no features");
  if (data.labels.size() != data.n()) {
    throw InvalidInput("logistic: label count does not match row count");
  }
  if (!(opt.lambda >= 0.0) || !std::isfinite(opt.lambda)) {
    throw InvalidInput("logistic: lambda must be finite and >= 0");
  }
  ProblemMeta m;
  m.dim = data.dim;
  m.L = estimate_L(data) + opt.lambda;
  m.L0 = m.L;
  m.L1 = 0.0;
  m.mu = opt.lambda;
  return m;
}

}  // namespace

Dataset prepare_logistic_data(Dataset data, const LogisticOptions& options) {
  if (options.normalize) {
    for (SparseRow& row : data.rows) {
      double s = 0.0;
      for (double v : row.values) s += v * v;
      if (s > 0.0) {
        const double inv = 1.0 / std::sqrt(s);
        for (double& v : row.values) v *= inv;
      }
    }
  }
  if (options.intercept) {
    const auto bias_index = static_cast<std::uint32_t>(data.dim + 1);
    for (SparseRow& row : data.rows) {
      row.indices.push_back(bias_index);
      row.values.push_back(1.0);
    }
    data.dim += 1;
  }
  return data;
}

LogisticRegressionProblem::LogisticRegressionProblem(Dataset data,
                                                     LogisticOptions options)
    : Problem(ProblemMeta{}),
      data_(prepare_logistic_data(std::move(data), options)),
      options_(options) {
  meta_ = logistic_meta(data_, options_);
  meta_.sigma_sq = do_variance_at(Point(meta_.dim));
  if (options_.solve_optimum) solve_optimum();
}

double LogisticRegressionProblem::margin(std::size_t r, const Point& x) const {
  const SparseRow& row = data_.rows[r];
  double s = 0.0;
  for (std::size_t k = 0; k < row.nnz(); ++k) {
    s += row.values[k] * x[row.indices[k] - 1];
  }
  return static_cast<double>(data_.labels[r]) * s;
}

double LogisticRegressionProblem::row_scale(std::size_t r,
                                            const Point& x) const {
  // d/ds log(1 + exp(-y s)) = -y sigmoid(-y s)
  return -static_cast<double>(data_.labels[r]) * sigmoid_neg(margin(r, x));
}

double LogisticRegressionProblem::do_value(const Point& x) const {
  double s = 0.0;
  for (std::size_t r = 0; r < data_.n(); ++r) s += softplus_neg(margin(r, x));
  return s / static_cast<double>(data_.n()) +
         0.5 * options_.lambda * x.squared_norm();
}

Point LogisticRegressionProblem::do_grad(const Point& x) const {
  Point g(x.dim());
  const double inv_n = 1.0 / static_cast<double>(data_.n());
  for (std::size_t r = 0; r < data_.n(); ++r) {
    const double s = row_scale(r, x) * inv_n;
    const SparseRow& row = data_.rows[r];
    for (std::size_t k = 0; k < row.nnz(); ++k) {
      g[row.indices[k] - 1] += s * row.values[k];
    }
  }
  if (options_.lambda != 0.0) g.add_scaled(options_.lambda, x);
  return g;
}

Point LogisticRegressionProblem::do_sample_grad(const Point& x,
                                                KeyedRng& rng) const {
  const auto r = static_cast<std::size_t>(rng.below(data_.n()));
  Point g(x.dim());
  const double s = row_scale(r, x);
  const SparseRow& row = data_.rows[r];
  for (std::size_t k = 0; k < row.nnz(); ++k) {
    g[row.indices[k] - 1] = s * row.values[k];
  }
  if (options_.lambda != 0.0) g.add_scaled(options_.lambda, x);
  return g;
}

double LogisticRegressionProblem::do_variance_at(const Point& x) const {
  // The ridge term is common to every row and cancels.
  const std::size_t n = data_.n();
  std::vector<double> scale(n);
  Point mean(x.dim());
  for (std::size_t r = 0; r < n; ++r) {
    scale[r] = row_scale(r, x);
    const SparseRow& row = data_.rows[r];
    for (std::size_t k = 0; k < row.nnz(); ++k) {
      mean[row.indices[k] - 1] += scale[r] * row.values[k];
    }
  }
  mean *= 1.0 / static_cast<double>(n);
  const double mean_sq = mean.squared_norm();
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const SparseRow& row = data_.rows[r];
    double row_sq = 0.0;
    double cross = 0.0;
    for (std::size_t k = 0; k < row.nnz(); ++k) {
      const double gi = scale[r] * row.values[k];
      row_sq += gi * gi;
      cross += gi * mean[row.indices[k] - 1];
    }
    total += row_sq - 2.0 * cross + mean_sq;
  }
  return std::max(0.0, total / static_cast<double>(n));
}

void LogisticRegressionProblem::solve_optimum() {
  if (!(options_.lambda > 0.0)) {
    throw InvalidInput("logistic: solving for the optimum requires lambda > 0");
  }
  const std::size_t d = meta_.dim;
  const std::size_t n = data_.n();
  Point x(d);
  double fx = do_value(x);
  for (int it = 0; it < 100; ++it) {
    const Point g = do_grad(x);
    if (g.norm() <= 1e-14) break;
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d, d) * options_.lambda;
    for (std::size_t r = 0; r < n; ++r) {
      const double s = sigmoid_neg(margin(r, x));
      const double w = s * (1.0 - s) / static_cast<double>(n);
      const SparseRow& row = data_.rows[r];
      for (std::size_t i = 0; i < row.nnz(); ++i) {
        for (std::size_t j = 0; j < row.nnz(); ++j) {
          H(row.indices[i] - 1, row.indices[j] - 1) +=
              w * row.values[i] * row.values[j];
        }
      }
    }
    const Eigen::VectorXd rhs =
        Eigen::Map<const Eigen::VectorXd>(g.coords().data(), d);
    const Eigen::VectorXd step = H.ldlt().solve(rhs);
    double t = 1.0;
    Point trial = x;
    double ft = fx;
    for (int ls = 0; ls < 60; ++ls) {
      trial = x;
      for (std::size_t i = 0; i < d; ++i) trial[i] -= t * step[i];
      ft = do_value(trial);
      if (ft <= fx) break;
      t *= 0.5;
    }
    if (!(ft <= fx)) break;
    x = trial;
    fx = ft;
  }
  meta_.x_star = x;
  meta_.f_star = fx;
}

}  // namespace clipsgd
