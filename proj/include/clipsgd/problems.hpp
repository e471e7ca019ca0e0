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

#ifndef CLIPSGD_PROBLEMS_HPP_
#define CLIPSGD_PROBLEMS_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "clipsgd/dataset.hpp"
#include "clipsgd/point.hpp"
#include "clipsgd/rng.hpp"

namespace clipsgd {

// Analytic constants attached to a problem.
//   L0, L1   (L0, L1)-smoothness: ||grad f(x) - grad f(y)|| <=
//            (L0 + L1 ||grad f(x)||) ||x - y|| whenever ||x - y|| <= 1/L1.
//   L        classical gradient-Lipschitz constant.
//   mu       strong convexity (0 when not strongly convex).
//   sigma_sq bound on E||grad f_xi(x) - grad f(x)||^2.
struct ProblemMeta {
  std::size_t dim = 0;
  double L0 = 0.0;
  double L1 = 0.0;
  double L = 0.0;
  double mu = 0.0;
  double sigma_sq = 0.0;
  std::optional<double> f_star;
  std::optional<Point> x_star;
};

// Objective oracle f(x) = E[f_xi(x)].
//
// Public entry points check the dimension of x and then dispatch to the
// do_* hooks. Instances are immutable; sample_grad draws from a generator the
// caller owns.
class Problem {
 public:
  virtual ~Problem() = default;

  const ProblemMeta& meta() const { return meta_; }
  std::size_t dim() const { return meta_.dim; }
  virtual std::string name() const = 0;

  double value(const Point& x) const;
  Point grad(const Point& x) const;
  Point sample_grad(const Point& x, KeyedRng& rng) const;

  // E||grad f_xi(x) - grad f(x)||^2 at x, exact or over every data row.
  double variance_at(const Point& x) const;

  // E[clip_c(grad f_xi(x))] in closed form, for problems with finitely many
  // or no noise outcomes. nullopt when only Monte-Carlo is possible.
  std::optional<Point> expected_clipped_grad_exact(const Point& x,
                                                   double c) const;

  bool deterministic() const { return meta_.sigma_sq == 0.0; }

 protected:
  explicit Problem(ProblemMeta meta) : meta_(std::move(meta)) {}

  virtual double do_value(const Point& x) const = 0;
  virtual Point do_grad(const Point& x) const = 0;
  virtual Point do_sample_grad(const Point& x, KeyedRng& rng) const = 0;
  virtual double do_variance_at(const Point& x) const = 0;
  virtual std::optional<Point> do_expected_clipped_grad(const Point& x,
                                                        double c) const;

  ProblemMeta meta_;

 private:
  void check_dim(const Point& x) const;
};

// f(x) = 1/2 sum_i h_i (x_i - s_i)^2 with exact gradients. L0 = L = max h,
// L1 = 0, mu = min h, f* = 0 at x* = s.
class QuadraticProblem final : public Problem {
 public:
  QuadraticProblem(std::vector<double> curvature, Point center);
  // L/2 ||x||^2 in dim dimensions.
  static QuadraticProblem isotropic(std::size_t dim, double L);

  std::string name() const override { return "quadratic"; }

 private:
  double do_value(const Point& x) const override;
  Point do_grad(const Point& x) const override;
  Point do_sample_grad(const Point& x, KeyedRng& rng) const override;
  double do_variance_at(const Point& x) const override;

  std::vector<double> curvature_;
  Point center_;
};

// One-dimensional two-outcome quadratic: f_xi(x) = 1/2 (x + a)^2 with
// probability p, 1/2 x^2 otherwise. grad f(x) = x + p a, sigma^2 =
// p (1 - p) a^2, x* = -p a. Its clipped-SGD fixed point is computable in closed
// form, which makes it the adversarial instance for the clipping bias.
class BernoulliShiftQuadratic final : public Problem {
 public:
  // Requires a > 0 and 0 < p < 1/2.
  BernoulliShiftQuadratic(double a, double p);

  double shift() const { return a_; }
  double prob() const { return p_; }
  std::string name() const override { return "bernoulli_shift"; }

 private:
  double do_value(const Point& x) const override;
  Point do_grad(const Point& x) const override;
  Point do_sample_grad(const Point& x, KeyedRng& rng) const override;
  double do_variance_at(const Point& x) const override;
  std::optional<Point> do_expected_clipped_grad(const Point& x,
                                                double c) const override;

  double a_;
  double p_;
};

// f(x, xi) = L/2 ||x||^2 + <x, xi> with xi_i ~ chi^2(1) independently.
// grad f(x) = L x + 1, sigma^2 = 2 d, x* = -(1/L) 1, f* = -d / (2L).
class ChiSquareQuadratic final : public Problem {
 public:
  ChiSquareQuadratic(std::size_t dim = 100, double L = 0.1);

  std::string name() const override { return "chi_square"; }

 private:
  double do_value(const Point& x) const override;
  Point do_grad(const Point& x) const override;
  Point do_sample_grad(const Point& x, KeyedRng& rng) const override;
  double do_variance_at(const Point& x) const override;

  double L_;
};

struct LogisticOptions {
  double lambda = 0.0;     // ridge weight, lambda/2 ||x||^2
  bool intercept = false;  // append a constant-1 feature to every row
  bool normalize = false;  // scale every row to unit Euclidean norm
  // Newton-solve for x*, f* at construction. Requires lambda > 0.
  bool solve_optimum = false;
};

// Binary logistic regression:
//   f(x) = (1/n) sum_i log(1 + exp(-y_i <a_i, x>)) + lambda/2 ||x||^2,
// with one uniformly drawn row per stochastic gradient. L comes from
// estimate_L(data) + lambda; sigma_sq is the exhaustive per-row variance at
// x = 0, which is an estimate and not a global bound.
class LogisticRegressionProblem final : public Problem {
 public:
  explicit LogisticRegressionProblem(Dataset data,
                                     LogisticOptions options = {});

  const Dataset& data() const { return data_; }
  double lambda() const { return options_.lambda; }
  std::string name() const override { return "logistic"; }

 private:
  double do_value(const Point& x) const override;
  Point do_grad(const Point& x) const override;
  Point do_sample_grad(const Point& x, KeyedRng& rng) const override;
  double do_variance_at(const Point& x) const override;

  double margin(std::size_t row, const Point& x) const;
  // Per-row loss derivative with respect to the margin argument <a_i, x>.
  double row_scale(std::size_t row, const Point& x) const;
  void solve_optimum();

  Dataset data_;
  LogisticOptions options_;
};

// Applies the intercept / normalization transforms of LogisticOptions.
Dataset prepare_logistic_data(Dataset data, const LogisticOptions& options);

}  // namespace clipsgd

#endif  // CLIPSGD_PROBLEMS_HPP_
