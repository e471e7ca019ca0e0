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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "clipsgd/clip.hpp"
#include "clipsgd/error.hpp"
#include "clipsgd/optimizers.hpp"
#include "clipsgd/problems.hpp"
#include "clipsgd/theory.hpp"

namespace clipsgd {
namespace {

RunConfig config(Method m, double c, double eta, std::size_t T, Point x0,
                 std::uint64_t seed = 1) {
  RunConfig rc;
  rc.method = m;
  rc.c = c;
  rc.eta = eta;
  rc.T = T;
  rc.x0 = std::move(x0);
  rc.seed = seed;
  return rc;
}

TEST(RunGd, UnitQuadraticOneStep) {
  const auto q = QuadraticProblem::isotropic(1, 1.0);
  const Trace tr = run_gd(q, config(Method::kGd, kNoClipping, 1, 1, Point{1}));
  EXPECT_EQ(tr.final_point, Point{0});
  ASSERT_EQ(tr.records.size(), 2u);
}

TEST(RunGd, ClippedHalfwayAfterTwoSteps) {
  const auto q = QuadraticProblem::isotropic(1, 1.0);
  const Trace tr =
      run_gd(q, config(Method::kClippedGd, 0.25, 1, 2, Point{1}));
  EXPECT_EQ(tr.final_point[0], 0.5);
  std::vector<double> norms;
  for (const auto& r : tr.records) norms.push_back(r.grad_norm);
  EXPECT_EQ(norms, (std::vector<double>{1, 0.75, 0.5}));
  EXPECT_EQ(tr.records[0].clipped_fraction, 1.0);
  EXPECT_EQ(tr.records[0].applied_norm, 0.25);
}

TEST(RunGd, StartAtMinimizerIsConstant) {
  const QuadraticProblem q({1, 2}, Point{3, -1});
  const Trace tr =
      run_gd(q, config(Method::kClippedGd, 0.5, 0.3, 10, Point{3, -1}));
  for (const auto& r : tr.records) {
    EXPECT_EQ(r.f_val, 0.0);
    EXPECT_EQ(r.grad_norm, 0.0);
  }
  EXPECT_EQ(tr.final_point, (Point{3, -1}));
}

TEST(RunGd, TraceLengthAndMinimum) {
  const auto q = QuadraticProblem::isotropic(3, 2.0);
  const Trace tr =
      run_gd(q, config(Method::kClippedGd, 1, 0.1, 50, Point{3, 3, 3}));
  ASSERT_EQ(tr.records.size(), 51u);
  double m = tr.records[0].grad_norm;
  for (const auto& r : tr.records) m = std::min(m, r.grad_norm);
  EXPECT_EQ(tr.min_grad_norm, m);
  EXPECT_EQ(tr.iterations, 50u);
}

TEST(RunGd, RejectsWrongMethodAndConfig) {
  const auto q = QuadraticProblem::isotropic(1, 1.0);
  EXPECT_THROW(run_gd(q, config(Method::kSgd, kNoClipping, 1, 1, Point{1})),
               InvalidInput);
  EXPECT_THROW(run_gd(q, config(Method::kGd, 1.0, 1, 1, Point{1})),
               InvalidInput);
  EXPECT_THROW(
      run_gd(q, config(Method::kClippedGd, kNoClipping, 1, 1, Point{1})),
      InvalidInput);
  EXPECT_THROW(run_gd(q, config(Method::kClippedGd, 1, 1, 1, Point{1, 2})),
               InvalidInput);
  RunConfig rc = config(Method::kClippedSgd, 1, 1, 1, Point{1});
  rc.sigma_dp = 1.0;
  EXPECT_THROW(run(q, rc), InvalidInput);
}

TEST(RunGd, DivergenceCarriesTrace) {
  const auto q = QuadraticProblem::isotropic(1, 1.0);
  try {
    run_gd(q, config(Method::kGd, kNoClipping, 3.0, 1000, Point{1}));
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_FALSE(e.trace().records.empty());
    EXPECT_LT(e.trace().records.size(), 1001u);
  }
}

TEST(RunGd, ConvexMonotone) {
  const QuadraticProblem q({0.1, 1.0, 3.0}, Point{1, 2, 3});
  for (double c : {0.01, 0.3, 10.0}) {
    const double eta = max_stepsize(Theorem::kDetConvex, 3.0, 0.0, c);
    const Trace tr =
        run_gd(q, config(Method::kClippedGd, c, eta, 500, Point{-5, 4, 9}));
    for (std::size_t t = 1; t < tr.records.size(); ++t) {
      EXPECT_LE(tr.records[t].f_val, tr.records[t - 1].f_val);
    }
  }
}

TEST(RunClippedSgd, DeterministicProblemMatchesGd) {
  const QuadraticProblem q({0.5, 2.0}, Point{1, -1});
  RunConfig rc = config(Method::kClippedGd, 0.7, 0.2, 40, Point{4, 4});
  const Trace a = run_gd(q, rc);
  rc.method = Method::kClippedSgd;
  const Trace b = run_clipped_sgd(q, rc);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.final_point, b.final_point);
  // Averaging B copies rounds, so only agreement to rounding.
  rc.B = 3;
  const Trace m = run_clipped_sgd(q, rc);
  ASSERT_EQ(m.records.size(), a.records.size());
  for (std::size_t t = 0; t < a.records.size(); ++t) {
    EXPECT_NEAR(m.records[t].f_val, a.records[t].f_val,
                1e-12 * (1 + a.records[t].f_val));
  }
  EXPECT_LE(distance(m.final_point, a.final_point), 1e-12);
}

TEST(RunClippedSgd, SameSeedSameTrace) {
  const ChiSquareQuadratic chi(10, 0.1);
  RunConfig rc = config(Method::kClippedSgd, 1.0, 0.05, 200, Point(10), 42);
  rc.B = 4;
  const Trace a = run(chi, rc);
  const Trace b = run(chi, rc);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.final_point, b.final_point);
  rc.seed = 43;
  EXPECT_NE(run(chi, rc).final_point, a.final_point);
}

TEST(RunClippedSgd, InfiniteCMatchesSgd) {
  const BernoulliShiftQuadratic b(4, 0.25);
  RunConfig rc = config(Method::kSgd, kNoClipping, 0.01, 300, Point{2}, 9);
  const Trace plain = run(b, rc);
  // A threshold no sample can reach behaves exactly like no clipping.
  rc.method = Method::kClippedSgd;
  rc.c = 1e300;
  const Trace huge = run(b, rc);
  EXPECT_EQ(plain.final_point, huge.final_point);
}

TEST(RunClippedSgd, StepDisplacementBounded) {
  const ChiSquareQuadratic chi(5, 0.1);
  RunConfig rc = config(Method::kClippedSgd, 0.3, 0.5, 500, Point(5, 2.0));
  rc.B = 2;
  const Trace tr = run(chi, rc);
  for (const auto& r : tr.records) {
    EXPECT_LE(r.applied_norm, rc.c * (1 + 1e-15));
    EXPECT_LE(r.max_sample_norm, rc.c);
    EXPECT_GE(r.clipped_fraction, 0.0);
    EXPECT_LE(r.clipped_fraction, 1.0);
  }
}

TEST(RunClippedSgd, FixedPointHasZeroMeanUpdate) {
  const LowerBoundInstance inst = build_lower_bound_small_c(1.0, 2.0);
  const BernoulliShiftQuadratic b = inst.problem();
  const std::size_t n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    RunConfig rc =
        config(Method::kClippedSgd, inst.c, 1.0, 1, Point{inst.x_fixed}, s);
    const Trace tr = run(b, rc);
    const double step = tr.final_point[0] - inst.x_fixed;
    sum += step;
    sum2 += step * step;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_LE(std::abs(mean), 4.0 * se);
}

TEST(RunDpSgd, ZeroNoiseMatchesClippedSgd) {
  const ChiSquareQuadratic chi(4, 0.1);
  RunConfig rc = config(Method::kClippedSgd, 0.8, 0.1, 100, Point(4), 5);
  const Trace a = run(chi, rc);
  rc.method = Method::kDpSgd;
  const Trace b = run_dp_sgd(chi, rc);
  EXPECT_EQ(a.records, b.records);
}

TEST(RunDpSgd, NoiseEnergyAndSensitivity) {
  const ChiSquareQuadratic chi(10, 0.1);
  RunConfig rc = config(Method::kDpSgd, 0.5, 1e-3, 10000, Point(10), 17);
  rc.B = 8;
  rc.sigma_dp = 1.0;
  const Trace tr = run(chi, rc);
  double noise = 0.0;
  for (std::size_t t = 0; t + 1 < tr.records.size(); ++t) {
    EXPECT_LE(tr.records[t].max_sample_norm, rc.c);
    noise += tr.records[t].noise_sq_norm;
  }
  EXPECT_NEAR(noise / 10000.0, 1.0, 0.05);
}

TEST(RunOptions, StrideAndEarlyStop) {
  const auto q = QuadraticProblem::isotropic(1, 1.0);
  RunOptions opt;
  opt.stride = 10;
  const Trace tr =
      run(q, config(Method::kClippedGd, 0.1, 0.5, 95, Point{5}), opt);
  ASSERT_EQ(tr.records.size(), 11u);
  EXPECT_EQ(tr.records.back().t, 95u);

  RunOptions stop;
  stop.stop_grad_norm = 0.5;
  const Trace st =
      run(q, config(Method::kClippedGd, 1.0, 0.5, 1000, Point{5}), stop);
  ASSERT_TRUE(st.hit_target_at.has_value());
  EXPECT_LE(st.records.back().grad_norm, 0.5);
  EXPECT_EQ(st.records.back().t, *st.hit_target_at);

  const Trace zero =
      run(q, config(Method::kClippedGd, 1.0, 0.5, 1000, Point{0.1}), stop);
  EXPECT_EQ(*zero.hit_target_at, 0u);
}

TEST(Methods, ParseRoundTrip) {
  for (Method m : {Method::kGd, Method::kClippedGd, Method::kSgd,
                   Method::kClippedSgd, Method::kDpSgd}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_FALSE(parse_method("adam"));
}

}  // namespace
}  // namespace clipsgd
